#include "glagan/common.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

extern "C" void openblas_set_num_threads(int);

namespace {

// OpenBLAS's runtime CPU detection does not recognize the masked CPUID some
// virtualized hosts report and falls back to a slow generic kernel. Hint the
// proper core type before the library initializes; priority 101 runs ahead of
// the BLAS constructor when OpenBLAS is linked statically. Respects any value
// already present in the environment and only fires when AVX-512 is real.
extern "C" __attribute__((constructor(101))) void glagan_blas_coretype_hint() {
  if (__builtin_cpu_supports("avx512f"))
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", /*overwrite=*/0);
  else if (__builtin_cpu_supports("avx2"))
    setenv("OPENBLAS_CORETYPE", "HASWELL", /*overwrite=*/0);
}

int g_threads = 0;

}  // namespace

namespace glagan {

void set_compute_threads(int n) {
  unsigned hw = std::thread::hardware_concurrency();
  if (n <= 0) n = static_cast<int>(std::min(hw == 0 ? 4u : hw, 4u));
  g_threads = n;
  openblas_set_num_threads(n);
  omp_set_num_threads(n);
}

int compute_threads() {
  if (g_threads == 0) set_compute_threads(0);
  return g_threads;
}

}  // namespace glagan
