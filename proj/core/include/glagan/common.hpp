#pragma once

#include <stdexcept>
#include <string>

namespace glagan {

inline const char* version() {
#ifdef GLAGAN_VERSION
  return GLAGAN_VERSION;
#else
  return "0.1.0";
#endif
}

// Error taxonomy used for CLI exit codes: config errors -> 2, I/O errors -> 3,
// shape/resolution mismatches -> 4, everything else -> 1.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thread budget for BLAS and OpenMP regions. Call once near process start.
void set_compute_threads(int n);
int compute_threads();

}  // namespace glagan
