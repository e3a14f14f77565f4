#pragma once

#include <cstdint>
#include <random>

namespace glagan {

// splitmix64 step; used to derive independent stream seeds from one master
// seed so that per-sample / per-purpose RNGs never share state.
inline uint64_t mix_seed(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index = 0) {
  return mix_seed(mix_seed(master ^ (0xa076'1d64'78bd'642full * (stream + 1))) + index);
}

inline std::mt19937_64 make_rng(uint64_t master, uint64_t stream, uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, stream, index));
}

// Named streams so call sites don't collide on ad-hoc constants.
enum class RngStream : uint64_t {
  atlas = 1,
  blobs = 2,
  noise = 3,
  gains = 4,
  init = 5,
  shuffle = 6,
  fold = 7,
  svm = 8,
  test = 99,
};

inline std::mt19937_64 make_rng(uint64_t master, RngStream s, uint64_t index = 0) {
  return make_rng(master, static_cast<uint64_t>(s), index);
}

}  // namespace glagan
