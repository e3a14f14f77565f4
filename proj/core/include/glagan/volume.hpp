#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "glagan/common.hpp"
#include "glagan/tensor.hpp"

namespace glagan {

// 3D scalar intensity grid. shape = (nx, ny, nz), x fastest in memory (the
// NIfTI on-disk order), spacing in mm per axis (metadata only).
struct Volume {
  std::array<int, 3> shape{0, 0, 0};
  std::array<float, 3> spacing{1.f, 1.f, 1.f};
  std::vector<float> data;

  Volume() = default;
  Volume(int nx, int ny, int nz, float fill = 0.f)
      : shape{nx, ny, nz}, data(static_cast<size_t>(nx) * ny * nz, fill) {}

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  float& at(int x, int y, int z) {
    return data[static_cast<size_t>(x) + static_cast<size_t>(shape[0]) * (y + static_cast<size_t>(shape[1]) * z)];
  }
  float at(int x, int y, int z) const {
    return data[static_cast<size_t>(x) + static_cast<size_t>(shape[0]) * (y + static_cast<size_t>(shape[1]) * z)];
  }
  bool same_shape(const Volume& o) const { return shape == o.shape; }

  // View as a (1, 1, nz, ny, nx) NN tensor; the flat buffer order matches.
  Tensor<float> as_tensor() const {
    Tensor<float> t({1, 1, shape[2], shape[1], shape[0]});
    t.data.assign(data.begin(), data.end());
    return t;
  }
  static Volume from_tensor(const Tensor<float>& t, std::array<float, 3> spacing = {1, 1, 1});
};

// Disjoint tiling of a volume into k = s1*s2*s3 patches.
struct PatchGrid {
  int k = 1;
  std::array<int, 3> splits{1, 1, 1};

  // Canonical factorizations; the k=4 split reproduces 32x32x64 patches on a
  // 64^3 volume, the others extend the same doubling pattern.
  static PatchGrid for_k(int k);

  std::array<int, 3> patch_shape(const std::array<int, 3>& vol_shape) const;
};

// Min-max rescale to [0,1]; a constant volume maps to all zeros.
Volume normalize_intensity(const Volume& v);

// Splits v into grid.k disjoint patches covering v exactly. Patches are
// returned in row-major grid order: the x-axis split index varies fastest,
// then y, then z. Throws shape_error when an axis is not divisible.
std::vector<Volume> tile_patches(const Volume& v, const PatchGrid& grid);

// Exact inverse of tile_patches.
Volume fuse_patches(const std::vector<Volume>& patches, const PatchGrid& grid);

}  // namespace glagan
