#include "glagan/volume.hpp"

#include <algorithm>
#include <cmath>

namespace glagan {

Volume Volume::from_tensor(const Tensor<float>& t, std::array<float, 3> spacing) {
  if (t.rank() != 5 || t.dim(0) != 1 || t.dim(1) != 1)
    throw shape_error("from_tensor: expected a (1,1,d,h,w) tensor");
  Volume v(static_cast<int>(t.dim(4)), static_cast<int>(t.dim(3)), static_cast<int>(t.dim(2)));
  v.spacing = spacing;
  v.data.assign(t.data.begin(), t.data.end());
  return v;
}

PatchGrid PatchGrid::for_k(int k) {
  PatchGrid g;
  g.k = k;
  switch (k) {
    case 1: g.splits = {1, 1, 1}; break;
    case 2: g.splits = {2, 1, 1}; break;
    case 4: g.splits = {2, 2, 1}; break;
    case 8: g.splits = {2, 2, 2}; break;
    default: throw config_error("patch count must be one of {1,2,4,8}, got " + std::to_string(k));
  }
  return g;
}

std::array<int, 3> PatchGrid::patch_shape(const std::array<int, 3>& vol_shape) const {
  std::array<int, 3> ps{};
  for (int a = 0; a < 3; ++a) {
    if (vol_shape[a] % splits[a] != 0)
      throw shape_error("volume axis " + std::to_string(a) + " (" + std::to_string(vol_shape[a]) +
                        ") not divisible by split " + std::to_string(splits[a]));
    ps[a] = vol_shape[a] / splits[a];
  }
  return ps;
}

Volume normalize_intensity(const Volume& v) {
  if (v.data.empty()) throw shape_error("normalize_intensity: empty volume");
  auto [mn_it, mx_it] = std::minmax_element(v.data.begin(), v.data.end());
  float mn = *mn_it, mx = *mx_it;
  if (!std::isfinite(mn) || !std::isfinite(mx))
    throw std::runtime_error("normalize_intensity: non-finite intensities");
  Volume out = v;
  if (mx <= mn) {
    std::fill(out.data.begin(), out.data.end(), 0.f);
    return out;
  }
  float inv = 1.f / (mx - mn);
  for (auto& x : out.data) x = (x - mn) * inv;
  return out;
}

std::vector<Volume> tile_patches(const Volume& v, const PatchGrid& grid) {
  auto ps = grid.patch_shape(v.shape);
  const auto& s = grid.splits;
  std::vector<Volume> patches;
  patches.reserve(static_cast<size_t>(grid.k));
  for (int gz = 0; gz < s[2]; ++gz)
    for (int gy = 0; gy < s[1]; ++gy)
      for (int gx = 0; gx < s[0]; ++gx) {
        Volume p(ps[0], ps[1], ps[2]);
        p.spacing = v.spacing;
        for (int z = 0; z < ps[2]; ++z)
          for (int y = 0; y < ps[1]; ++y) {
            const float* src = &v.at(gx * ps[0], gy * ps[1] + y, gz * ps[2] + z);
            std::copy(src, src + ps[0], &p.at(0, y, z));
          }
        patches.push_back(std::move(p));
      }
  return patches;
}

Volume fuse_patches(const std::vector<Volume>& patches, const PatchGrid& grid) {
  if (static_cast<int>(patches.size()) != grid.k)
    throw shape_error("fuse_patches: expected " + std::to_string(grid.k) + " patches, got " +
                      std::to_string(patches.size()));
  const auto& s = grid.splits;
  const auto ps = patches.front().shape;
  for (const auto& p : patches)
    if (p.shape != ps) throw shape_error("fuse_patches: inconsistent patch shapes");
  Volume out(ps[0] * s[0], ps[1] * s[1], ps[2] * s[2]);
  out.spacing = patches.front().spacing;
  size_t idx = 0;
  for (int gz = 0; gz < s[2]; ++gz)
    for (int gy = 0; gy < s[1]; ++gy)
      for (int gx = 0; gx < s[0]; ++gx) {
        const Volume& p = patches[idx++];
        for (int z = 0; z < ps[2]; ++z)
          for (int y = 0; y < ps[1]; ++y) {
            const float* src = &p.at(0, y, z);
            std::copy(src, src + ps[0], &out.at(gx * ps[0], gy * ps[1] + y, gz * ps[2] + z));
          }
      }
  return out;
}

}  // namespace glagan
