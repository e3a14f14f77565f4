#include "glagan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "glagan/rng.hpp"

namespace glagan {
namespace {

// Normalized elliptical radius: < 1 inside the brain ellipsoid.
struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> semi;

  static Ellipsoid centered(const std::array<int, 3>& shape) {
    Ellipsoid e;
    for (int a = 0; a < 3; ++a) {
      e.center[a] = 0.5 * (shape[a] - 1);
      e.semi[a] = 0.42 * shape[a];
    }
    return e;
  }
  double rho(int x, int y, int z) const {
    double dx = (x - center[0]) / semi[0];
    double dy = (y - center[1]) / semi[1];
    double dz = (z - center[2]) / semi[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }
};

constexpr double kWmCoreRho = 0.62;  // inside: white matter; shell up to 1: gray matter

// Border-renormalized separable Gaussian blur (kernel weights rescaled to the
// in-bounds support so edges are not darkened).
Volume gaussian_blur(const Volume& v, double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i)
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));

  Volume cur = v, next = v;
  const auto& s = v.shape;
  const std::array<int64_t, 3> stride = {1, s[0], static_cast<int64_t>(s[0]) * s[1]};
  for (int axis = 0; axis < 3; ++axis) {
    int len = s[axis];
    size_t idx = 0;
    for (int z = 0; z < s[2]; ++z)
      for (int y = 0; y < s[1]; ++y)
        for (int x = 0; x < s[0]; ++x, ++idx) {
          int p = axis == 0 ? x : axis == 1 ? y : z;
          double acc = 0, wsum = 0;
          for (int i = -radius; i <= radius; ++i) {
            int q = p + i;
            if (q < 0 || q >= len) continue;
            double w = kernel[static_cast<size_t>(i + radius)];
            acc += w * cur.data[idx + static_cast<size_t>(i * stride[axis])];
            wsum += w;
          }
          next.data[idx] = static_cast<float>(acc / wsum);
        }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace

Diagnosis diagnosis_from_string(const std::string& s) {
  if (s == "AD" || s == "ad") return Diagnosis::AD;
  if (s == "CN" || s == "cn") return Diagnosis::CN;
  throw config_error("unknown diagnostic label: " + s);
}

Volume AtlasLabelMap::to_volume() const {
  Volume v(shape[0], shape[1], shape[2]);
  for (size_t i = 0; i < labels.size(); ++i) v.data[i] = static_cast<float>(labels[i]);
  return v;
}

AtlasLabelMap AtlasLabelMap::from_volume(const Volume& v, int r) {
  AtlasLabelMap m;
  m.shape = v.shape;
  m.r = r;
  m.labels.resize(v.data.size());
  for (size_t i = 0; i < v.data.size(); ++i) {
    int32_t lbl = static_cast<int32_t>(std::lround(v.data[i]));
    if (lbl < 0 || lbl > r)
      throw io_error("atlas label " + std::to_string(lbl) + " outside 0.." + std::to_string(r));
    m.labels[i] = lbl;
  }
  return m;
}

bool is_ad_sensitive_region(int region, int r) {
  return region >= 1 && region <= std::max(1, r / 4);
}

std::pair<AtlasLabelMap, TissueMasks> synthetic_atlas(const PhantomSpec& spec) {
  const auto& s = spec.shape;
  if (spec.r < 1) throw config_error("atlas region count must be >= 1");
  for (int a = 0; a < 3; ++a)
    if (s[a] < 8) throw config_error("phantom shape axes must be >= 8");

  Ellipsoid ell = Ellipsoid::centered(s);

  // Seed points inside the ellipsoid, one per distinct voxel so every region
  // owns at least the voxel it sits in.
  auto rng = make_rng(spec.seed, RngStream::atlas);
  std::uniform_real_distribution<double> ux(0, s[0] - 1), uy(0, s[1] - 1), uz(0, s[2] - 1);
  std::vector<std::array<double, 3>> seeds;
  std::vector<int64_t> taken;
  int64_t interior = 0;
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x)
        if (ell.rho(x, y, z) < 1.0) ++interior;
  if (spec.r > interior)
    throw config_error("region count " + std::to_string(spec.r) +
                       " exceeds interior voxel count " + std::to_string(interior));

  int guard = 0;
  while (static_cast<int>(seeds.size()) < spec.r) {
    if (++guard > 100000) throw std::runtime_error("atlas seeding failed to converge");
    std::array<double, 3> p{ux(rng), uy(rng), uz(rng)};
    int vx = static_cast<int>(std::lround(p[0])), vy = static_cast<int>(std::lround(p[1])),
        vz = static_cast<int>(std::lround(p[2]));
    if (ell.rho(vx, vy, vz) >= 0.95) continue;
    int64_t key = vx + static_cast<int64_t>(s[0]) * (vy + static_cast<int64_t>(s[1]) * vz);
    if (std::find(taken.begin(), taken.end(), key) != taken.end()) continue;
    taken.push_back(key);
    seeds.push_back(p);
  }

  AtlasLabelMap atlas;
  atlas.shape = s;
  atlas.r = spec.r;
  atlas.labels.assign(static_cast<size_t>(s[0]) * s[1] * s[2], 0);
  TissueMasks masks{Volume(s[0], s[1], s[2]), Volume(s[0], s[1], s[2])};

  size_t idx = 0;
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x, ++idx) {
        double rho = ell.rho(x, y, z);
        if (rho >= 1.0) continue;
        int best = 0;
        double best_d = 1e300;
        for (int i = 0; i < spec.r; ++i) {
          double dx = x - seeds[i][0], dy = y - seeds[i][1], dz = z - seeds[i][2];
          double d = dx * dx + dy * dy + dz * dz;
          if (d < best_d) {
            best_d = d;
            best = i + 1;
          }
        }
        atlas.labels[idx] = best;
        if (rho < kWmCoreRho)
          masks.wm.data[idx] = 1.f;
        else
          masks.gm.data[idx] = 1.f;
      }

  // Every region owns at least its seed voxel; competing seeds can steal it,
  // so reclaim and verify.
  std::vector<int64_t> counts(static_cast<size_t>(spec.r) + 1, 0);
  for (int32_t l : atlas.labels) ++counts[static_cast<size_t>(l)];
  for (int i = 0; i < spec.r; ++i)
    if (counts[static_cast<size_t>(i + 1)] == 0)
      atlas.labels[static_cast<size_t>(taken[static_cast<size_t>(i)])] = i + 1;
  std::fill(counts.begin(), counts.end(), 0);
  for (int32_t l : atlas.labels) ++counts[static_cast<size_t>(l)];
  for (int i = 1; i <= spec.r; ++i)
    if (counts[static_cast<size_t>(i)] == 0)
      throw std::runtime_error("synthetic atlas produced an empty region");

  return {std::move(atlas), std::move(masks)};
}

std::vector<float> phantom_region_gains(const PhantomSpec& spec) {
  auto rng = make_rng(spec.seed, RngStream::gains);
  std::uniform_real_distribution<float> u(0.5f, 1.0f);
  std::uniform_real_distribution<float> u_hi(0.78f, 1.0f);
  std::vector<float> gains(static_cast<size_t>(spec.r) + 1, 0.f);
  for (int i = 1; i <= spec.r; ++i) {
    float g = u(rng);
    // AD-sensitive regions stay bright so the subtracted class effect is not
    // swallowed by the clamp at zero.
    gains[static_cast<size_t>(i)] = is_ad_sensitive_region(i, spec.r) ? u_hi(rng) : g;
  }
  return gains;
}

Volume phantom_ground_truth_pet(const Volume& mri, const AtlasLabelMap& atlas,
                                const PhantomSpec& spec, Diagnosis label) {
  if (mri.shape != atlas.shape) throw shape_error("phantom mapping: mri/atlas shape mismatch");
  auto gains = phantom_region_gains(spec);
  Volume blurred = gaussian_blur(mri, 1.5);
  Volume pet(mri.shape[0], mri.shape[1], mri.shape[2]);
  pet.spacing = mri.spacing;
  for (size_t i = 0; i < pet.data.size(); ++i) {
    int lbl = atlas.labels[i];
    float v = gains[static_cast<size_t>(lbl)] * blurred.data[i];
    if (label == Diagnosis::AD && is_ad_sensitive_region(lbl, atlas.r)) v -= spec.class_effect;
    pet.data[i] = std::clamp(v, 0.f, 1.f);
  }
  return pet;
}

PairedSample generate_phantom_pair(const PhantomSpec& spec, Diagnosis label,
                                   uint64_t sample_index) {
  auto [atlas, masks] = synthetic_atlas(spec);
  const auto& s = spec.shape;
  Ellipsoid ell = Ellipsoid::centered(s);

  // Smooth subject-specific texture: random Gaussian bumps inside the brain.
  auto blob_rng = make_rng(spec.seed, RngStream::blobs, sample_index);
  std::uniform_real_distribution<double> uc(0.15, 0.85);
  std::uniform_real_distribution<double> uw(0.10, 0.28);
  std::uniform_real_distribution<double> ua(0.35, 1.0);
  struct Blob {
    std::array<double, 3> c;
    double w, a;
  };
  std::vector<Blob> blobs(static_cast<size_t>(std::max(1, spec.n_blobs)));
  for (auto& b : blobs) {
    for (int a = 0; a < 3; ++a) b.c[a] = uc(blob_rng) * s[a];
    b.w = uw(blob_rng) * (s[0] + s[1] + s[2]) / 3.0;
    b.a = ua(blob_rng);
  }

  Volume mri(s[0], s[1], s[2]);
  size_t idx = 0;
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x, ++idx) {
        double rho = ell.rho(x, y, z);
        if (rho >= 1.0) continue;
        double field = 0;
        for (const auto& b : blobs) {
          double dx = x - b.c[0], dy = y - b.c[1], dz = z - b.c[2];
          field += b.a * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz) / (b.w * b.w));
        }
        double texture = 0.7 + 0.3 * std::tanh(field - 0.6);
        double base = rho < kWmCoreRho ? 0.62 : 0.92;
        mri.data[idx] = static_cast<float>(base * texture);
      }

  if (spec.noise_sigma > 0.f) {
    auto noise_rng = make_rng(spec.seed, RngStream::noise, sample_index);
    std::normal_distribution<float> n(0.f, spec.noise_sigma);
    for (auto& v : mri.data) v += n(noise_rng);
  }
  mri = normalize_intensity(mri);

  PairedSample sample;
  sample.subject_id = "subj_" + std::to_string(sample_index);
  sample.mri = mri;
  sample.pet = phantom_ground_truth_pet(mri, atlas, spec, label);
  sample.label = label;
  sample.seed = derive_seed(spec.seed, static_cast<uint64_t>(RngStream::blobs), sample_index);
  return sample;
}

std::vector<PairedSample> generate_dataset(int n, double ad_fraction, const PhantomSpec& spec) {
  if (n < 1) throw config_error("dataset size must be >= 1");
  int n_ad = static_cast<int>(std::lround(n * ad_fraction));
  std::vector<PairedSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Diagnosis label = i < n_ad ? Diagnosis::AD : Diagnosis::CN;
    auto sample = generate_phantom_pair(spec, label, static_cast<uint64_t>(i));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "subj_%04d", i);
    sample.subject_id = buf;
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace glagan
