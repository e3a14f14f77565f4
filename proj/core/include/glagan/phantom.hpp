#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glagan/volume.hpp"

namespace glagan {

enum class Diagnosis : int { CN = 0, AD = 1 };

inline const char* to_string(Diagnosis d) { return d == Diagnosis::AD ? "AD" : "CN"; }
Diagnosis diagnosis_from_string(const std::string& s);

// One subject: source volume, optional target volume, diagnostic label.
struct PairedSample {
  std::string subject_id;
  Volume mri;
  std::optional<Volume> pet;
  Diagnosis label = Diagnosis::CN;
  uint64_t seed = 0;
};

// Integer region labeling: 0 = background, 1..r inside the brain ellipsoid.
struct AtlasLabelMap {
  std::array<int, 3> shape{0, 0, 0};
  int r = 0;
  std::vector<int32_t> labels;

  int32_t at(int x, int y, int z) const {
    return labels[static_cast<size_t>(x) + static_cast<size_t>(shape[0]) * (y + static_cast<size_t>(shape[1]) * z)];
  }
  Volume to_volume() const;
  static AtlasLabelMap from_volume(const Volume& v, int r);
};

// Disjoint binary gray-matter / white-matter masks.
struct TissueMasks {
  Volume gm;
  Volume wm;
};

struct PhantomSpec {
  std::array<int, 3> shape{32, 32, 32};
  int r = 16;             // atlas region count
  int n_blobs = 12;       // anatomical texture features per subject
  float class_effect = 0.3f;  // AD regional hypometabolism magnitude
  float noise_sigma = 0.02f;
  uint64_t seed = 1234;
};

// Voronoi partition of a centered ellipsoid into r regions plus an outer
// GM shell / inner WM core split. Deterministic for a fixed seed.
std::pair<AtlasLabelMap, TissueMasks> synthetic_atlas(const PhantomSpec& spec);

// Regions designated as AD-sensitive (where class_effect is subtracted from
// the target volume): the first quarter of region ids, at least one.
bool is_ad_sensitive_region(int region, int r);

// The fixed ground-truth mapping G*: per-region multiplicative gains applied
// to a Gaussian-blurred copy of the source, AD-sensitive regions attenuated
// by class_effect for AD subjects, clamped to [0,1]. Exposed so tests have an
// oracle target for synthesis quality.
Volume phantom_ground_truth_pet(const Volume& mri, const AtlasLabelMap& atlas,
                                const PhantomSpec& spec, Diagnosis label);

// Per-region gain table used by phantom_ground_truth_pet (index 0 unused).
std::vector<float> phantom_region_gains(const PhantomSpec& spec);

// One subject: blob-textured ellipsoid source + ground-truth target.
// Deterministic per (spec, label, sample_index).
PairedSample generate_phantom_pair(const PhantomSpec& spec, Diagnosis label,
                                   uint64_t sample_index = 0);

// round(n * ad_fraction) AD samples followed by CN samples, seeds derived
// from spec.seed; fully reproducible.
std::vector<PairedSample> generate_dataset(int n, double ad_fraction, const PhantomSpec& spec);

}  // namespace glagan
