#pragma once

#include <string>
#include <vector>

#include "glagan/phantom.hpp"

namespace glagan {

// On-disk dataset layout:
//   <root>/<subject_id>/mri.nii.gz
//   <root>/<subject_id>/pet.nii.gz        (absent for MRI-only subjects)
//   <root>/atlas.nii.gz  <root>/masks_gm.nii.gz  <root>/masks_wm.nii.gz
//   <root>/manifest.json
struct DatasetManifest {
  int schema_version = 1;
  std::array<int, 3> shape{0, 0, 0};
  int regions = 0;
  PhantomSpec spec;  // generation parameters for provenance
  struct Entry {
    std::string id;
    Diagnosis label;
    uint64_t seed;
    bool has_pet;
  };
  std::vector<Entry> subjects;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<PairedSample> samples;
  AtlasLabelMap atlas;
  TissueMasks masks;
};

void write_dataset(const std::string& root, const std::vector<PairedSample>& samples,
                   const AtlasLabelMap& atlas, const TissueMasks& masks, const PhantomSpec& spec,
                   double mri_only_fraction = 0.0);

Dataset load_dataset(const std::string& root);

// Fills in missing target volumes from <synth_dir>/<subject_id>/pet_synth.nii.gz.
// Returns the ids that were filled.
std::vector<std::string> attach_synthesized(Dataset& ds, const std::string& synth_dir);

}  // namespace glagan
