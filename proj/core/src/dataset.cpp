#include "glagan/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "glagan/nifti.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace glagan {

void write_dataset(const std::string& root, const std::vector<PairedSample>& samples,
                   const AtlasLabelMap& atlas, const TissueMasks& masks, const PhantomSpec& spec,
                   double mri_only_fraction) {
  fs::create_directories(root);

  // The tail of the sample list loses its target volume to form MRI-only
  // ("incomplete") subjects, mirroring a cohort with missing scans.
  size_t n_missing = static_cast<size_t>(std::lround(mri_only_fraction * samples.size()));
  size_t first_missing = samples.size() - n_missing;

  json subjects = json::array();
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    bool has_pet = s.pet.has_value() && i < first_missing;
    fs::path dir = fs::path(root) / s.subject_id;
    fs::create_directories(dir);
    save_volume(s.mri, (dir / "mri.nii.gz").string());
    if (has_pet) save_volume(*s.pet, (dir / "pet.nii.gz").string());
    subjects.push_back({{"id", s.subject_id},
                        {"label", to_string(s.label)},
                        {"seed", s.seed},
                        {"has_pet", has_pet}});
  }

  save_volume(atlas.to_volume(), (fs::path(root) / "atlas.nii.gz").string(), /*as_int16=*/true);
  save_volume(masks.gm, (fs::path(root) / "masks_gm.nii.gz").string(), /*as_int16=*/true);
  save_volume(masks.wm, (fs::path(root) / "masks_wm.nii.gz").string(), /*as_int16=*/true);

  json manifest = {
      {"schema_version", 1},
      {"shape", {spec.shape[0], spec.shape[1], spec.shape[2]}},
      {"regions", spec.r},
      {"spec",
       {{"n_blobs", spec.n_blobs},
        {"class_effect", spec.class_effect},
        {"noise_sigma", spec.noise_sigma},
        {"seed", spec.seed}}},
      {"subjects", subjects},
  };
  std::ofstream out(fs::path(root) / "manifest.json");
  if (!out) throw io_error("cannot write manifest under " + root);
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& root) {
  fs::path manifest_path = fs::path(root) / "manifest.json";
  if (!fs::exists(manifest_path)) throw io_error("no such file: " + manifest_path.string());
  std::ifstream in(manifest_path);
  json manifest = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded()) throw io_error("malformed manifest: " + manifest_path.string());

  Dataset ds;
  ds.manifest.schema_version = manifest.at("schema_version").get<int>();
  auto shape = manifest.at("shape");
  ds.manifest.shape = {shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
  ds.manifest.regions = manifest.at("regions").get<int>();
  ds.manifest.spec.shape = ds.manifest.shape;
  ds.manifest.spec.r = ds.manifest.regions;
  if (manifest.contains("spec")) {
    const auto& sp = manifest["spec"];
    ds.manifest.spec.n_blobs = sp.value("n_blobs", 12);
    ds.manifest.spec.class_effect = sp.value("class_effect", 0.3f);
    ds.manifest.spec.noise_sigma = sp.value("noise_sigma", 0.02f);
    ds.manifest.spec.seed = sp.value("seed", uint64_t{1234});
  }

  Volume atlas_vol = load_volume((fs::path(root) / "atlas.nii.gz").string());
  ds.atlas = AtlasLabelMap::from_volume(atlas_vol, ds.manifest.regions);
  ds.masks.gm = load_volume((fs::path(root) / "masks_gm.nii.gz").string());
  ds.masks.wm = load_volume((fs::path(root) / "masks_wm.nii.gz").string());

  for (const auto& subj : manifest.at("subjects")) {
    DatasetManifest::Entry e;
    e.id = subj.at("id").get<std::string>();
    e.label = diagnosis_from_string(subj.at("label").get<std::string>());
    e.seed = subj.value("seed", uint64_t{0});
    e.has_pet = subj.at("has_pet").get<bool>();
    ds.manifest.subjects.push_back(e);

    PairedSample s;
    s.subject_id = e.id;
    s.label = e.label;
    s.seed = e.seed;
    fs::path dir = fs::path(root) / e.id;
    s.mri = load_volume((dir / "mri.nii.gz").string());
    if (e.has_pet) s.pet = load_volume((dir / "pet.nii.gz").string());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<std::string> attach_synthesized(Dataset& ds, const std::string& synth_dir) {
  std::vector<std::string> filled;
  for (auto& s : ds.samples) {
    if (s.pet.has_value()) continue;
    fs::path p = fs::path(synth_dir) / s.subject_id / "pet_synth.nii.gz";
    if (!fs::exists(p)) throw io_error("no such file: " + p.string());
    s.pet = load_volume(p.string());
    if (!s.pet->same_shape(s.mri)) throw shape_error("synthesized volume shape mismatch for " + s.subject_id);
    filled.push_back(s.subject_id);
  }
  return filled;
}

}  // namespace glagan
