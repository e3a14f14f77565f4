#pragma once

#include <string>

#include "glagan/volume.hpp"

namespace glagan {

// NIfTI-1 single-file I/O (.nii or .nii.gz, chosen by extension).
//
// load_volume reads UINT8/INT16/INT32/FLOAT32/FLOAT64 payloads (byte-swapped
// files included), applies scl_slope/scl_inter when set, and fails with
// distinct messages for a missing file, a malformed header, and a non-3D
// payload. No intensity normalization is applied.
Volume load_volume(const std::string& path);

// Writes a FLOAT32 payload, or INT16 when as_int16 is set (label maps/masks).
void save_volume(const Volume& v, const std::string& path, bool as_int16 = false);

}  // namespace glagan
