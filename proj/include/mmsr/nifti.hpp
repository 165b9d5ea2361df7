#pragma once

#include <string>

#include "mmsr/volume.hpp"

namespace mmsr {

// Minimal NIfTI-1 single-file support (.nii / .nii.gz). Reads uint8,
// int16, uint16, int32, float32 and float64 voxel data with scl slope /
// intercept applied; writes float32.
CTVolume load_nifti(const std::string& path);
void save_nifti(const CTVolume& vol, const std::string& path);

} // namespace mmsr
