#pragma once

#include <string>
#include <vector>

#include "mmsr/volume.hpp"

namespace mmsr {

struct PatchSample {
    ImagePatch patch;
    std::string volume_id;
    int slice_index = 0;
    int row = 0, col = 0;
    Modality modality = Modality::clinical;
};

// Rejection-samples axial patches with at least half their pixels inside
// the mask. Deterministic given the seed; values clamped to [-1,1]
// (inputs are expected to be normalized already).
std::vector<PatchSample> sample_patches(const CTVolume& vol, const LungMask& mask, int size,
                                        int count, std::uint64_t seed);

// Patch cache: directory of float32 binary patches + JSON manifest.
void save_patch_cache(const std::vector<PatchSample>& patches, const std::string& dir);
std::vector<PatchSample> load_patch_cache(const std::string& dir);

} // namespace mmsr
