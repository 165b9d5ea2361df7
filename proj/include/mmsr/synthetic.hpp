#pragma once

#include <string>
#include <vector>

#include "mmsr/volume.hpp"

namespace mmsr {

// Desk-scale procedural stand-in for the clinical / micro CT pair.
// Micro-like volumes are fine-scale textures (tube, blob and speckle
// structures); clinical-like volumes come from DISJOINT procedural
// instances degraded by blur, 8x block averaging, intensity remapping
// and noise. HR counterparts of the clinical set are retained for
// oracle-only evaluation.
struct SyntheticParams {
    int n_volumes = 5;       // per domain
    int hr_size = 256;       // in-plane size of clinical HR truth (LR = /8)
    int micro_size = 384;    // in-plane size of micro-like volumes
    int n_slices = 8;
    double noise_sigma = 15.0; // HU-like noise added to clinical LR
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    std::vector<CTVolume> micro;
    std::vector<CTVolume> clinical;
    std::vector<CTVolume> clinical_hr_truth;   // same order as clinical
    std::vector<CTVolume> clinical_prenoise;   // LR before noise, for checks
    std::vector<int> micro_instances;          // procedural provenance ids
    std::vector<int> clinical_instances;
};

SyntheticDataset make_synthetic_dataset(const SyntheticParams& params);

// Layout: dir/micro/*.nii, dir/clinical/*.nii, dir/gt/*.nii + dataset.json
void write_synthetic_dataset(const SyntheticDataset& ds, const std::string& dir);

} // namespace mmsr
