#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmsr/tensor.hpp"

namespace mmsr {

enum class Modality { clinical, micro, synthetic_micro };
std::string modality_name(Modality m);
Modality modality_from_name(const std::string& s);

// 3D scalar grid with voxel spacing; the unit of ingestion.
// voxels indexed (z * ny + y) * nx + x.
struct CTVolume {
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> voxels;
    double sx = 1.0, sy = 1.0, sz = 1.0;
    std::string unit = "mm";
    Modality modality = Modality::clinical;
    std::string id;

    void allocate(int x, int y, int z, double fill = 0.0);
    size_t voxel_count() const { return voxels.size(); }
    double& at(int x, int y, int z) {
        return voxels[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
    double at(int x, int y, int z) const {
        return voxels[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
    ImagePatch axial_slice(int z) const; // height=ny, width=nx
    void set_axial_slice(int z, const ImagePatch& p);
    void validate() const;
};

struct LungMask {
    int nx = 0, ny = 0, nz = 0;
    std::vector<std::uint8_t> mask;
    std::string source_id;

    void allocate(int x, int y, int z);
    std::uint8_t& at(int x, int y, int z) {
        return mask[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
    std::uint8_t at(int x, int y, int z) const {
        return mask[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
    size_t count() const;
};

// Affine intensity map [lo,hi] <-> [-1,1], recorded for inversion.
struct NormParams {
    double lo = 0.0;
    double hi = 1.0;
    double to_normalized(double v) const;
    double to_raw(double v) const;
};

// Percentile-clipped (0.5..99.5 within the mask) linear map to [-1,1].
// Pass nullptr to compute percentiles over the whole volume.
std::pair<CTVolume, NormParams> normalize(const CTVolume& vol, const LungMask* mask = nullptr);
CTVolume denormalize(const CTVolume& vol, const NormParams& p);

// Format dispatch on extension: .nii / .nii.gz or .raw (+ JSON sidecar).
CTVolume load_volume(const std::string& path, Modality modality);
void save_volume(const CTVolume& vol, const std::string& path);

// raw int16 little-endian + JSON sidecar {shape, spacing, unit, modality}
CTVolume load_raw_volume(const std::string& raw_path, Modality modality);
void save_raw_volume(const CTVolume& vol, const std::string& raw_path);

} // namespace mmsr
