#pragma once

#include <map>
#include <optional>
#include <string>

#include "mmsr/loss.hpp"
#include "mmsr/volume.hpp"

namespace mmsr {

struct MetricsTriple {
    double mse = 0.0;
    double psnr = 0.0; // dB
    double ssim = 0.0; // standard-form similarity index
};

// PSNR with peak 2 (the [-1,1] range width); zero MSE reports the 99 dB
// sentinel instead of infinity.
double psnr_from_mse(double mse_value, double peak = 2.0);

// Agreement between an LR input and the 8x block average of its SR
// output; the one quantitative check that needs no ground truth.
MetricsTriple consistency_metrics(const ImagePatch& x, const ImagePatch& x_sr,
                                  const SSIMParams& p = SSIMParams{});

// Paired comparison against retained ground truth (synthetic data only).
MetricsTriple oracle_metrics(const ImagePatch& x_sr, const ImagePatch& hr_truth,
                             const SSIMParams& p = SSIMParams{});

struct VolumeMetrics {
    MetricsTriple consistency;
    std::optional<MetricsTriple> oracle;
};

struct MetricsReport {
    std::map<std::string, VolumeMetrics> per_volume;
    std::string config_digest;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
};

// Catmull-Rom bicubic upsampling, the visual comparison baseline.
ImagePatch bicubic_upsample(const ImagePatch& p, int factor);

// Side-by-side 16-bit grayscale montage (input upscaled, SR, bicubic)
// with a label strip; window [-1,1] recorded in a JSON sidecar.
void emit_montage(const ImagePatch& lr, const ImagePatch& sr, const ImagePatch& baseline,
                  const std::string& path);

} // namespace mmsr
