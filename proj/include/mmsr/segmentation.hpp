#pragma once

#include "mmsr/volume.hpp"

namespace mmsr {

// Threshold + morphology lung segmentation. Clinical volumes use a fixed
// -400 threshold on the calibrated scale (voxels below are lung/air
// candidates, border-connected air removed); micro volumes use Otsu with
// tissue as foreground. Followed by radius-2 closing, hole fill and
// keeping the two largest 6-connected components.
LungMask segment_lung(const CTVolume& vol);

// Otsu threshold over a 256-bin histogram of the value range.
double otsu_threshold(const std::vector<double>& values);

} // namespace mmsr
