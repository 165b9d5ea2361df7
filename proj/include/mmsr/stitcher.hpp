#pragma once

#include <functional>
#include <vector>

#include "mmsr/volume.hpp"

namespace mmsr {

struct Tile {
    int row, col, height, width; // in padded input coordinates
};

struct TilePlan {
    std::vector<Tile> tiles;
    int in_h = 0, in_w = 0;
    int tile_size = 0, overlap = 0;
    int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
    int padded_h() const { return in_h + pad_top + pad_bottom; }
    int padded_w() const { return in_w + pad_left + pad_right; }
};

// Deterministic tiling of a slice with reflect padding so the padded
// dims are covered by equally spaced tiles. With overlap 0 the tiles
// partition the padded input exactly.
TilePlan plan_tiles(int h, int w, int tile_size, int overlap);

// frozen generator view: {1,h,w} -> {1,scale*h,scale*w}
using SliceFn = std::function<Tensor(const Tensor&)>;

// nearest-neighbor upscaling stub, useful as a linear reference generator
SliceFn upsample_stub(int scale);

ImagePatch super_resolve_slice(const SliceFn& g1, const ImagePatch& slice, const TilePlan& plan,
                               int scale = 8);

CTVolume super_resolve_volume(const SliceFn& g1, const CTVolume& vol, int tile_size, int overlap,
                              int scale = 8);

// accumulated blending weights over the unpadded output, for checking
// that feathering sums to one everywhere
std::vector<double> blend_weight_map(const TilePlan& plan, int scale);

// reflect padding (no edge repeat) of a 2D patch
ImagePatch reflect_pad(const ImagePatch& p, int top, int bottom, int left, int right);

} // namespace mmsr
