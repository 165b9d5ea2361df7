#include "mmsr/stitcher.hpp"

#include <cmath>

#include "mmsr/loss.hpp"

namespace mmsr {

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

// per-axis feather: complementary linear ramps across shared overlap so
// adjacent tile weights sum to exactly one
std::vector<double> axis_profile(int tile_idx, int n_tiles, int out_len, int ramp_len) {
    std::vector<double> w(static_cast<size_t>(out_len), 1.0);
    if (ramp_len > 0) {
        if (tile_idx > 0)
            for (int t = 0; t < ramp_len && t < out_len; ++t)
                w[static_cast<size_t>(t)] *= static_cast<double>(t + 1) / (ramp_len + 1);
        if (tile_idx < n_tiles - 1)
            for (int t = 0; t < ramp_len && t < out_len; ++t)
                w[static_cast<size_t>(out_len - 1 - t)] *=
                    static_cast<double>(t + 1) / (ramp_len + 1);
    }
    return w;
}

int tiles_needed(int len, int tile, int stride) {
    if (len <= tile) return 1;
    return (len - tile + stride - 1) / stride + 1;
}

} // namespace

TilePlan plan_tiles(int h, int w, int tile_size, int overlap) {
    if (tile_size < 8) throw ParamError("tile size must be >= 8");
    if (overlap < 0 || overlap >= tile_size) throw ParamError("overlap must be in [0, tile_size)");
    if (h < 1 || w < 1) throw ShapeError("empty slice");
    const int stride = tile_size - overlap;
    TilePlan plan;
    plan.in_h = h;
    plan.in_w = w;
    plan.tile_size = tile_size;
    plan.overlap = overlap;
    const int nr = tiles_needed(h, tile_size, stride);
    const int nc = tiles_needed(w, tile_size, stride);
    const int ph = (nr - 1) * stride + tile_size;
    const int pw = (nc - 1) * stride + tile_size;
    plan.pad_top = (ph - h) / 2;
    plan.pad_bottom = ph - h - plan.pad_top;
    plan.pad_left = (pw - w) / 2;
    plan.pad_right = pw - w - plan.pad_left;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j)
            plan.tiles.push_back({i * stride, j * stride, tile_size, tile_size});
    return plan;
}

SliceFn upsample_stub(int scale) {
    return [scale](const Tensor& x) {
        ImagePatch p = ImagePatch::from_tensor(x);
        return nn_upsample_g(p, scale).to_chw();
    };
}

ImagePatch reflect_pad(const ImagePatch& p, int top, int bottom, int left, int right) {
    ImagePatch out(p.height + top + bottom, p.width + left + right);
    for (int i = 0; i < out.height; ++i)
        for (int j = 0; j < out.width; ++j)
            out.at(i, j) = p.at(reflect_index(i - top, p.height), reflect_index(j - left, p.width));
    return out;
}

ImagePatch super_resolve_slice(const SliceFn& g1, const ImagePatch& slice, const TilePlan& plan,
                               int scale) {
    if (plan.in_h != slice.height || plan.in_w != slice.width)
        throw ShapeError("tile plan does not match slice");
    const ImagePatch padded =
        reflect_pad(slice, plan.pad_top, plan.pad_bottom, plan.pad_left, plan.pad_right);
    const int oh = plan.padded_h() * scale, ow = plan.padded_w() * scale;
    std::vector<double> accum(static_cast<size_t>(oh) * ow, 0.0);
    std::vector<double> wmap(static_cast<size_t>(oh) * ow, 0.0);

    const int stride = plan.tile_size - plan.overlap;
    const int nr = tiles_needed(plan.padded_h(), plan.tile_size, stride);
    const int nc = tiles_needed(plan.padded_w(), plan.tile_size, stride);
    const int out_tile = plan.tile_size * scale;
    const int ramp = plan.overlap * scale;

    for (const auto& t : plan.tiles) {
        Tensor in({1, t.height, t.width});
        for (int i = 0; i < t.height; ++i)
            for (int j = 0; j < t.width; ++j) in.at(0, i, j) = padded.at(t.row + i, t.col + j);
        const Tensor sr = g1(in);
        if (sr.rank() != 3 || sr.dim(0) != 1 || sr.dim(1) != t.height * scale ||
            sr.dim(2) != t.width * scale)
            throw ShapeError("generator produced " + sr.shape_str() + " for a " +
                             std::to_string(t.height) + "x" + std::to_string(t.width) + " tile");
        const int ti = t.row / stride, tj = t.col / stride;
        const auto wr = axis_profile(ti, nr, out_tile, ramp);
        const auto wc = axis_profile(tj, nc, out_tile, ramp);
        const int r0 = t.row * scale, c0 = t.col * scale;
        for (int i = 0; i < out_tile; ++i) {
            double* arow = &accum[static_cast<size_t>(r0 + i) * ow + c0];
            double* wrow = &wmap[static_cast<size_t>(r0 + i) * ow + c0];
            for (int j = 0; j < out_tile; ++j) {
                const double wgt = wr[static_cast<size_t>(i)] * wc[static_cast<size_t>(j)];
                arow[j] += wgt * sr.at(0, i, j);
                wrow[j] += wgt;
            }
        }
    }

    ImagePatch out(plan.in_h * scale, plan.in_w * scale);
    const int r_off = plan.pad_top * scale, c_off = plan.pad_left * scale;
    for (int i = 0; i < out.height; ++i)
        for (int j = 0; j < out.width; ++j) {
            const size_t k = static_cast<size_t>(r_off + i) * ow + c_off + j;
            out.at(i, j) = accum[k] / wmap[k];
        }
    return out;
}

std::vector<double> blend_weight_map(const TilePlan& plan, int scale) {
    const int oh = plan.padded_h() * scale, ow = plan.padded_w() * scale;
    std::vector<double> wmap(static_cast<size_t>(oh) * ow, 0.0);
    const int stride = plan.tile_size - plan.overlap;
    const int nr = tiles_needed(plan.padded_h(), plan.tile_size, stride);
    const int nc = tiles_needed(plan.padded_w(), plan.tile_size, stride);
    const int out_tile = plan.tile_size * scale;
    const int ramp = plan.overlap * scale;
    for (const auto& t : plan.tiles) {
        const int ti = t.row / stride, tj = t.col / stride;
        const auto wr = axis_profile(ti, nr, out_tile, ramp);
        const auto wc = axis_profile(tj, nc, out_tile, ramp);
        for (int i = 0; i < out_tile; ++i)
            for (int j = 0; j < out_tile; ++j)
                wmap[static_cast<size_t>(t.row * scale + i) * ow + t.col * scale + j] +=
                    wr[static_cast<size_t>(i)] * wc[static_cast<size_t>(j)];
    }
    std::vector<double> cropped(static_cast<size_t>(plan.in_h) * plan.in_w * scale * scale);
    const int r_off = plan.pad_top * scale, c_off = plan.pad_left * scale;
    const int ch = plan.in_h * scale, cw = plan.in_w * scale;
    for (int i = 0; i < ch; ++i)
        for (int j = 0; j < cw; ++j)
            cropped[static_cast<size_t>(i) * cw + j] =
                wmap[static_cast<size_t>(r_off + i) * ow + c_off + j];
    return cropped;
}

CTVolume super_resolve_volume(const SliceFn& g1, const CTVolume& vol, int tile_size, int overlap,
                              int scale) {
    vol.validate();
    const TilePlan plan = plan_tiles(vol.ny, vol.nx, tile_size, overlap);
    CTVolume out;
    out.allocate(vol.nx * scale, vol.ny * scale, vol.nz);
    out.sx = vol.sx / scale;
    out.sy = vol.sy / scale;
    out.sz = vol.sz;
    out.unit = vol.unit;
    out.modality = Modality::synthetic_micro;
    out.id = vol.id + "_sr";
    for (int z = 0; z < vol.nz; ++z)
        out.set_axial_slice(z, super_resolve_slice(g1, vol.axial_slice(z), plan, scale));
    return out;
}

} // namespace mmsr
