#include "mmsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "mmsr/png_io.hpp"

namespace mmsr {

double psnr_from_mse(double mse_value, double peak) {
    if (mse_value < 0) throw ParamError("negative MSE");
    if (mse_value == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / mse_value));
}

MetricsTriple consistency_metrics(const ImagePatch& x, const ImagePatch& x_sr,
                                  const SSIMParams& p) {
    if (x_sr.height != 8 * x.height || x_sr.width != 8 * x.width)
        throw ShapeError("consistency_metrics expects x_sr dims = 8 x x dims");
    const ImagePatch down = avg_downsample_f(x_sr, 8);
    MetricsTriple m;
    m.mse = mse(x, down);
    m.psnr = psnr_from_mse(m.mse);
    m.ssim = 1.0 - ssim_loss(x, down, p, SsimForm::standard) * p.N;
    return m;
}

MetricsTriple oracle_metrics(const ImagePatch& x_sr, const ImagePatch& hr_truth,
                             const SSIMParams& p) {
    if (x_sr.height != hr_truth.height || x_sr.width != hr_truth.width)
        throw ShapeError("oracle_metrics expects equal shapes");
    MetricsTriple m;
    m.mse = mse(x_sr, hr_truth);
    m.psnr = psnr_from_mse(m.mse);
    m.ssim = 1.0 - ssim_loss(x_sr, hr_truth, p, SsimForm::standard) * p.N;
    return m;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["config_digest"] = config_digest;
    auto& pv = j["per_volume"] = nlohmann::json::object();
    for (const auto& [id, vm] : per_volume) {
        nlohmann::json e;
        e["consistency_mse"] = vm.consistency.mse;
        e["consistency_psnr"] = vm.consistency.psnr;
        e["consistency_ssim"] = vm.consistency.ssim;
        if (vm.oracle) {
            e["hr_mse"] = vm.oracle->mse;
            e["hr_psnr"] = vm.oracle->psnr;
            e["hr_ssim"] = vm.oracle->ssim;
        }
        pv[id] = e;
    }
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad metrics json: ") + e.what());
    }
    MetricsReport r;
    r.config_digest = j.value("config_digest", "");
    for (const auto& [id, e] : j.at("per_volume").items()) {
        VolumeMetrics vm;
        vm.consistency.mse = e.at("consistency_mse").get<double>();
        vm.consistency.psnr = e.at("consistency_psnr").get<double>();
        vm.consistency.ssim = e.at("consistency_ssim").get<double>();
        if (e.contains("hr_mse")) {
            MetricsTriple o;
            o.mse = e.at("hr_mse").get<double>();
            o.psnr = e.at("hr_psnr").get<double>();
            o.ssim = e.at("hr_ssim").get<double>();
            vm.oracle = o;
        }
        r.per_volume[id] = vm;
    }
    return r;
}

namespace {

double cubic_kernel(double t) {
    // Catmull-Rom (a = -0.5)
    const double a = -0.5;
    t = std::abs(t);
    if (t < 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

} // namespace

ImagePatch bicubic_upsample(const ImagePatch& p, int factor) {
    if (factor < 1) throw ParamError("upsample factor must be >= 1");
    ImagePatch out(p.height * factor, p.width * factor);
    for (int oi = 0; oi < out.height; ++oi) {
        const double sy = (oi + 0.5) / factor - 0.5;
        const int iy = static_cast<int>(std::floor(sy));
        for (int oj = 0; oj < out.width; ++oj) {
            const double sx = (oj + 0.5) / factor - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            double acc = 0.0, wsum = 0.0;
            for (int m = -1; m <= 2; ++m)
                for (int n = -1; n <= 2; ++n) {
                    const double w = cubic_kernel(sy - (iy + m)) * cubic_kernel(sx - (ix + n));
                    acc += w * p.at(reflect_index(iy + m, p.height), reflect_index(ix + n, p.width));
                    wsum += w;
                }
            out.at(oi, oj) = acc / wsum;
        }
    }
    return out;
}

namespace {

// 5x7 bitmap glyphs for the montage labels
struct Glyph {
    char c;
    const char* rows[7];
};

const Glyph kGlyphs[] = {
    {'I', {"###", " # ", " # ", " # ", " # ", " # ", "###"}},
    {'N', {"#...#", "##..#", "##..#", "#.#.#", "#..##", "#..##", "#...#"}},
    {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
    {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
    {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
    {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
    {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
    {'C', {".####", "#....", "#....", "#....", "#....", "#....", ".####"}},
};

void draw_text(std::vector<std::uint16_t>& img, int img_w, int x, int y, const std::string& text) {
    for (char ch : text) {
        const Glyph* g = nullptr;
        for (const auto& cand : kGlyphs)
            if (cand.c == ch) g = &cand;
        if (g) {
            const int gw = static_cast<int>(std::strlen(g->rows[0]));
            for (int r = 0; r < 7; ++r)
                for (int c = 0; c < gw; ++c)
                    if (g->rows[r][c] == '#')
                        img[static_cast<size_t>(y + r) * img_w + x + c] = 0xffff;
            x += gw + 1;
        } else {
            x += 4; // space
        }
    }
}

} // namespace

void emit_montage(const ImagePatch& lr, const ImagePatch& sr, const ImagePatch& baseline,
                  const std::string& path) {
    if (sr.height != baseline.height || sr.width != baseline.width)
        throw ShapeError("montage: SR and baseline shapes differ");
    if (sr.height % lr.height != 0 || sr.width % lr.width != 0)
        throw ShapeError("montage: SR dims must be a multiple of input dims");
    const int factor = sr.height / lr.height;
    if (sr.width / lr.width != factor) throw ShapeError("montage: inconsistent scale factors");
    const ImagePatch lr_up = nn_upsample_g(lr, factor);

    const int panel_h = sr.height, panel_w = sr.width;
    const int strip = 12, gap = 2;
    const int W = 3 * panel_w + 2 * gap;
    const int H = panel_h + strip;
    std::vector<std::uint16_t> img(static_cast<size_t>(W) * H, 0);

    const double lo = -1.0, hi = 1.0;
    auto put_panel = [&](const ImagePatch& p, int x0) {
        for (int i = 0; i < panel_h; ++i)
            for (int j = 0; j < panel_w; ++j) {
                const double v = std::clamp((p.at(i, j) - lo) / (hi - lo), 0.0, 1.0);
                img[static_cast<size_t>(strip + i) * W + x0 + j] =
                    static_cast<std::uint16_t>(std::lround(v * 65535.0));
            }
    };
    put_panel(lr_up, 0);
    put_panel(sr, panel_w + gap);
    put_panel(baseline, 2 * (panel_w + gap));
    draw_text(img, W, 2, 2, "INPUT");
    draw_text(img, W, panel_w + gap + 2, 2, "SR");
    draw_text(img, W, 2 * (panel_w + gap) + 2, 2, "BICUBIC");

    write_png16(path, img, W, H);

    nlohmann::json sidecar;
    sidecar["window"] = {lo, hi};
    sidecar["panels"] = {"input", "sr", "bicubic"};
    sidecar["scale_factor"] = factor;
    std::ofstream out(path + ".json");
    out << sidecar.dump(2) << "\n";
}

} // namespace mmsr
