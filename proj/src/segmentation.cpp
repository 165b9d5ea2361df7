#include "mmsr/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace mmsr {

namespace {

using Grid = std::vector<std::uint8_t>;

struct Shape3 {
    int nx, ny, nz;
    size_t idx(int x, int y, int z) const {
        return (static_cast<size_t>(z) * ny + y) * nx + x;
    }
    size_t n() const { return static_cast<size_t>(nx) * ny * nz; }
    bool inside(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
};

constexpr std::array<std::array<int, 3>, 6> kFace = {
    {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

std::vector<std::array<int, 3>> ball_offsets(int radius) {
    std::vector<std::array<int, 3>> out;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                if (dx * dx + dy * dy + dz * dz <= radius * radius) out.push_back({dx, dy, dz});
    return out;
}

Grid dilate(const Grid& g, const Shape3& s, const std::vector<std::array<int, 3>>& off) {
    Grid out(s.n(), 0);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                if (!g[s.idx(x, y, z)]) continue;
                for (const auto& o : off) {
                    const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
                    if (s.inside(xx, yy, zz)) out[s.idx(xx, yy, zz)] = 1;
                }
            }
    return out;
}

Grid erode(const Grid& g, const Shape3& s, const std::vector<std::array<int, 3>>& off) {
    Grid out(s.n(), 0);
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                bool keep = true;
                for (const auto& o : off) {
                    const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
                    // voxels outside the grid count as foreground so a
                    // closing never shrinks the mask at the volume faces
                    if (!s.inside(xx, yy, zz)) continue;
                    if (!g[s.idx(xx, yy, zz)]) {
                        keep = false;
                        break;
                    }
                }
                out[s.idx(x, y, z)] = keep ? 1 : 0;
            }
    return out;
}

// 6-connected flood fill from a seed set over voxels where pred holds
void flood(const Shape3& s, Grid& visited, std::queue<std::array<int, 3>>& q,
           const Grid& region) {
    while (!q.empty()) {
        auto [x, y, z] = q.front();
        q.pop();
        for (const auto& o : kFace) {
            const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
            if (!s.inside(xx, yy, zz)) continue;
            const size_t i = s.idx(xx, yy, zz);
            if (region[i] && !visited[i]) {
                visited[i] = 1;
                q.push({xx, yy, zz});
            }
        }
    }
}

void remove_border_connected(Grid& g, const Shape3& s) {
    Grid visited(s.n(), 0);
    std::queue<std::array<int, 3>> q;
    auto seed = [&](int x, int y, int z) {
        const size_t i = s.idx(x, y, z);
        if (g[i] && !visited[i]) {
            visited[i] = 1;
            q.push({x, y, z});
        }
    };
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y) {
            seed(0, y, z);
            seed(s.nx - 1, y, z);
        }
    for (int z = 0; z < s.nz; ++z)
        for (int x = 0; x < s.nx; ++x) {
            seed(x, 0, z);
            seed(x, s.ny - 1, z);
        }
    flood(s, visited, q, g);
    for (size_t i = 0; i < g.size(); ++i)
        if (visited[i]) g[i] = 0;
}

void fill_holes(Grid& g, const Shape3& s) {
    // background reachable from any volume face stays background; the
    // rest of the complement is a hole
    Grid inv(s.n());
    for (size_t i = 0; i < g.size(); ++i) inv[i] = g[i] ? 0 : 1;
    Grid visited(s.n(), 0);
    std::queue<std::array<int, 3>> q;
    auto seed = [&](int x, int y, int z) {
        const size_t i = s.idx(x, y, z);
        if (inv[i] && !visited[i]) {
            visited[i] = 1;
            q.push({x, y, z});
        }
    };
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y) {
            seed(0, y, z);
            seed(s.nx - 1, y, z);
        }
    for (int z = 0; z < s.nz; ++z)
        for (int x = 0; x < s.nx; ++x) {
            seed(x, 0, z);
            seed(x, s.ny - 1, z);
        }
    for (int y = 0; y < s.ny; ++y)
        for (int x = 0; x < s.nx; ++x) {
            seed(x, y, 0);
            seed(x, y, s.nz - 1);
        }
    flood(s, visited, q, inv);
    for (size_t i = 0; i < g.size(); ++i)
        if (inv[i] && !visited[i]) g[i] = 1;
}

void keep_largest_components(Grid& g, const Shape3& s, int keep) {
    std::vector<int> label(s.n(), -1);
    std::vector<size_t> sizes;
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < s.nx; ++x) {
                const size_t i0 = s.idx(x, y, z);
                if (!g[i0] || label[i0] >= 0) continue;
                const int id = static_cast<int>(sizes.size());
                size_t count = 0;
                std::queue<std::array<int, 3>> q;
                label[i0] = id;
                q.push({x, y, z});
                ++count;
                while (!q.empty()) {
                    auto [cx, cy, cz] = q.front();
                    q.pop();
                    for (const auto& o : kFace) {
                        const int xx = cx + o[0], yy = cy + o[1], zz = cz + o[2];
                        if (!s.inside(xx, yy, zz)) continue;
                        const size_t i = s.idx(xx, yy, zz);
                        if (g[i] && label[i] < 0) {
                            label[i] = id;
                            q.push({xx, yy, zz});
                            ++count;
                        }
                    }
                }
                sizes.push_back(count);
            }
    if (sizes.size() <= static_cast<size_t>(keep)) return;
    std::vector<int> order(sizes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
    std::vector<std::uint8_t> keep_id(sizes.size(), 0);
    for (int i = 0; i < keep; ++i) keep_id[order[i]] = 1;
    for (size_t i = 0; i < g.size(); ++i)
        if (g[i] && !keep_id[label[i]]) g[i] = 0;
}

} // namespace

double otsu_threshold(const std::vector<double>& values) {
    if (values.empty()) throw SegmentationError("no values for threshold");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw SegmentationError("uniform volume, no threshold exists");
    constexpr int bins = 256;
    std::array<double, bins> hist{};
    const double scale = bins / (hi - lo);
    for (double v : values) {
        int b = static_cast<int>((v - lo) * scale);
        hist[std::clamp(b, 0, bins - 1)] += 1.0;
    }
    const double total = static_cast<double>(values.size());
    double sum_all = 0;
    for (int b = 0; b < bins; ++b) sum_all += b * hist[b];
    double w0 = 0, sum0 = 0, best_var = -1;
    int best_b = 0;
    for (int b = 0; b < bins - 1; ++b) {
        w0 += hist[b];
        if (w0 == 0) continue;
        const double w1 = total - w0;
        if (w1 == 0) break;
        sum0 += b * hist[b];
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best_var) {
            best_var = between;
            best_b = b;
        }
    }
    return lo + (best_b + 0.5) / scale;
}

LungMask segment_lung(const CTVolume& vol) {
    vol.validate();
    const Shape3 s{vol.nx, vol.ny, vol.nz};
    Grid g(s.n(), 0);

    if (vol.modality == Modality::clinical) {
        double lo = vol.voxels[0], hi = vol.voxels[0];
        for (double v : vol.voxels) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) throw SegmentationError("uniform volume");
        for (size_t i = 0; i < g.size(); ++i) g[i] = vol.voxels[i] < -400.0 ? 1 : 0;
        remove_border_connected(g, s);
    } else {
        const double thr = otsu_threshold(vol.voxels);
        for (size_t i = 0; i < g.size(); ++i) g[i] = vol.voxels[i] >= thr ? 1 : 0;
    }

    const auto ball = ball_offsets(2);
    g = erode(dilate(g, s, ball), s, ball); // closing
    fill_holes(g, s);
    keep_largest_components(g, s, 2);

    LungMask m;
    m.allocate(s.nx, s.ny, s.nz);
    m.mask = g;
    m.source_id = vol.id;
    if (m.count() == 0) throw SegmentationError("empty mask for " + vol.id);
    return m;
}

} // namespace mmsr
