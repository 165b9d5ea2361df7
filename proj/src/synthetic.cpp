#include "mmsr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mmsr {

namespace {

struct Ellipse {
    double cx, cy, rx, ry;
    bool inside(double x, double y) const {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        return u * u + v * v <= 1.0;
    }
};

// tube through the slice stack: 2D center interpolated along z
struct Tube {
    double x0, y0, x1, y1;
    double radius;
    double wall = 0.0; // >0: bronchus-like with dark lumen
    void center(double t, double& cx, double& cy) const {
        cx = x0 + (x1 - x0) * t;
        cy = y0 + (y1 - y0) * t;
    }
};

// two-octave value noise on a 2D grid
std::vector<double> value_noise(int size, Rng& rng) {
    auto lattice = [&](int cell) {
        const int g = size / cell + 2;
        std::vector<double> grid(static_cast<size_t>(g) * g);
        for (auto& v : grid) v = rng.next_double();
        std::vector<double> out(static_cast<size_t>(size) * size);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) {
                const double fi = static_cast<double>(i) / cell, fj = static_cast<double>(j) / cell;
                const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
                const double ti = fi - i0, tj = fj - j0;
                const double a = grid[static_cast<size_t>(i0) * g + j0];
                const double b = grid[static_cast<size_t>(i0) * g + j0 + 1];
                const double c = grid[static_cast<size_t>(i0 + 1) * g + j0];
                const double d = grid[static_cast<size_t>(i0 + 1) * g + j0 + 1];
                out[static_cast<size_t>(i) * size + j] =
                    (a * (1 - tj) + b * tj) * (1 - ti) + (c * (1 - tj) + d * tj) * ti;
            }
        return out;
    };
    auto coarse = lattice(std::max(8, size / 16));
    auto fine = lattice(std::max(2, size / 64));
    std::vector<double> out(coarse.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = 0.6 * coarse[i] + 0.4 * fine[i];
    return out;
}

struct Phantom {
    Ellipse lung;
    std::vector<Tube> tubes;
};

Phantom make_phantom(int size, Rng& rng) {
    Phantom p;
    // kept clear of the grid edge so downsampled body shells stay solid
    p.lung = {size * rng.next_uniform(0.48, 0.52), size * rng.next_uniform(0.48, 0.52),
              size * rng.next_uniform(0.38, 0.42), size * rng.next_uniform(0.36, 0.40)};
    const double scale = size / 256.0;
    const int n_vessels = 8, n_bronchi = 3;
    auto in_lung_point = [&](double& x, double& y) {
        do {
            x = rng.next_uniform(p.lung.cx - p.lung.rx, p.lung.cx + p.lung.rx);
            y = rng.next_uniform(p.lung.cy - p.lung.ry, p.lung.cy + p.lung.ry);
        } while (!p.lung.inside(x, y));
    };
    for (int i = 0; i < n_vessels; ++i) {
        Tube t;
        in_lung_point(t.x0, t.y0);
        in_lung_point(t.x1, t.y1);
        t.radius = rng.next_uniform(2.0, 6.0) * scale;
        p.tubes.push_back(t);
    }
    for (int i = 0; i < n_bronchi; ++i) {
        Tube t;
        in_lung_point(t.x0, t.y0);
        in_lung_point(t.x1, t.y1);
        t.radius = rng.next_uniform(6.0, 11.0) * scale;
        t.wall = rng.next_uniform(2.0, 3.0) * scale;
        p.tubes.push_back(t);
    }
    return p;
}

// density in [0,1]: parenchyma speckle, bright vessels, walled bronchi;
// 0 outside the lung/specimen ellipse
std::vector<double> density_slice(const Phantom& ph, int size, double zt,
                                  const std::vector<double>& noise) {
    std::vector<double> d(static_cast<size_t>(size) * size, 0.0);
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            if (!ph.lung.inside(j, i)) continue;
            d[static_cast<size_t>(i) * size + j] =
                0.15 + 0.3 * noise[static_cast<size_t>(i) * size + j];
        }
    for (const auto& t : ph.tubes) {
        double cx, cy;
        t.center(zt, cx, cy);
        const double reach = t.radius + t.wall + 1.0;
        const int i0 = std::max(0, static_cast<int>(cy - reach));
        const int i1 = std::min(size - 1, static_cast<int>(cy + reach) + 1);
        const int j0 = std::max(0, static_cast<int>(cx - reach));
        const int j1 = std::min(size - 1, static_cast<int>(cx + reach) + 1);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) {
                if (!ph.lung.inside(j, i)) continue;
                const double dist = std::hypot(j - cx, i - cy);
                auto& px = d[static_cast<size_t>(i) * size + j];
                if (t.wall > 0.0) {
                    if (dist < t.radius) px = 0.02;                       // lumen
                    else if (dist < t.radius + t.wall) px = 0.85;         // wall
                } else if (dist < t.radius) {
                    px = 0.9; // vessel
                }
            }
    }
    return d;
}

void gaussian_blur_slice(std::vector<double>& img, int size, double sigma) {
    const int r = 3;
    std::array<double, 2 * r + 1> k{};
    double ksum = 0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        ksum += k[i + r];
    }
    for (auto& v : k) v /= ksum;
    auto reflect = [&](int i) { return i < 0 ? -i : (i >= size ? 2 * size - 2 - i : i); };
    std::vector<double> tmp(img.size());
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            double s = 0;
            for (int o = -r; o <= r; ++o)
                s += k[o + r] * img[static_cast<size_t>(i) * size + reflect(j + o)];
            tmp[static_cast<size_t>(i) * size + j] = s;
        }
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            double s = 0;
            for (int o = -r; o <= r; ++o)
                s += k[o + r] * tmp[static_cast<size_t>(reflect(i + o)) * size + j];
            img[static_cast<size_t>(i) * size + j] = s;
        }
}

} // namespace

SyntheticDataset make_synthetic_dataset(const SyntheticParams& params) {
    if (params.n_volumes < 1 || params.n_slices < 1 || params.hr_size % 8 != 0 ||
        params.hr_size < 32 || params.micro_size < 32)
        throw ParamError("invalid synthetic dataset parameters");
    Rng rng(params.seed);
    SyntheticDataset ds;

    // micro-like volumes: instances 0 .. n-1, raw scanner-ish units
    for (int k = 0; k < params.n_volumes; ++k) {
        const int inst = k;
        const int S = params.micro_size;
        Phantom ph = make_phantom(S, rng);
        CTVolume v;
        v.allocate(S, S, params.n_slices);
        v.sx = v.sy = v.sz = 0.052;
        v.unit = "mm";
        v.modality = Modality::micro;
        v.id = "micro_i" + std::to_string(inst) + "_v" + std::to_string(k);
        for (int z = 0; z < params.n_slices; ++z) {
            auto noise = value_noise(S, rng);
            const double zt = params.n_slices > 1 ? static_cast<double>(z) / (params.n_slices - 1) : 0.0;
            auto d = density_slice(ph, S, zt, noise);
            for (int i = 0; i < S; ++i)
                for (int j = 0; j < S; ++j) {
                    const bool in = ph.lung.inside(j, i);
                    double u = in ? 200.0 + 3400.0 * d[static_cast<size_t>(i) * S + j] : 50.0;
                    u += 30.0 * rng.next_normal();
                    v.at(j, i, z) = u;
                }
        }
        ds.micro.push_back(std::move(v));
        ds.micro_instances.push_back(inst);
    }

    // clinical-like volumes from disjoint instances n .. 2n-1
    for (int k = 0; k < params.n_volumes; ++k) {
        const int inst = params.n_volumes + k;
        const int S = params.hr_size;
        Phantom ph = make_phantom(S, rng);
        const Ellipse body{ph.lung.cx, ph.lung.cy, S * 0.53, S * 0.52};

        CTVolume truth;
        truth.allocate(S, S, params.n_slices);
        truth.sx = truth.sy = 0.625 / 8.0;
        truth.sz = 0.6;
        truth.unit = "mm";
        truth.modality = Modality::clinical;
        truth.id = "truth_i" + std::to_string(inst) + "_v" + std::to_string(k);
        for (int z = 0; z < params.n_slices; ++z) {
            auto noise = value_noise(S, rng);
            const double zt = params.n_slices > 1 ? static_cast<double>(z) / (params.n_slices - 1) : 0.0;
            auto d = density_slice(ph, S, zt, noise);
            std::vector<double> hu(static_cast<size_t>(S) * S);
            for (int i = 0; i < S; ++i)
                for (int j = 0; j < S; ++j) {
                    double v;
                    if (ph.lung.inside(j, i))
                        v = -950.0 + 900.0 * d[static_cast<size_t>(i) * S + j];
                    else if (body.inside(j, i))
                        v = 40.0;
                    else
                        v = -1000.0;
                    hu[static_cast<size_t>(i) * S + j] = v;
                }
            gaussian_blur_slice(hu, S, 1.2);
            ImagePatch p(S, S);
            p.data = hu;
            truth.set_axial_slice(z, p);
        }

        const int L = S / 8;
        CTVolume prenoise;
        prenoise.allocate(L, L, params.n_slices);
        prenoise.sx = prenoise.sy = 0.625;
        prenoise.sz = 0.6;
        prenoise.unit = "mm";
        prenoise.modality = Modality::clinical;
        prenoise.id = "clinical_i" + std::to_string(inst) + "_v" + std::to_string(k);
        for (int z = 0; z < params.n_slices; ++z) {
            const ImagePatch hr = truth.axial_slice(z);
            ImagePatch lr(L, L);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    double s = 0;
                    for (int di = 0; di < 8; ++di)
                        for (int dj = 0; dj < 8; ++dj) s += hr.at(i * 8 + di, j * 8 + dj);
                    lr.at(i, j) = s / 64.0;
                }
            prenoise.set_axial_slice(z, lr);
        }
        CTVolume clin = prenoise;
        for (auto& v : clin.voxels) v += params.noise_sigma * rng.next_normal();

        ds.clinical_hr_truth.push_back(std::move(truth));
        ds.clinical_prenoise.push_back(std::move(prenoise));
        ds.clinical.push_back(std::move(clin));
        ds.clinical_instances.push_back(inst);
    }
    return ds;
}

void write_synthetic_dataset(const SyntheticDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "micro");
    fs::create_directories(fs::path(dir) / "clinical");
    fs::create_directories(fs::path(dir) / "gt");
    nlohmann::json j;
    auto dump = [&](const std::vector<CTVolume>& vols, const std::string& sub,
                    const std::vector<int>* instances) {
        auto& arr = j[sub] = nlohmann::json::array();
        for (size_t i = 0; i < vols.size(); ++i) {
            const std::string file = sub + "/" + vols[i].id + ".nii";
            save_volume(vols[i], (fs::path(dir) / file).string());
            nlohmann::json e = {{"file", file},
                                {"id", vols[i].id},
                                {"modality", modality_name(vols[i].modality)}};
            if (instances) e["instance"] = (*instances)[i];
            arr.push_back(e);
        }
    };
    dump(ds.micro, "micro", &ds.micro_instances);
    dump(ds.clinical, "clinical", &ds.clinical_instances);
    dump(ds.clinical_hr_truth, "gt", &ds.clinical_instances);
    std::ofstream out(fs::path(dir) / "dataset.json");
    out << j.dump(2) << "\n";
}

} // namespace mmsr
