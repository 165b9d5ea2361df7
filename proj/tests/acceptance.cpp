// End-to-end acceptance harness. Each criterion prints one PASS/FAIL
// line; the exit code is the number of failed criteria.
// Usage: acceptance <path-to-mmsr-cli>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mmsr/metrics.hpp"
#include "mmsr/segmentation.hpp"
#include "mmsr/stitcher.hpp"
#include "mmsr/synthetic.hpp"
#include "mmsr/trainer.hpp"

using namespace mmsr;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& what, double seconds) {
    std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << " - " << what << " ("
              << seconds << " s)\n";
    if (!ok) ++failures;
}

template <typename F>
void criterion(int n, const std::string& what, F f) {
    const auto t0 = clock_type::now();
    bool ok = false;
    std::string note;
    try {
        ok = f();
    } catch (const std::exception& e) {
        note = e.what();
    }
    const double dt = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(n, ok, what + (note.empty() ? "" : " [" + note + "]"), dt);
}

ImagePatch random_patch(int h, int w, Rng& rng) {
    ImagePatch p(h, w);
    for (auto& v : p.data) v = rng.next_uniform(-1.0, 1.0);
    return p;
}

template <typename F>
double fd_grad(F f, ImagePatch p, int idx, double h = 1e-3) {
    const double v = p.data[static_cast<size_t>(idx)];
    p.data[static_cast<size_t>(idx)] = v + h;
    const double fp = f(p);
    p.data[static_cast<size_t>(idx)] = v - h;
    const double fm = f(p);
    return (fp - fm) / (2.0 * h);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.seed = 77;
    c.lr = 2e-3; // desk-scale networks tolerate a hotter step
    c.g1.base_width = 8;
    c.g1.n_res_blocks = 1;
    c.g2.base_width = 8;
    c.g2.n_res_blocks = 1;
    c.dx.base_width = 8;
    c.dx.n_layers = 2;
    c.dy.base_width = 8;
    c.dy.n_layers = 2;
    return c;
}

TrainDataset synthetic_patch_set(int n_patches) {
    SyntheticParams sp;
    sp.n_volumes = 2;
    sp.hr_size = 128;
    sp.micro_size = 96;
    sp.n_slices = 2;
    sp.seed = 11;
    const SyntheticDataset ds = make_synthetic_dataset(sp);
    std::vector<PatchSample> clinical, micro;
    const int per_vol = n_patches / 2;
    for (const auto& v : ds.clinical) {
        const LungMask m = segment_lung(v);
        auto [norm, np] = normalize(v, &m);
        auto ps = sample_patches(norm, m, 8, per_vol, 21);
        clinical.insert(clinical.end(), ps.begin(), ps.end());
    }
    for (const auto& v : ds.micro) {
        const LungMask m = segment_lung(v);
        auto [norm, np] = normalize(v, &m);
        auto ps = sample_patches(norm, m, 64, per_vol, 22);
        micro.insert(micro.end(), ps.begin(), ps.end());
    }
    return dataset_from_patches(clinical, micro);
}

int run_cmd(const std::string& cmd) {
    std::cout << "  $ " << cmd << "\n";
    return std::system(cmd.c_str());
}

double mean_consistency_mse(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const MetricsReport r = MetricsReport::from_json(ss.str());
    double s = 0;
    for (const auto& [id, vm] : r.per_volume) s += vm.consistency.mse;
    return s / static_cast<double>(r.per_volume.size());
}

bool crit1_loss_exactness() {
    const SSIMParams p;
    bool ok = true;
    auto near = [&](double a, double b) { ok = ok && std::abs(a - b) < 1e-6; };

    auto s = patch_stats(ImagePatch(4, 4, 0.5), ImagePatch(4, 4, 0.5));
    near(s.mu_x, 0.5);
    near(s.var_x, 0.0);
    near(s.cov_xy, 0.0);
    ImagePatch gx(2, 2), gy(2, 2);
    gx.at(0, 1) = 1;
    gx.at(1, 1) = 1;
    gy.at(1, 0) = 1;
    gy.at(1, 1) = 1;
    auto t = patch_stats(gx, gy);
    near(t.var_x, 0.25);
    near(t.cov_xy, 0.0);

    // printed-formula identity at all-ones
    near(ssim_loss(ImagePatch(8, 8, 1.0), ImagePatch(8, 8, 1.0), p), 1.0 - 1.02 / 2.02);
    ImagePatch zm(2, 2);
    zm.at(0, 0) = 0.5;
    zm.at(0, 1) = -0.5;
    near(ssim_loss(zm, zm, p), 0.0);

    ImagePatch one(1, 1);
    one.at(0, 0) = 0.7;
    const ImagePatch up = nn_upsample_g(one, 8);
    ok = ok && up.height == 8;
    for (double v : up.data) near(v, 0.7);
    near(avg_downsample_f(ImagePatch(8, 8, 0.3), 8).at(0, 0), 0.3);
    ImagePatch q(2, 2);
    q.at(0, 1) = 2;
    q.at(1, 0) = 4;
    q.at(1, 1) = 6;
    near(avg_downsample_f(q, 2).at(0, 0), 3.0);

    ImagePatch b(2, 2);
    b.at(0, 0) = 1;
    b.at(0, 1) = 2;
    b.at(1, 0) = 3;
    b.at(1, 1) = 4;
    near(mse(ImagePatch(2, 2, 0.0), b), 7.5);
    near(upsample_loss_U(ImagePatch(8, 8, 1.0), ImagePatch(1, 1, 0.0)), 1.0);
    near(downsample_loss_D(ImagePatch(1, 1, 0.0), ImagePatch(8, 8, 1.0)), 1.0);

    LossWeights w;
    near(combine_breakdown(1.0, 0.1, 0.2, 0.3, 0.4, w).total, 2.1);
    return ok;
}

bool crit2_gradients() {
    Rng rng(31);
    const SSIMParams p;
    const LossWeights w;
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_patch(8, 8, rng);
        auto y = random_patch(8, 8, rng);
        auto x_sr = random_patch(64, 64, rng);
        auto y_hr = random_patch(64, 64, rng);

        auto gx = mmsr::ag::leaf(x.to_chw(), true);
        mmsr::ag::backward(mmsr::ag::ssim_loss(gx, mmsr::ag::constant(y.to_chw()), p));
        int idx = static_cast<int>(rng.next_index(64));
        double fd = fd_grad([&](const ImagePatch& q) { return ssim_loss(q, y, p); }, x, idx);
        if (rel_err(gx->grad[idx], fd) >= 1e-4) return false;

        auto g_sr = mmsr::ag::leaf(x_sr.to_chw(), true);
        mmsr::ag::backward(mmsr::ag::downsample_loss(mmsr::ag::constant(x.to_chw()), g_sr));
        idx = static_cast<int>(rng.next_index(4096));
        fd = fd_grad([&](const ImagePatch& q) { return downsample_loss_D(x, q); }, x_sr, idx);
        if (rel_err(g_sr->grad[idx], fd) >= 1e-4) return false;

        auto g_lr = mmsr::ag::leaf(y.to_chw(), true);
        mmsr::ag::backward(mmsr::ag::upsample_loss(mmsr::ag::constant(y_hr.to_chw()), g_lr));
        idx = static_cast<int>(rng.next_index(64));
        fd = fd_grad([&](const ImagePatch& q) { return upsample_loss_U(y_hr, q); }, y, idx);
        if (rel_err(g_lr->grad[idx], fd) >= 1e-4) return false;

        auto g_tot = mmsr::ag::leaf(x_sr.to_chw(), true);
        auto terms = mmsr::ag::mmsr_terms(mmsr::ag::constant(x.to_chw()), g_tot,
                                          mmsr::ag::constant(y_hr.to_chw()),
                                          mmsr::ag::constant(y.to_chw()), p);
        mmsr::ag::backward(
            mmsr::ag::mmsr_weighted(mmsr::ag::constant(Tensor::scalar(0.0)), terms, w));
        idx = static_cast<int>(rng.next_index(4096));
        fd = fd_grad(
            [&](const ImagePatch& q) { return mmsr_total(0.0, x, q, y_hr, y, w, p).total; },
            x_sr, idx);
        if (rel_err(g_tot->grad[idx], fd) >= 1e-4) return false;
    }
    return true;
}

bool crit3_rescale_identity() {
    Rng rng(99);
    for (int t = 0; t < 100; ++t) {
        auto p = random_patch(2 + static_cast<int>(rng.next_index(7)),
                              2 + static_cast<int>(rng.next_index(7)), rng);
        auto back = avg_downsample_f(nn_upsample_g(p, 8), 8);
        for (int i = 0; i < p.size(); ++i)
            if (std::abs(back.data[static_cast<size_t>(i)] - p.data[static_cast<size_t>(i)]) >=
                1e-6)
                return false;
    }
    return true;
}

bool crit4_shape_law() {
    const TrainConfig c = tiny_config();
    SRGenerator g1(c.g1, 1);
    DownGenerator g2(c.g2, 2);
    if (g1.infer(Tensor({1, 32, 32})).shape != std::vector<int>{1, 256, 256}) return false;
    for (int hw : {8, 16, 32, 64}) {
        if (g1.infer(Tensor({1, hw, hw})).shape != std::vector<int>{1, 8 * hw, 8 * hw})
            return false;
        if (g2.infer(Tensor({1, 8 * hw, 8 * hw})).shape != std::vector<int>{1, hw, hw})
            return false;
    }
    UnitPair u(c.g1, c.g2, 3);
    auto z_lr = u.encode_lr(mmsr::ag::constant(Tensor({1, 8, 8})));
    auto z_hr = u.encode_hr(mmsr::ag::constant(Tensor({1, 64, 64})));
    return z_lr->value.shape == z_hr->value.shape;
}

bool crit5_optimization_sanity() {
    const TrainConfig c = tiny_config();
    SRGenerator g1(c.g1, 5);
    Adam opt(g1.param_vars(), {2e-3, 0.5, 0.999, 1e-8});
    Rng rng(13);
    const ImagePatch x = random_patch(8, 8, rng);
    const auto xc = mmsr::ag::constant(x.to_chw());
    double last = 1e30;
    for (int step = 0; step < 500; ++step) {
        opt.zero_grad();
        auto loss = mmsr::ag::downsample_loss(xc, g1.forward(xc));
        last = loss->value[0];
        if (!std::isfinite(last)) return false;
        mmsr::ag::backward(loss);
        opt.step();
    }
    std::cout << "  final downsample-consistency MSE: " << last << "\n";
    return last < 1e-3;
}

bool crit6_training_descent() {
    TrainConfig c = tiny_config();
    c.variant = Variant::sr_cyclegan;
    c.epochs = 4; // keeps the run inside the constant-lr phase
    c.iterations_per_epoch = 100;
    Trainer t(c, synthetic_patch_set(64));
    t.run_iterations(200);
    const auto& h = t.state().loss_history;
    double first = 0, lastm = 0;
    for (int i = 0; i < 10; ++i) {
        if (!std::isfinite(h[static_cast<size_t>(i)].total)) return false;
        first += h[static_cast<size_t>(i)].d_term;
        lastm += h[h.size() - 10 + static_cast<size_t>(i)].d_term;
    }
    for (const auto& lb : h)
        if (!std::isfinite(lb.total)) return false;
    first /= 10.0;
    lastm /= 10.0;
    std::cout << "  d_term mean first-10 " << first << ", last-10 " << lastm << "\n";
    return lastm < 0.5 * first;
}

bool crit7_stitcher() {
    const SliceFn g = upsample_stub(8);
    Rng rng(21);
    const ImagePatch slice = random_patch(40, 56, rng);
    const ImagePatch whole = ImagePatch::from_tensor(g(slice.to_chw()));
    for (int overlap : {0, 4, 8}) {
        const TilePlan plan = plan_tiles(slice.height, slice.width, 16, overlap);
        const ImagePatch tiled = super_resolve_slice(g, slice, plan);
        for (int i = 0; i < tiled.size(); ++i)
            if (tiled.data[static_cast<size_t>(i)] != whole.data[static_cast<size_t>(i)] &&
                std::abs(tiled.data[static_cast<size_t>(i)] -
                         whole.data[static_cast<size_t>(i)]) >= 1e-9)
                return false;
        for (double wgt : blend_weight_map(plan, 8))
            if (std::abs(wgt - 1.0) >= 1e-6) return false;
    }
    return true;
}

bool crit8_end_to_end(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "mmsr_acceptance_e2e";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string data = (root / "data").string();
    const std::string cache = (root / "cache").string();
    const std::string run = (root / "run").string();

    if (run_cmd(cli + " make-synthetic --out " + data +
                " --volumes 2 --hr-size 128 --micro-size 96 --slices 2 --seed 7") != 0)
        return false;
    if (run_cmd(cli + " extract-patches --data " + data + " --out " + cache +
                " --clinical-size 8 --micro-size 64 --count 16 --seed 7") != 0)
        return false;

    TrainConfig cfg = tiny_config();
    cfg.epochs = 2;
    cfg.iterations_per_epoch = 100;
    {
        std::ofstream f(root / "config.json");
        f << train_config_to_json(cfg) << "\n";
    }
    if (run_cmd(cli + " train --data " + cache + " --config " + (root / "config.json").string() +
                " --out " + run) != 0)
        return false;
    const std::string ckpt = (fs::path(run) / "checkpoint.mmsr").string();

    // untrained baseline: same architecture and data, zero steps
    const std::string base_ckpt = (root / "untrained.mmsr").string();
    {
        TrainDataset ds =
            dataset_from_patches(load_patch_cache((fs::path(cache) / "clinical").string()),
                                 load_patch_cache((fs::path(cache) / "micro").string()));
        Trainer untrained(cfg, std::move(ds));
        untrained.save(base_ckpt);
    }

    // one full volume through the stitcher
    std::string first_clinical;
    for (const auto& e : fs::directory_iterator(fs::path(data) / "clinical")) {
        first_clinical = e.path().string();
        break;
    }
    if (run_cmd(cli + " super-resolve --checkpoint " + ckpt + " --in " + first_clinical +
                " --out " + (root / "sr.nii").string() + " --tile-size 8 --overlap 0") != 0)
        return false;

    const std::string trained_json = (root / "metrics_trained.json").string();
    const std::string baseline_json = (root / "metrics_untrained.json").string();
    if (run_cmd(cli + " evaluate --data " + data + " --checkpoint " + ckpt + " --out " +
                trained_json + " --tile-size 8 --overlap 0 --montage " +
                (root / "montage.png").string()) != 0)
        return false;
    if (run_cmd(cli + " evaluate --data " + data + " --checkpoint " + base_ckpt + " --out " +
                baseline_json + " --tile-size 8 --overlap 0") != 0)
        return false;

    const double trained = mean_consistency_mse(trained_json);
    const double baseline = mean_consistency_mse(baseline_json);
    std::cout << "  mean consistency MSE trained " << trained << ", untrained " << baseline
              << "\n";
    return std::isfinite(trained) && trained < baseline;
}

bool crit9_checkpoint_fidelity() {
    TrainConfig c = tiny_config();
    c.epochs = 4;
    c.iterations_per_epoch = 4;
    const TrainDataset ds = synthetic_patch_set(8);

    Trainer full(c, ds);
    full.run_iterations(8);

    Trainer head(c, ds);
    head.run_iterations(3);
    const fs::path p = fs::temp_directory_path() / "mmsr_acceptance_ckpt.mmsr";
    head.save(p.string());

    const LoadedCheckpoint lc = load_checkpoint(p.string());
    const auto orig = head.bundle().all_params();
    const auto back = lc.bundle.all_params();
    if (orig.size() != back.size()) return false;
    for (size_t i = 0; i < orig.size(); ++i)
        if (orig[i].var->value.data != back[i].var->value.data) return false;

    Trainer tail(p.string(), ds);
    tail.run_iterations(5);
    for (size_t i = 0; i < 8; ++i) {
        if (tail.state().loss_history[i].total != full.state().loss_history[i].total &&
            std::abs(tail.state().loss_history[i].total - full.state().loss_history[i].total) >
                1e-12)
            return false;
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-mmsr-cli>\n";
        return 64;
    }
    const std::string cli = argv[1];

    criterion(1, "loss-kernel exactness at 1e-6", crit1_loss_exactness);
    criterion(2, "analytic gradients vs central differences", crit2_gradients);
    criterion(3, "rescale identity f(g(p,8),8) = p", crit3_rescale_identity);
    criterion(4, "generator shape law and shared latents", crit4_shape_law);
    criterion(5, "downsample-consistency optimization sanity", crit5_optimization_sanity);
    criterion(6, "SR-CycleGAN d_term descent over 200 iterations", crit6_training_descent);
    criterion(7, "stitcher equivalence and unit blending weights", crit7_stitcher);
    criterion(8, "end-to-end CLI pipeline beats untrained baseline",
              [&] { return crit8_end_to_end(cli); });
    criterion(9, "checkpoint bit-exactness and resume trajectory", crit9_checkpoint_fidelity);

    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures))
              << "\n";
    return failures;
}
