#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "mmsr/metrics.hpp"
#include "mmsr/patches.hpp"
#include "mmsr/segmentation.hpp"
#include "mmsr/stitcher.hpp"
#include "mmsr/synthetic.hpp"
#include "mmsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmsr;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<CTVolume> load_dir(const std::string& dir, Modality modality) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string p = e.path().string();
        if (p.ends_with(".nii") || p.ends_with(".nii.gz") || p.ends_with(".raw"))
            paths.push_back(p);
    }
    std::sort(paths.begin(), paths.end());
    std::vector<CTVolume> vols;
    for (const auto& p : paths) vols.push_back(load_volume(p, modality));
    return vols;
}

// segment, normalize in-mask, then sample patches from every volume
std::vector<PatchSample> patches_from_volumes(const std::vector<CTVolume>& vols, int size,
                                              int count, std::uint64_t seed) {
    std::vector<PatchSample> all;
    std::uint64_t s = seed;
    for (const auto& vol : vols) {
        const LungMask mask = segment_lung(vol);
        auto [norm, np] = normalize(vol, &mask);
        auto ps = sample_patches(norm, mask, size, count, s++);
        all.insert(all.end(), ps.begin(), ps.end());
    }
    return all;
}

SliceFn checkpoint_slice_fn(const std::string& path, ModelBundle& bundle) {
    bundle = load_checkpoint(path).bundle;
    return [&bundle](const Tensor& t) { return bundle.super_resolve(t); };
}

int run_make_synthetic(const std::string& out, int volumes, int hr_size, int micro_size,
                       int slices, double noise_sigma, std::uint64_t seed) {
    SyntheticParams p;
    p.n_volumes = volumes;
    p.hr_size = hr_size;
    p.micro_size = micro_size;
    p.n_slices = slices;
    p.noise_sigma = noise_sigma;
    p.seed = seed;
    write_synthetic_dataset(make_synthetic_dataset(p), out);
    std::cout << "wrote synthetic dataset to " << out << "\n";
    return 0;
}

int run_extract_patches(const std::string& data, const std::string& out, int clinical_size,
                        int micro_size, int count, std::uint64_t seed) {
    const auto clinical = load_dir((fs::path(data) / "clinical").string(), Modality::clinical);
    const auto micro = load_dir((fs::path(data) / "micro").string(), Modality::micro);
    const auto cp = patches_from_volumes(clinical, clinical_size, count, seed);
    const auto mp = patches_from_volumes(micro, micro_size, count, seed + 0x9e37);
    save_patch_cache(cp, (fs::path(out) / "clinical").string());
    save_patch_cache(mp, (fs::path(out) / "micro").string());
    std::cout << "cached " << cp.size() << " clinical and " << mp.size() << " micro patches in "
              << out << "\n";
    return 0;
}

int run_train(const std::string& data, const std::string& config_path, const std::string& out,
              const std::string& resume, int iterations, std::uint64_t seed, bool seed_set,
              const std::string& variant) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = train_config_from_json(read_file(config_path));
    if (seed_set) cfg.seed = seed;
    if (!variant.empty()) cfg.variant = variant_from_name(variant);
    TrainDataset ds = dataset_from_patches(load_patch_cache((fs::path(data) / "clinical").string()),
                                           load_patch_cache((fs::path(data) / "micro").string()));
    fs::create_directories(out);
    std::unique_ptr<Trainer> trainer;
    if (!resume.empty()) {
        trainer = std::make_unique<Trainer>(resume, std::move(ds));
    } else {
        trainer = std::make_unique<Trainer>(cfg, std::move(ds));
    }
    trainer->set_checkpoint_dir(out);
    if (iterations > 0)
        trainer->run_iterations(iterations);
    else
        trainer->run();
    trainer->save((fs::path(out) / "checkpoint.mmsr").string());
    trainer->write_loss_csv((fs::path(out) / "loss.csv").string());
    const auto& st = trainer->state();
    std::cout << "trained " << st.iteration << " iterations (epoch " << st.epoch << "), last total "
              << (st.loss_history.empty() ? 0.0 : st.loss_history.back().total) << "\n";
    return 0;
}

int run_super_resolve(const std::string& checkpoint, const std::string& in_path,
                      const std::string& out_path, int tile_size, int overlap) {
    ModelBundle bundle;
    const SliceFn g1 = checkpoint_slice_fn(checkpoint, bundle);
    CTVolume vol = load_volume(in_path, Modality::clinical);
    const LungMask mask = segment_lung(vol);
    auto [norm, np] = normalize(vol, &mask);
    CTVolume sr = super_resolve_volume(g1, norm, tile_size, overlap);
    save_volume(denormalize(sr, np), out_path);
    std::cout << "super-resolved " << vol.id << " (" << vol.nx << "x" << vol.ny << "x" << vol.nz
              << ") -> " << out_path << "\n";
    return 0;
}

int run_evaluate(const std::string& data, const std::string& checkpoint, const std::string& out,
                 int tile_size, int overlap, const std::string& montage_path) {
    ModelBundle bundle;
    SliceFn g1;
    std::string digest;
    if (!checkpoint.empty()) {
        g1 = checkpoint_slice_fn(checkpoint, bundle);
        digest = "checkpoint:" + fs::path(checkpoint).filename().string();
    } else {
        g1 = [](const Tensor& t) {
            return bicubic_upsample(ImagePatch::from_tensor(t), 8).to_chw();
        };
        digest = "baseline:bicubic";
    }

    const auto clinical = load_dir((fs::path(data) / "clinical").string(), Modality::clinical);
    const bool has_gt = fs::exists(fs::path(data) / "gt");

    MetricsReport report;
    report.config_digest = digest;
    bool montage_done = montage_path.empty();
    for (const auto& vol : clinical) {
        const LungMask mask = segment_lung(vol);
        auto [norm, np] = normalize(vol, &mask);
        const int z = vol.nz / 2;
        const ImagePatch slice = norm.axial_slice(z);
        const TilePlan plan = plan_tiles(slice.height, slice.width, tile_size, overlap);
        const ImagePatch sr = super_resolve_slice(g1, slice, plan);

        VolumeMetrics vm;
        vm.consistency = consistency_metrics(slice, sr);
        if (has_gt) {
            std::string gt_id = vol.id;
            if (gt_id.rfind("clinical_", 0) == 0) gt_id = "truth_" + gt_id.substr(9);
            const fs::path gt_file = fs::path(data) / "gt" / (gt_id + ".nii");
            if (fs::exists(gt_file)) {
                CTVolume gt = load_volume(gt_file.string(), Modality::clinical);
                ImagePatch truth = gt.axial_slice(z);
                // ground truth shares the clinical intensity scale
                for (auto& v : truth.data)
                    v = std::clamp(np.to_normalized(v), -1.0, 1.0);
                vm.oracle = oracle_metrics(sr, truth);
            }
        }
        report.per_volume[vol.id] = vm;

        if (!montage_done) {
            emit_montage(slice, sr, bicubic_upsample(slice, 8), montage_path);
            montage_done = true;
        }
    }

    std::ofstream o(out);
    if (!o) throw IoError("cannot write " + out);
    o << report.to_json() << "\n";
    std::cout << "evaluated " << report.per_volume.size() << " volumes -> " << out << "\n";
    return 0;
}

int run_montage(const std::string& checkpoint, const std::string& in_path,
                const std::string& out_path, int slice_index, int tile_size, int overlap) {
    ModelBundle bundle;
    const SliceFn g1 = checkpoint_slice_fn(checkpoint, bundle);
    CTVolume vol = load_volume(in_path, Modality::clinical);
    const LungMask mask = segment_lung(vol);
    auto [norm, np] = normalize(vol, &mask);
    const int z = slice_index < 0 ? vol.nz / 2 : slice_index;
    if (z >= vol.nz) throw ParamError("slice index out of range");
    const ImagePatch slice = norm.axial_slice(z);
    const TilePlan plan = plan_tiles(slice.height, slice.width, tile_size, overlap);
    const ImagePatch sr = super_resolve_slice(g1, slice, plan);
    emit_montage(slice, sr, bicubic_upsample(slice, 8), out_path);
    std::cout << "montage of " << vol.id << " slice " << z << " -> " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unpaired 8x CT super-resolution"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string out, data, config_path, checkpoint, resume, in_path, montage_path;
    int volumes = 5, hr_size = 256, micro_size = 384, slices = 8;
    double noise_sigma = 15.0;
    int clinical_patch = 32, micro_patch = 256, count = 2000;
    int iterations = 0, tile_size = 32, overlap = 4, slice_index = -1;

    auto* mk = app.add_subcommand("make-synthetic", "generate a procedural dataset");
    mk->add_option("--out", out, "output directory")->required();
    mk->add_option("--volumes", volumes, "volumes per domain");
    mk->add_option("--hr-size", hr_size, "clinical HR truth in-plane size");
    mk->add_option("--micro-size", micro_size, "micro in-plane size");
    mk->add_option("--slices", slices, "slices per volume");
    mk->add_option("--noise-sigma", noise_sigma, "clinical LR noise sigma");
    mk->add_option("--seed", seed, "RNG seed");

    auto* ex = app.add_subcommand("extract-patches", "segment, normalize and cache patches");
    ex->add_option("--data", data, "dataset directory")->required();
    ex->add_option("--out", out, "patch cache directory")->required();
    ex->add_option("--clinical-size", clinical_patch, "clinical patch size");
    ex->add_option("--micro-size", micro_patch, "micro patch size");
    ex->add_option("--count", count, "patches per volume");
    ex->add_option("--seed", seed, "RNG seed");

    auto* tr = app.add_subcommand("train", "train from a patch cache");
    tr->add_option("--data", data, "patch cache directory")->required();
    tr->add_option("--config", config_path, "training config json");
    tr->add_option("--out", out, "output directory")->required();
    tr->add_option("--resume", resume, "checkpoint to resume from");
    tr->add_option("--iterations", iterations, "cap on iterations (0: full schedule)");
    auto* seed_opt = tr->add_option("--seed", seed, "override config seed");
    std::string variant;
    tr->add_option("--variant", variant, "override config variant")
        ->check(CLI::IsMember({"sr-cyclegan", "sr-unit"}));

    auto* srp = app.add_subcommand("super-resolve", "apply a trained model to a volume");
    srp->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    srp->add_option("--in", in_path, "input volume")->required();
    srp->add_option("--out", out, "output volume")->required();
    srp->add_option("--tile-size", tile_size, "LR tile size");
    srp->add_option("--overlap", overlap, "LR tile overlap");

    auto* ev = app.add_subcommand("evaluate", "consistency / oracle metrics report");
    ev->add_option("--data", data, "dataset directory")->required();
    ev->add_option("--checkpoint", checkpoint, "model checkpoint (default: bicubic baseline)");
    ev->add_option("--out", out, "metrics json path")->required();
    ev->add_option("--tile-size", tile_size, "LR tile size");
    ev->add_option("--overlap", overlap, "LR tile overlap");
    ev->add_option("--montage", montage_path, "also write a montage PNG of the first volume");

    auto* mo = app.add_subcommand("montage", "side-by-side comparison image");
    mo->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    mo->add_option("--in", in_path, "input volume")->required();
    mo->add_option("--out", out, "output PNG path")->required();
    mo->add_option("--slice", slice_index, "slice index (default: middle)");
    mo->add_option("--tile-size", tile_size, "LR tile size");
    mo->add_option("--overlap", overlap, "LR tile overlap");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mk->parsed())
            return run_make_synthetic(out, volumes, hr_size, micro_size, slices, noise_sigma, seed);
        if (ex->parsed())
            return run_extract_patches(data, out, clinical_patch, micro_patch, count, seed);
        if (tr->parsed())
            return run_train(data, config_path, out, resume, iterations, seed,
                             seed_opt->count() > 0, variant);
        if (srp->parsed()) return run_super_resolve(checkpoint, in_path, out, tile_size, overlap);
        if (ev->parsed())
            return run_evaluate(data, checkpoint, out, tile_size, overlap, montage_path);
        if (mo->parsed())
            return run_montage(checkpoint, in_path, out, slice_index, tile_size, overlap);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
