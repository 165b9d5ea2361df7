#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mmsr/trainer.hpp"

using namespace mmsr;
namespace fs = std::filesystem;

namespace {

TrainDataset tiny_dataset(int n_patches = 8, std::uint64_t seed = 3) {
    TrainDataset d;
    Rng rng(seed);
    for (int k = 0; k < n_patches; ++k) {
        ImagePatch lr(8, 8), hr(64, 64);
        for (auto& v : lr.data) v = rng.next_uniform(-1.0, 1.0);
        for (auto& v : hr.data) v = rng.next_uniform(-1.0, 1.0);
        d.clinical.push_back(lr);
        d.micro.push_back(hr);
    }
    return d;
}

TrainConfig tiny_config(Variant variant = Variant::sr_cyclegan) {
    TrainConfig c;
    c.variant = variant;
    c.seed = 1234;
    c.g1.base_width = 6;
    c.g1.n_res_blocks = 1;
    c.g2.base_width = 6;
    c.g2.n_res_blocks = 1;
    c.dx.base_width = 6;
    c.dx.n_layers = 2;
    c.dy.base_width = 6;
    c.dy.n_layers = 2;
    c.epochs = 4;
    c.iterations_per_epoch = 4;
    return c;
}

fs::path tmp_dir() {
    const fs::path d = fs::temp_directory_path() / "mmsr_trainer_tests";
    fs::create_directories(d);
    return d;
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("config json round-trip") {
    TrainConfig c = tiny_config(Variant::sr_unit);
    c.lr = 1e-3;
    c.weights.w_idt = 0.5;
    c.ssim_form = SsimForm::standard;
    const TrainConfig r = train_config_from_json(train_config_to_json(c));
    CHECK(r.lr == doctest::Approx(1e-3));
    CHECK(r.variant == Variant::sr_unit);
    CHECK(r.weights.w_idt == doctest::Approx(0.5));
    CHECK(r.ssim_form == SsimForm::standard);
    CHECK(r.g1.base_width == 6);
    CHECK(r.seed == 1234);
    CHECK_THROWS_AS(train_config_from_json("{nope"), ParseError);
}

TEST_CASE("10-iteration smoke: finite losses") {
    Trainer t(tiny_config(), tiny_dataset());
    t.run_iterations(10);
    REQUIRE(t.state().loss_history.size() == 10);
    for (const auto& lb : t.state().loss_history) {
        CHECK(std::isfinite(lb.total));
        CHECK(std::isfinite(lb.orig));
        CHECK(std::isfinite(lb.s_x));
        CHECK(std::isfinite(lb.s_y));
        CHECK(std::isfinite(lb.d_term));
        CHECK(std::isfinite(lb.u_term));
    }
    for (const auto& d : t.state().disc_history) {
        CHECK(std::isfinite(d.first));
        CHECK(std::isfinite(d.second));
    }
}

TEST_CASE("UNIT variant smoke") {
    Trainer t(tiny_config(Variant::sr_unit), tiny_dataset());
    t.run_iterations(4);
    for (const auto& lb : t.state().loss_history) CHECK(std::isfinite(lb.total));
}

TEST_CASE("zero lambdas degenerate the total to the base objective") {
    TrainConfig c = tiny_config();
    c.weights.lambda1 = c.weights.lambda2 = c.weights.lambda3 = c.weights.lambda4 = 0.0;
    Trainer t(c, tiny_dataset());
    t.run_iterations(5);
    for (const auto& lb : t.state().loss_history)
        CHECK(lb.total == doctest::Approx(lb.orig).epsilon(1e-12));
}

TEST_CASE("discriminator updates do not touch generator parameters and vice versa") {
    TrainConfig c = tiny_config();
    Trainer t(c, tiny_dataset());
    const auto before = t.bundle().generator_params();
    std::vector<Tensor> snap;
    for (const auto& p : before) snap.push_back(p.var->value);
    t.run_iterations(1);
    bool gen_changed = false;
    const auto after = t.bundle().generator_params();
    for (size_t i = 0; i < after.size(); ++i)
        if (after[i].var->value.data != snap[i].data) gen_changed = true;
    CHECK(gen_changed); // generators are trained...
    // ...while a discriminator-only Adam group never sees generator vars
    CHECK(t.bundle().dx->params().size() + t.bundle().dy->params().size() +
              t.bundle().generator_params().size() ==
          t.bundle().all_params().size());
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Trainer t(tiny_config(), tiny_dataset());
    t.run_iterations(3);
    const fs::path p = tmp_dir() / "ckpt.mmsr";
    t.save(p.string());
    const LoadedCheckpoint lc = load_checkpoint(p.string());
    const auto orig = t.bundle().all_params();
    const auto back = lc.bundle.all_params();
    REQUIRE(orig.size() == back.size());
    for (size_t i = 0; i < orig.size(); ++i) {
        CHECK(orig[i].name == back[i].name);
        CHECK(orig[i].var->value.data == back[i].var->value.data); // bitwise
    }
    CHECK(lc.state.iteration == 3);
    REQUIRE(lc.state.loss_history.size() == 3);
    CHECK(lc.state.loss_history[2].total == t.state().loss_history[2].total);
    CHECK(lc.state.rng_state == t.state().rng_state);
    CHECK(lc.has_opt);
    CHECK(lc.opt_g_t == 3);
}

TEST_CASE("truncated checkpoint raises") {
    Trainer t(tiny_config(), tiny_dataset());
    const fs::path p = tmp_dir() / "trunc.mmsr";
    t.save(p.string());
    const auto full = fs::file_size(p);
    fs::resize_file(p, full / 2);
    CHECK_THROWS_AS(load_checkpoint(p.string()), CheckpointError);

    const fs::path bad = tmp_dir() / "bad.mmsr";
    std::ofstream(bad) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(bad.string()), CheckpointError);
}

TEST_CASE("resume reproduces the uninterrupted trajectory") {
    const TrainConfig c = tiny_config();
    Trainer full(c, tiny_dataset());
    full.run_iterations(8);

    Trainer head(c, tiny_dataset());
    head.run_iterations(3);
    const fs::path p = tmp_dir() / "resume.mmsr";
    head.save(p.string());
    Trainer tail(p.string(), tiny_dataset());
    CHECK(tail.state().iteration == 3);
    tail.run_iterations(5);

    REQUIRE(tail.state().loss_history.size() == 8);
    for (size_t i = 0; i < 8; ++i) {
        CHECK(tail.state().loss_history[i].total ==
              doctest::Approx(full.state().loss_history[i].total).epsilon(1e-12));
        CHECK(tail.state().disc_history[i].first ==
              doctest::Approx(full.state().disc_history[i].first).epsilon(1e-12));
    }
}

TEST_CASE("lr schedule: constant then linear decay") {
    TrainConfig c = tiny_config();
    c.epochs = 8;
    c.iterations_per_epoch = 1;
    Trainer t(c, tiny_dataset());
    CHECK(t.current_lr_scale() == doctest::Approx(1.0));
    t.run_iterations(4); // epoch 4 = half
    CHECK(t.current_lr_scale() == doctest::Approx(1.0));
    t.run_iterations(2); // epoch 6
    CHECK(t.current_lr_scale() == doctest::Approx(0.5));
}

TEST_CASE("loss csv") {
    Trainer t(tiny_config(), tiny_dataset());
    t.run_iterations(2);
    const fs::path p = tmp_dir() / "loss.csv";
    t.write_loss_csv(p.string());
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,epoch,total,orig,s_x,s_y,d_term,u_term,d_x_loss,d_y_loss");
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("empty dataset is rejected") {
    CHECK_THROWS_AS(Trainer(tiny_config(), TrainDataset{}), ParamError);
}

} // TEST_SUITE
