#include "mmsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mmsr {

void TrainConfig::validate() const {
    if (epochs < 1) throw ParamError("epochs must be >= 1");
    if (batch_size < 1) throw ParamError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ParamError("lr must be > 0");
    if (pool_size < 1) throw ParamError("pool_size must be >= 1");
    weights.validate();
    ssim.validate();
    g1.validate();
    g2.validate();
    dx.validate();
    dy.validate();
}

std::string train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["weights"] = {{"lambda1", c.weights.lambda1}, {"lambda2", c.weights.lambda2},
                    {"lambda3", c.weights.lambda3}, {"lambda4", c.weights.lambda4},
                    {"w_adv", c.weights.w_adv},     {"w_cyc", c.weights.w_cyc},
                    {"w_idt", c.weights.w_idt}};
    j["ssim"] = {{"N", c.ssim.N}, {"C1", c.ssim.C1}, {"C2", c.ssim.C2}};
    j["ssim_form"] = c.ssim_form == SsimForm::as_trained ? "as-trained" : "standard";
    j["pool_size"] = c.pool_size;
    j["seed"] = c.seed;
    j["variant"] = variant_name(c.variant);
    j["iterations_per_epoch"] = c.iterations_per_epoch;
    j["checkpoint_every"] = c.checkpoint_every;
    j["unit_latent_weight"] = c.unit_latent_weight;
    j["unit_recon_weight"] = c.unit_recon_weight;
    j["g1"] = {{"base_width", c.g1.base_width},
               {"n_res_blocks", c.g1.n_res_blocks},
               {"upscale_stages", c.g1.upscale_stages}};
    j["g2"] = {{"base_width", c.g2.base_width},
               {"downscale_stages", c.g2.downscale_stages},
               {"n_res_blocks", c.g2.n_res_blocks}};
    j["dx"] = {{"n_layers", c.dx.n_layers}, {"base_width", c.dx.base_width}};
    j["dy"] = {{"n_layers", c.dy.n_layers}, {"base_width", c.dy.base_width}};
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad train config: ") + e.what());
    }
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr = j.value("lr", c.lr);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        if (j.contains("weights")) {
            const auto& w = j["weights"];
            c.weights.lambda1 = w.value("lambda1", c.weights.lambda1);
            c.weights.lambda2 = w.value("lambda2", c.weights.lambda2);
            c.weights.lambda3 = w.value("lambda3", c.weights.lambda3);
            c.weights.lambda4 = w.value("lambda4", c.weights.lambda4);
            c.weights.w_adv = w.value("w_adv", c.weights.w_adv);
            c.weights.w_cyc = w.value("w_cyc", c.weights.w_cyc);
            c.weights.w_idt = w.value("w_idt", c.weights.w_idt);
        }
        if (j.contains("ssim")) {
            const auto& s = j["ssim"];
            c.ssim.N = s.value("N", c.ssim.N);
            c.ssim.C1 = s.value("C1", c.ssim.C1);
            c.ssim.C2 = s.value("C2", c.ssim.C2);
        }
        if (j.value("ssim_form", "as-trained") == std::string("standard"))
            c.ssim_form = SsimForm::standard;
        c.pool_size = j.value("pool_size", c.pool_size);
        c.seed = j.value("seed", c.seed);
        if (j.contains("variant")) c.variant = variant_from_name(j["variant"].get<std::string>());
        c.iterations_per_epoch = j.value("iterations_per_epoch", c.iterations_per_epoch);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.unit_latent_weight = j.value("unit_latent_weight", c.unit_latent_weight);
        c.unit_recon_weight = j.value("unit_recon_weight", c.unit_recon_weight);
        if (j.contains("g1")) {
            const auto& g = j["g1"];
            c.g1.base_width = g.value("base_width", c.g1.base_width);
            c.g1.n_res_blocks = g.value("n_res_blocks", c.g1.n_res_blocks);
            c.g1.upscale_stages = g.value("upscale_stages", c.g1.upscale_stages);
        }
        if (j.contains("g2")) {
            const auto& g = j["g2"];
            c.g2.base_width = g.value("base_width", c.g2.base_width);
            c.g2.downscale_stages = g.value("downscale_stages", c.g2.downscale_stages);
            c.g2.n_res_blocks = g.value("n_res_blocks", c.g2.n_res_blocks);
        }
        if (j.contains("dx")) {
            c.dx.n_layers = j["dx"].value("n_layers", c.dx.n_layers);
            c.dx.base_width = j["dx"].value("base_width", c.dx.base_width);
        }
        if (j.contains("dy")) {
            c.dy.n_layers = j["dy"].value("n_layers", c.dy.n_layers);
            c.dy.base_width = j["dy"].value("base_width", c.dy.base_width);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad train config fields: ") + e.what());
    }
    return c;
}

TrainDataset dataset_from_patches(const std::vector<PatchSample>& clinical,
                                  const std::vector<PatchSample>& micro) {
    TrainDataset d;
    d.clinical.reserve(clinical.size());
    d.micro.reserve(micro.size());
    for (const auto& p : clinical) d.clinical.push_back(p.patch);
    for (const auto& p : micro) d.micro.push_back(p.patch);
    return d;
}

namespace {

// mean((s - target)^2), the least-squares adversarial objective
ag::Var lsgan_loss(const ag::Var& scores, double target) {
    ag::Var d = ag::add_scalar(scores, -target);
    return ag::mean_all(ag::mul(d, d));
}

int default_iters_per_epoch(const TrainDataset& d) {
    return static_cast<int>(std::max<size_t>(1, std::min(d.clinical.size(), d.micro.size())));
}

} // namespace

Trainer::Trainer(TrainConfig cfg, TrainDataset data)
    : cfg_(std::move(cfg)), data_(std::move(data)), rng_(cfg_.seed) {
    cfg_.validate();
    if (data_.clinical.empty() || data_.micro.empty())
        throw ParamError("training needs patches from both domains");
    bundle_ = build_bundle(cfg_.variant, cfg_.g1, cfg_.g2, cfg_.dx, cfg_.dy, cfg_.seed);
    auto gen_vars = [this] {
        std::vector<ag::Var> v;
        for (const auto& p : bundle_.generator_params()) v.push_back(p.var);
        return v;
    };
    std::vector<ag::Var> disc_vars;
    for (const auto& p : bundle_.dx->params()) disc_vars.push_back(p.var);
    for (const auto& p : bundle_.dy->params()) disc_vars.push_back(p.var);
    opt_g_ = Adam(gen_vars(), {cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8});
    opt_d_ = Adam(disc_vars, {cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8});
    iters_per_epoch_ = cfg_.iterations_per_epoch > 0 ? cfg_.iterations_per_epoch
                                                     : default_iters_per_epoch(data_);
    state_.rng_state = rng_.state();
}

Trainer::Trainer(const std::string& checkpoint_path, TrainDataset data)
    : data_(std::move(data)), rng_(0) {
    LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
    if (lc.config_json.empty())
        throw CheckpointError("checkpoint has no training config, cannot resume");
    cfg_ = train_config_from_json(lc.config_json);
    cfg_.validate();
    if (data_.clinical.empty() || data_.micro.empty())
        throw ParamError("training needs patches from both domains");
    bundle_ = std::move(lc.bundle);
    state_ = std::move(lc.state);
    std::vector<ag::Var> gen_vars, disc_vars;
    for (const auto& p : bundle_.generator_params()) gen_vars.push_back(p.var);
    for (const auto& p : bundle_.dx->params()) disc_vars.push_back(p.var);
    for (const auto& p : bundle_.dy->params()) disc_vars.push_back(p.var);
    opt_g_ = Adam(gen_vars, {cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8});
    opt_d_ = Adam(disc_vars, {cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8});
    if (lc.has_opt) {
        opt_g_.t = lc.opt_g_t;
        opt_g_.m = std::move(lc.opt_g_m);
        opt_g_.v = std::move(lc.opt_g_v);
        opt_d_.t = lc.opt_d_t;
        opt_d_.m = std::move(lc.opt_d_m);
        opt_d_.v = std::move(lc.opt_d_v);
    }
    pool_x_ = std::move(lc.pool_x);
    pool_y_ = std::move(lc.pool_y);
    rng_.set_state(state_.rng_state);
    iters_per_epoch_ = cfg_.iterations_per_epoch > 0 ? cfg_.iterations_per_epoch
                                                     : default_iters_per_epoch(data_);
}

double Trainer::current_lr_scale() const {
    const int half = cfg_.epochs / 2;
    if (state_.epoch < half || cfg_.epochs <= 1) return 1.0;
    // linear decay to zero over the second half
    return static_cast<double>(cfg_.epochs - state_.epoch) / (cfg_.epochs - half);
}

double Trainer::checked(const ag::Var& v, const char* term) const {
    const double x = v->value[0];
    if (!std::isfinite(x))
        throw TrainingError(std::string("non-finite ") + term + " at iteration " +
                            std::to_string(state_.iteration));
    return x;
}

void Trainer::zero_all_grads() {
    opt_g_.zero_grad();
    opt_d_.zero_grad();
}

Tensor Trainer::pool_query(std::vector<Tensor>& pool, const Tensor& fake) {
    if (static_cast<int>(pool.size()) < cfg_.pool_size) {
        pool.push_back(fake);
        return fake;
    }
    if (rng_.next_index(2) == 0) return fake;
    const size_t k = rng_.next_index(pool.size());
    Tensor old = pool[k];
    pool[k] = fake;
    return old;
}

void Trainer::step_cyclegan(LossBreakdown& lb, double& d_x_loss, double& d_y_loss) {
    const double inv_b = 1.0 / cfg_.batch_size;
    LossBreakdown acc{};
    double dx_acc = 0, dy_acc = 0;
    std::vector<Tensor> fakes_x, fakes_y;

    // generator half-step: gradients accumulate over the batch
    zero_all_grads();
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const auto& xp = data_.clinical[rng_.next_index(data_.clinical.size())];
        const auto& yp = data_.micro[rng_.next_index(data_.micro.size())];
        ag::Var x = ag::constant(xp.to_chw());
        ag::Var y = ag::constant(yp.to_chw());

        ag::Var x_sr = bundle_.g1->forward(x);
        ag::Var y_lr = bundle_.g2->forward(y);
        ag::Var x_cyc = bundle_.g2->forward(x_sr);
        ag::Var y_cyc = bundle_.g1->forward(y_lr);

        ag::Var adv = ag::add(lsgan_loss(bundle_.dy->forward(x_sr), 1.0),
                              lsgan_loss(bundle_.dx->forward(y_lr), 1.0));
        ag::Var cyc = ag::add(ag::l1_loss(x_cyc, x), ag::l1_loss(y_cyc, y));
        ag::Var orig = ag::add(ag::mul_scalar(adv, cfg_.weights.w_adv),
                               ag::mul_scalar(cyc, cfg_.weights.w_cyc));
        if (cfg_.weights.w_idt > 0.0) {
            // identity through the fixed rescalers: G1 on a pooled HR
            // image should reproduce it, G2 on a replicated LR image
            // should reproduce that
            ag::Var idt = ag::add(ag::l1_loss(bundle_.g1->forward(ag::avg_pool(y, 8)), y),
                                  ag::l1_loss(bundle_.g2->forward(ag::nn_upsample(x, 8)), x));
            orig = ag::add(orig, ag::mul_scalar(idt, cfg_.weights.w_idt));
        }
        ag::MmsrTerms terms = ag::mmsr_terms(x, x_sr, y, y_lr, cfg_.ssim, cfg_.ssim_form);
        ag::Var total = ag::mmsr_weighted(orig, terms, cfg_.weights);

        acc.orig += checked(orig, "base objective") * inv_b;
        acc.s_x += checked(terms.s_x, "structure term (LR)") * inv_b;
        acc.s_y += checked(terms.s_y, "structure term (HR)") * inv_b;
        acc.d_term += checked(terms.d_term, "downsample term") * inv_b;
        acc.u_term += checked(terms.u_term, "upsample term") * inv_b;
        acc.total += checked(total, "total loss") * inv_b;

        ag::backward(ag::mul_scalar(total, inv_b));
        fakes_x.push_back(y_lr->value);
        fakes_y.push_back(x_sr->value);
    }
    opt_g_.step(current_lr_scale());

    // discriminator half-step with replayed fakes
    zero_all_grads();
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const auto& xp = data_.clinical[rng_.next_index(data_.clinical.size())];
        const auto& yp = data_.micro[rng_.next_index(data_.micro.size())];
        ag::Var x = ag::constant(xp.to_chw());
        ag::Var y = ag::constant(yp.to_chw());
        const Tensor fx = pool_query(pool_x_, fakes_x[static_cast<size_t>(b)]);
        const Tensor fy = pool_query(pool_y_, fakes_y[static_cast<size_t>(b)]);

        ag::Var d_x = ag::mul_scalar(ag::add(lsgan_loss(bundle_.dx->forward(x), 1.0),
                                             lsgan_loss(bundle_.dx->forward(ag::constant(fx)), 0.0)),
                                     0.5);
        ag::Var d_y = ag::mul_scalar(ag::add(lsgan_loss(bundle_.dy->forward(y), 1.0),
                                             lsgan_loss(bundle_.dy->forward(ag::constant(fy)), 0.0)),
                                     0.5);
        dx_acc += checked(d_x, "D_X loss") * inv_b;
        dy_acc += checked(d_y, "D_Y loss") * inv_b;
        ag::backward(ag::mul_scalar(ag::add(d_x, d_y), inv_b));
    }
    opt_d_.step(current_lr_scale());

    lb = acc;
    d_x_loss = dx_acc;
    d_y_loss = dy_acc;
}

void Trainer::step_unit(LossBreakdown& lb, double& d_x_loss, double& d_y_loss) {
    const double inv_b = 1.0 / cfg_.batch_size;
    LossBreakdown acc{};
    double dx_acc = 0, dy_acc = 0;
    std::vector<Tensor> fakes_x, fakes_y;
    const auto& unit = *bundle_.unit;

    zero_all_grads();
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const auto& xp = data_.clinical[rng_.next_index(data_.clinical.size())];
        const auto& yp = data_.micro[rng_.next_index(data_.micro.size())];
        ag::Var x = ag::constant(xp.to_chw());
        ag::Var y = ag::constant(yp.to_chw());

        ag::Var mu_x = unit.encode_lr(x);
        ag::Var mu_y = unit.encode_hr(y);
        // VAE-style sampling around the latent mean
        Tensor nx(mu_x->value.shape), ny(mu_y->value.shape);
        for (auto& v : nx.data) v = rng_.next_normal();
        for (auto& v : ny.data) v = rng_.next_normal();
        ag::Var z_x = ag::add(mu_x, ag::constant(nx));
        ag::Var z_y = ag::add(mu_y, ag::constant(ny));

        ag::Var x_rec = unit.decode_lr(z_x);
        ag::Var y_rec = unit.decode_hr(z_y);
        ag::Var x_sr = unit.decode_hr(z_x);  // cross-domain: the SR path
        ag::Var y_lr = unit.decode_lr(z_y);
        ag::Var x_cyc = unit.decode_lr(unit.encode_hr(x_sr));
        ag::Var y_cyc = unit.decode_hr(unit.encode_lr(y_lr));

        ag::Var recon = ag::add(ag::l1_loss(x_rec, x), ag::l1_loss(y_rec, y));
        ag::Var latent = ag::add(ag::mean_all(ag::mul(mu_x, mu_x)),
                                 ag::mean_all(ag::mul(mu_y, mu_y)));
        ag::Var adv = ag::add(lsgan_loss(bundle_.dy->forward(x_sr), 1.0),
                              lsgan_loss(bundle_.dx->forward(y_lr), 1.0));
        ag::Var cyc = ag::add(ag::l1_loss(x_cyc, x), ag::l1_loss(y_cyc, y));
        ag::Var orig = ag::add(
            ag::add(ag::mul_scalar(adv, cfg_.weights.w_adv),
                    ag::mul_scalar(cyc, cfg_.weights.w_cyc)),
            ag::add(ag::mul_scalar(recon, cfg_.unit_recon_weight),
                    ag::mul_scalar(latent, cfg_.unit_latent_weight)));

        ag::MmsrTerms terms = ag::mmsr_terms(x, x_sr, y, y_lr, cfg_.ssim, cfg_.ssim_form);
        ag::Var total = ag::mmsr_weighted(orig, terms, cfg_.weights);

        acc.orig += checked(orig, "base objective") * inv_b;
        acc.s_x += checked(terms.s_x, "structure term (LR)") * inv_b;
        acc.s_y += checked(terms.s_y, "structure term (HR)") * inv_b;
        acc.d_term += checked(terms.d_term, "downsample term") * inv_b;
        acc.u_term += checked(terms.u_term, "upsample term") * inv_b;
        acc.total += checked(total, "total loss") * inv_b;

        ag::backward(ag::mul_scalar(total, inv_b));
        fakes_x.push_back(y_lr->value);
        fakes_y.push_back(x_sr->value);
    }
    opt_g_.step(current_lr_scale());

    zero_all_grads();
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const auto& xp = data_.clinical[rng_.next_index(data_.clinical.size())];
        const auto& yp = data_.micro[rng_.next_index(data_.micro.size())];
        ag::Var x = ag::constant(xp.to_chw());
        ag::Var y = ag::constant(yp.to_chw());
        const Tensor fx = pool_query(pool_x_, fakes_x[static_cast<size_t>(b)]);
        const Tensor fy = pool_query(pool_y_, fakes_y[static_cast<size_t>(b)]);
        ag::Var d_x = ag::mul_scalar(ag::add(lsgan_loss(bundle_.dx->forward(x), 1.0),
                                             lsgan_loss(bundle_.dx->forward(ag::constant(fx)), 0.0)),
                                     0.5);
        ag::Var d_y = ag::mul_scalar(ag::add(lsgan_loss(bundle_.dy->forward(y), 1.0),
                                             lsgan_loss(bundle_.dy->forward(ag::constant(fy)), 0.0)),
                                     0.5);
        dx_acc += checked(d_x, "D_X loss") * inv_b;
        dy_acc += checked(d_y, "D_Y loss") * inv_b;
        ag::backward(ag::mul_scalar(ag::add(d_x, d_y), inv_b));
    }
    opt_d_.step(current_lr_scale());

    lb = acc;
    d_x_loss = dx_acc;
    d_y_loss = dy_acc;
}

void Trainer::step() {
    LossBreakdown lb;
    double dxl = 0, dyl = 0;
    if (cfg_.variant == Variant::sr_cyclegan)
        step_cyclegan(lb, dxl, dyl);
    else
        step_unit(lb, dxl, dyl);
    state_.loss_history.push_back(lb);
    state_.disc_history.emplace_back(dxl, dyl);
    ++state_.iteration;
    state_.epoch = state_.iteration / iters_per_epoch_;
    state_.rng_state = rng_.state();
}

void Trainer::run_iterations(int n) {
    for (int i = 0; i < n; ++i) step();
}

void Trainer::run() {
    while (state_.epoch < cfg_.epochs) {
        const int target_epoch = state_.epoch + 1;
        while (state_.epoch < target_epoch && state_.iteration < cfg_.epochs * iters_per_epoch_)
            step();
        if (!checkpoint_dir_.empty() && cfg_.checkpoint_every > 0 &&
            state_.epoch % cfg_.checkpoint_every == 0 && state_.epoch < cfg_.epochs)
            save((std::filesystem::path(checkpoint_dir_) /
                  ("checkpoint_epoch" + std::to_string(state_.epoch) + ".mmsr"))
                     .string());
    }
}

void Trainer::save(const std::string& path) const {
    CheckpointExtras extras;
    extras.opt_g = &opt_g_;
    extras.opt_d = &opt_d_;
    extras.pool_x = &pool_x_;
    extras.pool_y = &pool_y_;
    extras.config_json = train_config_to_json(cfg_);
    save_checkpoint(bundle_, state_, path, &extras);
}

void Trainer::write_loss_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "iteration,epoch,total,orig,s_x,s_y,d_term,u_term,d_x_loss,d_y_loss\n";
    for (size_t i = 0; i < state_.loss_history.size(); ++i) {
        const auto& lb = state_.loss_history[i];
        const auto& d = state_.disc_history[i];
        out << i << "," << (i / static_cast<size_t>(iters_per_epoch_)) << "," << lb.total << ","
            << lb.orig << "," << lb.s_x << "," << lb.s_y << "," << lb.d_term << "," << lb.u_term
            << "," << d.first << "," << d.second << "\n";
    }
}

std::pair<ModelBundle, TrainState> train_sr_cyclegan(const TrainConfig& cfg,
                                                     const TrainDataset& data) {
    TrainConfig c = cfg;
    c.variant = Variant::sr_cyclegan;
    Trainer t(c, data);
    t.run();
    return {t.bundle(), t.state()};
}

std::pair<ModelBundle, TrainState> train_sr_unit(const TrainConfig& cfg, const TrainDataset& data) {
    TrainConfig c = cfg;
    c.variant = Variant::sr_unit;
    Trainer t(c, data);
    t.run();
    return {t.bundle(), t.state()};
}

} // namespace mmsr
