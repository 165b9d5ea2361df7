#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmsr/checkpoint.hpp"
#include "mmsr/loss.hpp"
#include "mmsr/networks.hpp"
#include "mmsr/patches.hpp"

namespace mmsr {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 1;
    double lr = 2e-4;
    double beta1 = 0.5, beta2 = 0.999;
    LossWeights weights;
    SSIMParams ssim;
    SsimForm ssim_form = SsimForm::as_trained;
    int pool_size = 50;
    std::uint64_t seed = 0;
    Variant variant = Variant::sr_cyclegan;
    // 0: one nominal pass over the smaller domain
    int iterations_per_epoch = 0;
    int checkpoint_every = 0; // epochs; 0 = final save only
    double unit_latent_weight = 0.1;
    double unit_recon_weight = 10.0;
    SRGeneratorSpec g1;
    DownGeneratorSpec g2;
    DiscriminatorSpec dx, dy;
    void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

struct TrainDataset {
    std::vector<ImagePatch> clinical; // LR domain
    std::vector<ImagePatch> micro;    // HR domain
};

TrainDataset dataset_from_patches(const std::vector<PatchSample>& clinical,
                                  const std::vector<PatchSample>& micro);

// Adversarial training of either variant with the four-term SR loss on
// top of the base translation objective. One training step is a single
// logical sequence; all randomness comes from one seeded integer stream.
class Trainer {
public:
    Trainer(TrainConfig cfg, TrainDataset data);
    // resumes training state, optimizer moments, replay pools and RNG
    Trainer(const std::string& checkpoint_path, TrainDataset data);

    void run(); // up to cfg.epochs, honoring checkpoint_every
    void run_iterations(int n);

    void save(const std::string& path) const;
    void write_loss_csv(const std::string& path) const;

    const ModelBundle& bundle() const { return bundle_; }
    const TrainState& state() const { return state_; }
    const TrainConfig& config() const { return cfg_; }
    void set_checkpoint_dir(const std::string& dir) { checkpoint_dir_ = dir; }

    int iterations_per_epoch() const { return iters_per_epoch_; }
    double current_lr_scale() const;

private:
    void step();
    void step_cyclegan(LossBreakdown& lb, double& d_x_loss, double& d_y_loss);
    void step_unit(LossBreakdown& lb, double& d_x_loss, double& d_y_loss);
    Tensor pool_query(std::vector<Tensor>& pool, const Tensor& fake);
    void zero_all_grads();
    double checked(const ag::Var& v, const char* term) const;

    TrainConfig cfg_;
    TrainDataset data_;
    ModelBundle bundle_;
    TrainState state_;
    Adam opt_g_, opt_d_;
    Rng rng_;
    std::vector<Tensor> pool_x_, pool_y_; // replayed y_lr / x_sr fakes
    int iters_per_epoch_ = 1;
    std::string checkpoint_dir_;
};

// convenience wrappers over Trainer
std::pair<ModelBundle, TrainState> train_sr_cyclegan(const TrainConfig& cfg,
                                                     const TrainDataset& data);
std::pair<ModelBundle, TrainState> train_sr_unit(const TrainConfig& cfg, const TrainDataset& data);

} // namespace mmsr
