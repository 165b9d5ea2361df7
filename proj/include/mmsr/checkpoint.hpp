#pragma once

#include <string>
#include <vector>

#include "mmsr/loss.hpp"
#include "mmsr/networks.hpp"

namespace mmsr {

struct TrainState {
    int iteration = 0;
    int epoch = 0;
    std::vector<LossBreakdown> loss_history;
    std::vector<std::pair<double, double>> disc_history; // (d_x_loss, d_y_loss)
    std::uint64_t rng_state = 0;
};

struct AdamParams {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment descent over a fixed parameter group.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<ag::Var> params, AdamParams hp);
    void step(double lr_scale = 1.0);
    void zero_grad();

    int t = 0;
    std::vector<Tensor> m, v;
    AdamParams hp;
    std::vector<ag::Var> params;
};

// Optional training internals stored alongside the bundle so a resumed
// run reproduces the uninterrupted trajectory.
struct CheckpointExtras {
    const Adam* opt_g = nullptr;
    const Adam* opt_d = nullptr;
    const std::vector<Tensor>* pool_x = nullptr;
    const std::vector<Tensor>* pool_y = nullptr;
    std::string config_json;
};

struct LoadedCheckpoint {
    ModelBundle bundle;
    TrainState state;
    bool has_opt = false;
    int opt_g_t = 0, opt_d_t = 0;
    std::vector<Tensor> opt_g_m, opt_g_v, opt_d_m, opt_d_v;
    std::vector<Tensor> pool_x, pool_y;
    std::string config_json;
};

// Single versioned archive ("MMSR-CKPT-v1"): variant tag, specs, all
// parameter tensors bit-exactly, iteration counter and optional
// optimizer/pool state. Written atomically (temp + rename).
void save_checkpoint(const ModelBundle& bundle, const TrainState& state, const std::string& path,
                     const CheckpointExtras* extras = nullptr);
LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace mmsr
