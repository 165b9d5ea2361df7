#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mmsr/autograd.hpp"
#include "mmsr/tensor.hpp"

namespace mmsr {

struct SRGeneratorSpec {
    int in_channels = 1;
    int base_width = 64;
    int n_res_blocks = 6;
    int upscale_stages = 3; // each stage doubles resolution
    int scale() const { return 1 << upscale_stages; }
    void validate() const;
};

struct DownGeneratorSpec {
    int in_channels = 1;
    int base_width = 64;
    int downscale_stages = 3; // each stage halves resolution
    int n_res_blocks = 3;
    int scale() const { return 1 << downscale_stages; }
    void validate() const;
};

struct DiscriminatorSpec {
    int in_channels = 1;
    int n_layers = 4;
    int base_width = 64;
    void validate() const;
};

struct Param {
    std::string name;
    ag::Var var;
};

// Base for anything with trainable parameters. Parameter order is the
// registration order, which checkpointing relies on.
class Module {
public:
    virtual ~Module() = default;
    const std::vector<Param>& params() const { return params_; }
    std::vector<ag::Var> param_vars() const;
    void zero_grad();
    std::uint64_t param_count() const;
    // order-sensitive checksum of parameter values
    double param_checksum() const;

    ag::Var add_param(const std::string& name, Tensor t);

protected:
    std::vector<Param> params_;
};

namespace layers {

struct Conv2d {
    ag::Var w, b;
    int stride = 1, pad = 1;
    Conv2d() = default;
    Conv2d(Module& m, const std::string& name, int cin, int cout, int k, int stride, int pad,
           Rng& rng);
    ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

struct InstanceNorm {
    ag::Var gamma, beta;
    InstanceNorm() = default;
    InstanceNorm(Module& m, const std::string& name, int channels);
    ag::Var operator()(const ag::Var& x) const { return ag::instance_norm(x, gamma, beta); }
};

struct ResBlock {
    Conv2d c1, c2;
    InstanceNorm n1, n2;
    ResBlock() = default;
    ResBlock(Module& m, const std::string& name, int channels, Rng& rng);
    ag::Var operator()(const ag::Var& x) const;
};

// conv to 4x channels followed by 2x pixel rearrangement
struct Upscale2x {
    Conv2d conv;
    Upscale2x() = default;
    Upscale2x(Module& m, const std::string& name, int channels, Rng& rng);
    ag::Var operator()(const ag::Var& x) const;
};

} // namespace layers

// 8x SR generator: head conv, residual trunk, pixel-rearrangement
// upscaling stages, bounded tail.
class SRGenerator : public Module {
public:
    SRGenerator(SRGeneratorSpec spec, std::uint64_t seed);
    const SRGeneratorSpec& spec() const { return spec_; }
    ag::Var forward(const ag::Var& x) const;
    Tensor infer(const Tensor& x) const;

private:
    SRGeneratorSpec spec_;
    layers::Conv2d head_, tail_;
    std::vector<layers::ResBlock> blocks_;
    std::vector<layers::Upscale2x> ups_;
};

// 1/8 generator: strided halving stages then residual trunk.
class DownGenerator : public Module {
public:
    DownGenerator(DownGeneratorSpec spec, std::uint64_t seed);
    const DownGeneratorSpec& spec() const { return spec_; }
    ag::Var forward(const ag::Var& x) const;
    Tensor infer(const Tensor& x) const;

private:
    DownGeneratorSpec spec_;
    layers::Conv2d head_, tail_;
    std::vector<layers::Conv2d> downs_;
    std::vector<layers::InstanceNorm> down_norms_;
    std::vector<layers::ResBlock> blocks_;
};

// Patch discriminator emitting a 2D grid of realness scores.
class Discriminator : public Module {
public:
    Discriminator(DiscriminatorSpec spec, std::uint64_t seed);
    const DiscriminatorSpec& spec() const { return spec_; }
    ag::Var forward(const ag::Var& x) const;

private:
    DiscriminatorSpec spec_;
    std::vector<layers::Conv2d> convs_;
    std::vector<layers::InstanceNorm> norms_;
    layers::Conv2d final_;
};

// Shared-latent encoder/decoder pair. Both encoders emit equal-shape
// latent grids; the cross-domain LR -> latent -> HR path realizes 8x SR.
class UnitPair : public Module {
public:
    UnitPair(SRGeneratorSpec sr_spec, DownGeneratorSpec down_spec, std::uint64_t seed);
    const SRGeneratorSpec& sr_spec() const { return sr_spec_; }
    const DownGeneratorSpec& down_spec() const { return down_spec_; }

    ag::Var encode_lr(const ag::Var& x) const;  // {1,h,w} -> {W,h,w}
    ag::Var encode_hr(const ag::Var& y) const;  // {1,8h,8w} -> {W,h,w}
    ag::Var decode_lr(const ag::Var& z) const;  // {W,h,w} -> {1,h,w}
    ag::Var decode_hr(const ag::Var& z) const;  // {W,h,w} -> {1,8h,8w}

    Tensor infer_sr(const Tensor& x) const;     // decode_hr(encode_lr(x))
    Tensor infer_down(const Tensor& y) const;

    // parameters of the weight-shared latent block
    std::vector<std::string> latent_param_names() const;

private:
    SRGeneratorSpec sr_spec_;
    DownGeneratorSpec down_spec_;
    layers::Conv2d enc_lr_head_, enc_hr_head_;
    std::vector<layers::Conv2d> enc_hr_downs_;
    std::vector<layers::InstanceNorm> enc_hr_norms_;
    layers::ResBlock enc_lr_block_, enc_hr_block_;
    layers::ResBlock shared_;
    layers::ResBlock dec_lr_block_, dec_hr_block_;
    std::vector<layers::Upscale2x> dec_hr_ups_;
    layers::Conv2d dec_lr_tail_, dec_hr_tail_;
};

enum class Variant { sr_cyclegan, sr_unit };
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);

// The trained artifact: generators, discriminators, and for the UNIT
// variant the shared-latent pair standing in for G1/G2.
struct ModelBundle {
    Variant variant = Variant::sr_cyclegan;
    SRGeneratorSpec g1_spec;
    DownGeneratorSpec g2_spec;
    DiscriminatorSpec dx_spec, dy_spec;
    std::shared_ptr<SRGenerator> g1;
    std::shared_ptr<DownGenerator> g2;
    std::shared_ptr<UnitPair> unit;
    std::shared_ptr<Discriminator> dx, dy;

    Tensor super_resolve(const Tensor& lr) const;
    Tensor downscale(const Tensor& hr) const;
    std::vector<Param> generator_params() const;
    std::vector<Param> all_params() const;
};

ModelBundle build_bundle(Variant variant, const SRGeneratorSpec& g1_spec,
                         const DownGeneratorSpec& g2_spec, const DiscriminatorSpec& dx_spec,
                         const DiscriminatorSpec& dy_spec, std::uint64_t seed);

} // namespace mmsr
