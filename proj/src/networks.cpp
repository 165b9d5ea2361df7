#include "mmsr/networks.hpp"

#include <cmath>

namespace mmsr {

void SRGeneratorSpec::validate() const {
    if (in_channels != 1) throw ParamError("SR generator expects single-channel input");
    if (base_width < 1 || n_res_blocks < 1 || upscale_stages < 1)
        throw ParamError("invalid SR generator spec");
}

void DownGeneratorSpec::validate() const {
    if (in_channels != 1) throw ParamError("down generator expects single-channel input");
    if (base_width < 1 || downscale_stages < 1 || n_res_blocks < 1)
        throw ParamError("invalid down generator spec");
}

void DiscriminatorSpec::validate() const {
    if (in_channels != 1) throw ParamError("discriminator expects single-channel input");
    if (n_layers < 1 || base_width < 1) throw ParamError("invalid discriminator spec");
}

std::vector<ag::Var> Module::param_vars() const {
    std::vector<ag::Var> v;
    v.reserve(params_.size());
    for (const auto& p : params_) v.push_back(p.var);
    return v;
}

void Module::zero_grad() {
    for (auto& p : params_) p.var->zero_grad();
}

std::uint64_t Module::param_count() const {
    std::uint64_t n = 0;
    for (const auto& p : params_) n += static_cast<std::uint64_t>(p.var->value.size());
    return n;
}

double Module::param_checksum() const {
    double s = 0.0;
    std::uint64_t i = 1;
    for (const auto& p : params_)
        for (double v : p.var->value.data) s += v * static_cast<double>(i++ % 9973);
    return s;
}

ag::Var Module::add_param(const std::string& name, Tensor t) {
    auto v = ag::leaf(std::move(t), true);
    params_.push_back({name, v});
    return v;
}

namespace layers {

Conv2d::Conv2d(Module& m, const std::string& name, int cin, int cout, int k, int stride_,
               int pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
    Tensor wt({cout, cin, k, k});
    const double std_dev = std::sqrt(2.0 / (cin * k * k));
    for (auto& v : wt.data) v = rng.next_normal() * std_dev;
    w = m.add_param(name + ".w", std::move(wt));
    b = m.add_param(name + ".b", Tensor({cout}, 0.0));
}

InstanceNorm::InstanceNorm(Module& m, const std::string& name, int channels) {
    gamma = m.add_param(name + ".gamma", Tensor({channels}, 1.0));
    beta = m.add_param(name + ".beta", Tensor({channels}, 0.0));
}

ResBlock::ResBlock(Module& m, const std::string& name, int channels, Rng& rng)
    : c1(m, name + ".c1", channels, channels, 3, 1, 1, rng),
      c2(m, name + ".c2", channels, channels, 3, 1, 1, rng),
      n1(m, name + ".n1", channels),
      n2(m, name + ".n2", channels) {}

ag::Var ResBlock::operator()(const ag::Var& x) const {
    ag::Var h = ag::relu(n1(c1(x)));
    h = n2(c2(h));
    return ag::add(x, h);
}

Upscale2x::Upscale2x(Module& m, const std::string& name, int channels, Rng& rng)
    : conv(m, name + ".conv", channels, channels * 4, 3, 1, 1, rng) {}

ag::Var Upscale2x::operator()(const ag::Var& x) const {
    return ag::relu(ag::pixel_shuffle(conv(x), 2));
}

} // namespace layers

SRGenerator::SRGenerator(SRGeneratorSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(seed);
    const int w = spec_.base_width;
    head_ = layers::Conv2d(*this, "head", spec_.in_channels, w, 3, 1, 1, rng);
    for (int i = 0; i < spec_.n_res_blocks; ++i)
        blocks_.emplace_back(*this, "res" + std::to_string(i), w, rng);
    for (int i = 0; i < spec_.upscale_stages; ++i)
        ups_.emplace_back(*this, "up" + std::to_string(i), w, rng);
    tail_ = layers::Conv2d(*this, "tail", w, 1, 3, 1, 1, rng);
}

ag::Var SRGenerator::forward(const ag::Var& x) const {
    if (x->value.rank() != 3 || x->value.dim(0) != spec_.in_channels)
        throw ShapeError("SR generator expects {1,H,W}, got " + x->value.shape_str());
    ag::Var h = ag::relu(head_(x));
    ag::Var trunk = h;
    for (const auto& b : blocks_) trunk = b(trunk);
    h = ag::add(h, trunk);
    for (const auto& u : ups_) h = u(h);
    return ag::tanh(tail_(h));
}

Tensor SRGenerator::infer(const Tensor& x) const { return forward(ag::constant(x))->value; }

DownGenerator::DownGenerator(DownGeneratorSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(seed);
    const int w = spec_.base_width;
    head_ = layers::Conv2d(*this, "head", spec_.in_channels, w, 3, 1, 1, rng);
    for (int i = 0; i < spec_.downscale_stages; ++i) {
        downs_.emplace_back(*this, "down" + std::to_string(i), w, w, 3, 2, 1, rng);
        down_norms_.emplace_back(*this, "down_norm" + std::to_string(i), w);
    }
    for (int i = 0; i < spec_.n_res_blocks; ++i)
        blocks_.emplace_back(*this, "res" + std::to_string(i), w, rng);
    tail_ = layers::Conv2d(*this, "tail", w, 1, 3, 1, 1, rng);
}

ag::Var DownGenerator::forward(const ag::Var& x) const {
    if (x->value.rank() != 3 || x->value.dim(0) != spec_.in_channels)
        throw ShapeError("down generator expects {1,H,W}, got " + x->value.shape_str());
    const int s = spec_.scale();
    if (x->value.dim(1) % s != 0 || x->value.dim(2) % s != 0)
        throw ShapeError("down generator input dims must be divisible by " + std::to_string(s));
    ag::Var h = ag::relu(head_(x));
    for (size_t i = 0; i < downs_.size(); ++i) h = ag::relu(down_norms_[i](downs_[i](h)));
    for (const auto& b : blocks_) h = b(h);
    return ag::tanh(tail_(h));
}

Tensor DownGenerator::infer(const Tensor& x) const { return forward(ag::constant(x))->value; }

Discriminator::Discriminator(DiscriminatorSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(seed);
    int cin = spec_.in_channels;
    int cout = spec_.base_width;
    for (int i = 0; i < spec_.n_layers; ++i) {
        const int stride = i < spec_.n_layers - 1 ? 2 : 1;
        convs_.emplace_back(*this, "conv" + std::to_string(i), cin, cout, 4, stride, 1, rng);
        if (i > 0) norms_.emplace_back(*this, "norm" + std::to_string(i), cout);
        cin = cout;
        cout = std::min(cout * 2, spec_.base_width * 8);
    }
    final_ = layers::Conv2d(*this, "final", cin, 1, 4, 1, 1, rng);
}

ag::Var Discriminator::forward(const ag::Var& x) const {
    ag::Var h = x;
    for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i](h);
        if (i > 0) h = norms_[i - 1](h);
        h = ag::leaky_relu(h, 0.2);
    }
    return final_(h); // unbounded score grid
}

UnitPair::UnitPair(SRGeneratorSpec sr_spec, DownGeneratorSpec down_spec, std::uint64_t seed)
    : sr_spec_(sr_spec), down_spec_(down_spec) {
    sr_spec_.validate();
    down_spec_.validate();
    if (sr_spec_.upscale_stages != down_spec_.downscale_stages)
        throw ParamError("shared-latent pair needs matching up/down stage counts");
    if (sr_spec_.base_width != down_spec_.base_width)
        throw ParamError("shared-latent pair needs a common latent width");
    Rng rng(seed);
    const int w = sr_spec_.base_width;
    enc_lr_head_ = layers::Conv2d(*this, "enc_lr.head", 1, w, 3, 1, 1, rng);
    enc_lr_block_ = layers::ResBlock(*this, "enc_lr.res", w, rng);
    enc_hr_head_ = layers::Conv2d(*this, "enc_hr.head", 1, w, 3, 1, 1, rng);
    for (int i = 0; i < down_spec_.downscale_stages; ++i) {
        enc_hr_downs_.emplace_back(*this, "enc_hr.down" + std::to_string(i), w, w, 3, 2, 1, rng);
        enc_hr_norms_.emplace_back(*this, "enc_hr.norm" + std::to_string(i), w);
    }
    enc_hr_block_ = layers::ResBlock(*this, "enc_hr.res", w, rng);
    shared_ = layers::ResBlock(*this, "shared.res", w, rng);
    dec_lr_block_ = layers::ResBlock(*this, "dec_lr.res", w, rng);
    dec_lr_tail_ = layers::Conv2d(*this, "dec_lr.tail", w, 1, 3, 1, 1, rng);
    dec_hr_block_ = layers::ResBlock(*this, "dec_hr.res", w, rng);
    for (int i = 0; i < sr_spec_.upscale_stages; ++i)
        dec_hr_ups_.emplace_back(*this, "dec_hr.up" + std::to_string(i), w, rng);
    dec_hr_tail_ = layers::Conv2d(*this, "dec_hr.tail", w, 1, 3, 1, 1, rng);
}

ag::Var UnitPair::encode_lr(const ag::Var& x) const {
    return shared_(enc_lr_block_(ag::relu(enc_lr_head_(x))));
}

ag::Var UnitPair::encode_hr(const ag::Var& y) const {
    const int s = down_spec_.scale();
    if (y->value.dim(1) % s != 0 || y->value.dim(2) % s != 0)
        throw ShapeError("HR encoder input dims must be divisible by " + std::to_string(s));
    ag::Var h = ag::relu(enc_hr_head_(y));
    for (size_t i = 0; i < enc_hr_downs_.size(); ++i)
        h = ag::relu(enc_hr_norms_[i](enc_hr_downs_[i](h)));
    return shared_(enc_hr_block_(h));
}

ag::Var UnitPair::decode_lr(const ag::Var& z) const {
    return ag::tanh(dec_lr_tail_(dec_lr_block_(z)));
}

ag::Var UnitPair::decode_hr(const ag::Var& z) const {
    ag::Var h = dec_hr_block_(z);
    for (const auto& u : dec_hr_ups_) h = u(h);
    return ag::tanh(dec_hr_tail_(h));
}

Tensor UnitPair::infer_sr(const Tensor& x) const {
    return decode_hr(encode_lr(ag::constant(x)))->value;
}

Tensor UnitPair::infer_down(const Tensor& y) const {
    return decode_lr(encode_hr(ag::constant(y)))->value;
}

std::vector<std::string> UnitPair::latent_param_names() const {
    std::vector<std::string> out;
    for (const auto& p : params_)
        if (p.name.rfind("shared.", 0) == 0) out.push_back(p.name);
    return out;
}

std::string variant_name(Variant v) {
    return v == Variant::sr_cyclegan ? "sr-cyclegan" : "sr-unit";
}

Variant variant_from_name(const std::string& s) {
    if (s == "sr-cyclegan") return Variant::sr_cyclegan;
    if (s == "sr-unit") return Variant::sr_unit;
    throw ParamError("unknown variant: " + s);
}

Tensor ModelBundle::super_resolve(const Tensor& lr) const {
    return variant == Variant::sr_cyclegan ? g1->infer(lr) : unit->infer_sr(lr);
}

Tensor ModelBundle::downscale(const Tensor& hr) const {
    return variant == Variant::sr_cyclegan ? g2->infer(hr) : unit->infer_down(hr);
}

std::vector<Param> ModelBundle::generator_params() const {
    std::vector<Param> out;
    if (variant == Variant::sr_cyclegan) {
        for (const auto& p : g1->params()) out.push_back({"g1." + p.name, p.var});
        for (const auto& p : g2->params()) out.push_back({"g2." + p.name, p.var});
    } else {
        for (const auto& p : unit->params()) out.push_back({"unit." + p.name, p.var});
    }
    return out;
}

std::vector<Param> ModelBundle::all_params() const {
    std::vector<Param> out = generator_params();
    for (const auto& p : dx->params()) out.push_back({"dx." + p.name, p.var});
    for (const auto& p : dy->params()) out.push_back({"dy." + p.name, p.var});
    return out;
}

ModelBundle build_bundle(Variant variant, const SRGeneratorSpec& g1_spec,
                         const DownGeneratorSpec& g2_spec, const DiscriminatorSpec& dx_spec,
                         const DiscriminatorSpec& dy_spec, std::uint64_t seed) {
    ModelBundle b;
    b.variant = variant;
    b.g1_spec = g1_spec;
    b.g2_spec = g2_spec;
    b.dx_spec = dx_spec;
    b.dy_spec = dy_spec;
    Rng seeds(seed);
    const std::uint64_t s1 = seeds.next_u64(), s2 = seeds.next_u64();
    const std::uint64_t s3 = seeds.next_u64(), s4 = seeds.next_u64();
    if (variant == Variant::sr_cyclegan) {
        b.g1 = std::make_shared<SRGenerator>(g1_spec, s1);
        b.g2 = std::make_shared<DownGenerator>(g2_spec, s2);
    } else {
        b.unit = std::make_shared<UnitPair>(g1_spec, g2_spec, s1);
    }
    b.dx = std::make_shared<Discriminator>(dx_spec, s3);
    b.dy = std::make_shared<Discriminator>(dy_spec, s4);
    return b;
}

} // namespace mmsr
