#include "mmsr/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mmsr {

Adam::Adam(std::vector<ag::Var> params_, AdamParams hp_) : hp(hp_), params(std::move(params_)) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p->value.shape);
        v.emplace_back(p->value.shape);
    }
}

void Adam::step(double lr_scale) {
    ++t;
    const double bc1 = 1.0 - std::pow(hp.beta1, t);
    const double bc2 = 1.0 - std::pow(hp.beta2, t);
    const double lr_t = hp.lr * lr_scale;
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->value;
        const bool has_g = params[i]->has_grad();
        for (int k = 0; k < p.size(); ++k) {
            const double g = has_g ? params[i]->grad[k] : 0.0;
            m[i][k] = hp.beta1 * m[i][k] + (1.0 - hp.beta1) * g;
            v[i][k] = hp.beta2 * v[i][k] + (1.0 - hp.beta2) * g * g;
            const double mhat = m[i][k] / bc1;
            const double vhat = v[i][k] / bc2;
            p[k] -= lr_t * mhat / (std::sqrt(vhat) + hp.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params) p->zero_grad();
}

namespace {

constexpr char kMagic[] = "MMSR-CKPT-v1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

nlohmann::json spec_json(const SRGeneratorSpec& s) {
    return {{"in_channels", s.in_channels},
            {"base_width", s.base_width},
            {"n_res_blocks", s.n_res_blocks},
            {"upscale_stages", s.upscale_stages}};
}
nlohmann::json spec_json(const DownGeneratorSpec& s) {
    return {{"in_channels", s.in_channels},
            {"base_width", s.base_width},
            {"downscale_stages", s.downscale_stages},
            {"n_res_blocks", s.n_res_blocks}};
}
nlohmann::json spec_json(const DiscriminatorSpec& s) {
    return {{"in_channels", s.in_channels}, {"n_layers", s.n_layers}, {"base_width", s.base_width}};
}
SRGeneratorSpec sr_spec_from(const nlohmann::json& j) {
    SRGeneratorSpec s;
    s.in_channels = j.at("in_channels").get<int>();
    s.base_width = j.at("base_width").get<int>();
    s.n_res_blocks = j.at("n_res_blocks").get<int>();
    s.upscale_stages = j.at("upscale_stages").get<int>();
    return s;
}
DownGeneratorSpec down_spec_from(const nlohmann::json& j) {
    DownGeneratorSpec s;
    s.in_channels = j.at("in_channels").get<int>();
    s.base_width = j.at("base_width").get<int>();
    s.downscale_stages = j.at("downscale_stages").get<int>();
    s.n_res_blocks = j.at("n_res_blocks").get<int>();
    return s;
}
DiscriminatorSpec disc_spec_from(const nlohmann::json& j) {
    DiscriminatorSpec s;
    s.in_channels = j.at("in_channels").get<int>();
    s.n_layers = j.at("n_layers").get<int>();
    s.base_width = j.at("base_width").get<int>();
    return s;
}

void write_doubles(std::ofstream& out, const std::vector<double>& d) {
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& d) {
    in.read(reinterpret_cast<char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != d.size() * sizeof(double))
        throw CheckpointError("truncated checkpoint payload");
}

nlohmann::json shapes_json(const std::vector<Tensor>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) arr.push_back(t.shape);
    return arr;
}

} // namespace

void save_checkpoint(const ModelBundle& bundle, const TrainState& state, const std::string& path,
                     const CheckpointExtras* extras) {
    nlohmann::json h;
    h["variant"] = variant_name(bundle.variant);
    h["g1_spec"] = spec_json(bundle.g1_spec);
    h["g2_spec"] = spec_json(bundle.g2_spec);
    h["dx_spec"] = spec_json(bundle.dx_spec);
    h["dy_spec"] = spec_json(bundle.dy_spec);
    h["iteration"] = state.iteration;
    h["epoch"] = state.epoch;
    h["rng_state"] = state.rng_state;
    h["history_len"] = state.loss_history.size();
    h["disc_history_len"] = state.disc_history.size();
    const auto params = bundle.all_params();
    auto& plist = h["params"] = nlohmann::json::array();
    for (const auto& p : params) plist.push_back({{"name", p.name}, {"shape", p.var->value.shape}});
    h["has_opt"] = extras && extras->opt_g && extras->opt_d;
    if (h["has_opt"].get<bool>()) {
        h["opt_g_t"] = extras->opt_g->t;
        h["opt_d_t"] = extras->opt_d->t;
        h["n_gen_params"] = extras->opt_g->params.size();
        h["n_disc_params"] = extras->opt_d->params.size();
    }
    if (extras && extras->pool_x) h["pool_x"] = shapes_json(*extras->pool_x);
    if (extras && extras->pool_y) h["pool_y"] = shapes_json(*extras->pool_y);
    if (extras && !extras->config_json.empty())
        h["config"] = nlohmann::json::parse(extras->config_json);
    const std::string header = h.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
        const std::uint64_t hlen = header.size();
        out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        for (const auto& p : params) write_doubles(out, p.var->value.data);
        for (const auto& lb : state.loss_history)
            write_doubles(out, {lb.total, lb.orig, lb.s_x, lb.s_y, lb.d_term, lb.u_term});
        for (const auto& d : state.disc_history) write_doubles(out, {d.first, d.second});
        if (h["has_opt"].get<bool>()) {
            for (const auto& t : extras->opt_g->m) write_doubles(out, t.data);
            for (const auto& t : extras->opt_g->v) write_doubles(out, t.data);
            for (const auto& t : extras->opt_d->m) write_doubles(out, t.data);
            for (const auto& t : extras->opt_d->v) write_doubles(out, t.data);
        }
        if (extras && extras->pool_x)
            for (const auto& t : *extras->pool_x) write_doubles(out, t.data);
        if (extras && extras->pool_y)
            for (const auto& t : *extras->pool_y) write_doubles(out, t.data);
        if (!out) throw IoError("checkpoint write failed");
    }
    std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    char magic[kMagicLen];
    in.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (static_cast<size_t>(in.gcount()) != kMagicLen ||
        std::string(magic, kMagicLen) != std::string(kMagic, kMagicLen))
        throw CheckpointError("bad magic / version mismatch in " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (static_cast<size_t>(in.gcount()) != sizeof(hlen)) throw CheckpointError("truncated header");
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (static_cast<std::uint64_t>(in.gcount()) != hlen) throw CheckpointError("truncated header");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("bad header json: ") + e.what());
    }

    LoadedCheckpoint lc;
    try {
        lc.bundle = build_bundle(variant_from_name(h.at("variant").get<std::string>()),
                                 sr_spec_from(h.at("g1_spec")), down_spec_from(h.at("g2_spec")),
                                 disc_spec_from(h.at("dx_spec")), disc_spec_from(h.at("dy_spec")), 0);
        lc.state.iteration = h.at("iteration").get<int>();
        lc.state.epoch = h.at("epoch").get<int>();
        lc.state.rng_state = h.at("rng_state").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad header fields: ") + e.what());
    }

    const auto params = lc.bundle.all_params();
    const auto& plist = h.at("params");
    if (plist.size() != params.size()) throw CheckpointError("parameter list mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (plist[i].at("name").get<std::string>() != params[i].name ||
            plist[i].at("shape").get<std::vector<int>>() != params[i].var->value.shape)
            throw CheckpointError("parameter layout mismatch at " + params[i].name);
        read_doubles(in, params[i].var->value.data);
    }
    const size_t hist_len = h.value("history_len", size_t{0});
    lc.state.loss_history.resize(hist_len);
    for (auto& lb : lc.state.loss_history) {
        std::vector<double> row(6);
        read_doubles(in, row);
        lb = {row[0], row[1], row[2], row[3], row[4], row[5]};
    }
    const size_t dlen = h.value("disc_history_len", size_t{0});
    lc.state.disc_history.resize(dlen);
    for (auto& d : lc.state.disc_history) {
        std::vector<double> row(2);
        read_doubles(in, row);
        d = {row[0], row[1]};
    }
    lc.has_opt = h.value("has_opt", false);
    if (lc.has_opt) {
        lc.opt_g_t = h.at("opt_g_t").get<int>();
        lc.opt_d_t = h.at("opt_d_t").get<int>();
        const size_t ng = h.at("n_gen_params").get<size_t>();
        const size_t nd = h.at("n_disc_params").get<size_t>();
        if (ng + nd != params.size()) throw CheckpointError("optimizer group size mismatch");
        auto read_group = [&](size_t offset, size_t count, std::vector<Tensor>& dst) {
            for (size_t i = 0; i < count; ++i) {
                dst.emplace_back(params[offset + i].var->value.shape);
                read_doubles(in, dst.back().data);
            }
        };
        read_group(0, ng, lc.opt_g_m);
        read_group(0, ng, lc.opt_g_v);
        read_group(ng, nd, lc.opt_d_m);
        read_group(ng, nd, lc.opt_d_v);
    }
    auto read_pool = [&](const char* key, std::vector<Tensor>& dst) {
        if (!h.contains(key)) return;
        for (const auto& shape : h.at(key)) {
            dst.emplace_back(shape.get<std::vector<int>>());
            read_doubles(in, dst.back().data);
        }
    };
    read_pool("pool_x", lc.pool_x);
    read_pool("pool_y", lc.pool_y);
    if (h.contains("config")) lc.config_json = h.at("config").dump();
    return lc;
}

} // namespace mmsr
