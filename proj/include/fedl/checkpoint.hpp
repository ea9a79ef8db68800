#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedl/network.hpp"
#include "fedl/trainer.hpp"

namespace fedl {

struct checkpoint_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t checkpoint_version = 1;
inline constexpr char checkpoint_magic[8] = {'F', 'E', 'D', 'L', 'C', 'K', 'P', 'T'};

// Versioned container: 8-byte magic, u32 version, u64 JSON-header length,
// the JSON header, then all tensors as raw little-endian 64-bit reals in
// header-manifest order. A stored probe batch makes roundtrips verifiable:
// loading recomputes the forward pass and demands bit-identical outputs.
struct checkpoint {
    network_config net_config;
    train_config train_cfg;
    network_params params;
    adam_state optimizer;
    int best_epoch = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> probe_inputs;
    std::vector<fd_params> probe_outputs;
};

namespace detail {

inline nlohmann::json net_config_to_json(const network_config& c) {
    return {{"input_dim", c.input_dim},   {"hidden_dims", c.hidden_dims},
            {"k", c.k},                   {"head_hidden_dims", c.head_hidden_dims},
            {"power_iterations", c.power_iterations},
            {"ablation", to_string(c.ablation)},
            {"alpha_logit_clamp", c.alpha_logit_clamp},
            {"tau_floor", c.tau_floor}};
}

inline network_config net_config_from_json(const nlohmann::json& j) {
    network_config c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    c.k = j.at("k").get<std::size_t>();
    c.head_hidden_dims = j.at("head_hidden_dims").get<std::vector<std::size_t>>();
    c.power_iterations = j.at("power_iterations").get<int>();
    c.ablation = ablation_from_string(j.at("ablation").get<std::string>());
    c.alpha_logit_clamp = j.at("alpha_logit_clamp").get<double>();
    c.tau_floor = j.at("tau_floor").get<double>();
    return c;
}

inline nlohmann::json train_config_to_json(const train_config& c) {
    return {{"max_epochs", c.max_epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"lr_step_size", c.lr_step_size},
            {"lr_gamma", c.lr_gamma},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"early_stop_patience", c.early_stop_patience},
            {"seed", c.seed},
            {"val_fraction", c.val_fraction}};
}

inline train_config train_config_from_json(const nlohmann::json& j) {
    train_config c;
    c.max_epochs = j.at("max_epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.lr_step_size = j.at("lr_step_size").get<int>();
    c.lr_gamma = j.at("lr_gamma").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.early_stop_patience = j.at("early_stop_patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.val_fraction = j.at("val_fraction").get<double>();
    return c;
}

inline void write_f64_le(std::ostream& out, const std::vector<double>& v) {
    for (double x : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        unsigned char buf[8];
        for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
        out.write(reinterpret_cast<const char*>(buf), 8);
    }
}

inline void read_f64_le(std::istream& in, std::vector<double>& v) {
    for (double& x : v) {
        unsigned char buf[8];
        if (!in.read(reinterpret_cast<char*>(buf), 8))
            throw checkpoint_error("checkpoint: truncated tensor payload");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
        std::memcpy(&x, &bits, 8);
    }
}

// Tensor manifest order: parameter tensors, then power-iteration vectors,
// then optimizer moments, then the probe batch.
template <class Fn>
void visit_checkpoint_tensors(checkpoint& c, Fn&& fn) {
    detail::visit_tensors(c.params, fn);
    for (auto& s : c.params.sn_feature) {
        fn(s.u);
        fn(s.v);
    }
    fn(c.params.sn_alpha.u);
    fn(c.params.sn_alpha.v);
    for (auto& m : c.optimizer.m) fn(m);
    for (auto& v : c.optimizer.v) fn(v);
    for (auto& row : c.probe_inputs) fn(row);
    for (auto& fd : c.probe_outputs) {
        fn(fd.alpha);
        fn(fd.p);
    }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const checkpoint& ckpt) {
    checkpoint copy = ckpt;
    nlohmann::json header;
    header["net_config"] = detail::net_config_to_json(copy.net_config);
    header["train_config"] = detail::train_config_to_json(copy.train_cfg);
    header["best_epoch"] = copy.best_epoch;
    header["seed"] = copy.seed;
    header["adam_step"] = copy.optimizer.step;
    header["n_probe"] = copy.probe_inputs.size();
    header["probe_dim"] = copy.probe_inputs.empty() ? 0 : copy.probe_inputs[0].size();
    std::vector<double> probe_tau;
    for (const auto& fd : copy.probe_outputs) probe_tau.push_back(fd.tau);
    header["probe_tau"] = probe_tau;

    std::vector<std::size_t> manifest;
    detail::visit_checkpoint_tensors(copy, [&](std::vector<double>& t) {
        manifest.push_back(t.size());
    });
    header["tensor_sizes"] = manifest;

    const std::string head = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw checkpoint_error("checkpoint: cannot write " + path);
    out.write(checkpoint_magic, 8);
    const std::uint32_t ver = checkpoint_version;
    out.write(reinterpret_cast<const char*>(&ver), 4);
    const std::uint64_t len = head.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    detail::visit_checkpoint_tensors(copy, [&](std::vector<double>& t) {
        detail::write_f64_le(out, t);
    });
    if (!out) throw checkpoint_error("checkpoint: write failed for " + path);
}

inline checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw checkpoint_error("checkpoint: cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, checkpoint_magic, 8) != 0)
        throw checkpoint_error("checkpoint: bad magic");
    std::uint32_t ver = 0;
    if (!in.read(reinterpret_cast<char*>(&ver), 4))
        throw checkpoint_error("checkpoint: truncated version");
    if (ver != checkpoint_version)
        throw checkpoint_error("checkpoint: unsupported format version " + std::to_string(ver));
    std::uint64_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), 8))
        throw checkpoint_error("checkpoint: truncated header length");
    std::string head(len, '\0');
    if (!in.read(head.data(), static_cast<std::streamsize>(len)))
        throw checkpoint_error("checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception&) {
        throw checkpoint_error("checkpoint: corrupt header");
    }

    checkpoint ckpt;
    ckpt.net_config = detail::net_config_from_json(header.at("net_config"));
    ckpt.train_cfg = detail::train_config_from_json(header.at("train_config"));
    ckpt.best_epoch = header.at("best_epoch").get<int>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();

    // rebuild shapes, then overwrite with the payload
    ckpt.params = init_params(ckpt.net_config, 0);
    ckpt.optimizer = make_adam_state(ckpt.params);
    ckpt.optimizer.step = header.at("adam_step").get<long>();
    const std::size_t n_probe = header.at("n_probe").get<std::size_t>();
    const std::size_t probe_dim = header.at("probe_dim").get<std::size_t>();
    ckpt.probe_inputs.assign(n_probe, std::vector<double>(probe_dim, 0.0));
    const auto probe_tau = header.at("probe_tau").get<std::vector<double>>();
    ckpt.probe_outputs.resize(n_probe);
    for (std::size_t i = 0; i < n_probe; ++i) {
        ckpt.probe_outputs[i].alpha.assign(ckpt.net_config.k, 1.0);
        ckpt.probe_outputs[i].p.assign(ckpt.net_config.k, 1.0 / ckpt.net_config.k);
        ckpt.probe_outputs[i].tau = probe_tau.at(i);
    }

    const auto manifest = header.at("tensor_sizes").get<std::vector<std::size_t>>();
    std::size_t slot = 0;
    detail::visit_checkpoint_tensors(ckpt, [&](std::vector<double>& t) {
        if (slot >= manifest.size() || manifest[slot] != t.size())
            throw checkpoint_error("checkpoint: tensor manifest mismatch");
        detail::read_f64_le(in, t);
        ++slot;
    });
    if (slot != manifest.size())
        throw checkpoint_error("checkpoint: tensor manifest mismatch");

    // probe verification: recomputed forward outputs must match bit-exactly
    if (n_probe > 0) {
        const auto fds = forward(ckpt.params, ckpt.net_config, ckpt.probe_inputs, nullptr);
        for (std::size_t i = 0; i < n_probe; ++i) {
            if (fds[i].alpha != ckpt.probe_outputs[i].alpha ||
                fds[i].p != ckpt.probe_outputs[i].p || fds[i].tau != ckpt.probe_outputs[i].tau)
                throw checkpoint_error("checkpoint: probe batch mismatch (corrupt payload)");
        }
    }
    return ckpt;
}

// Convenience constructor: snapshot a trained model plus a deterministic
// probe batch derived from the seed.
inline checkpoint make_checkpoint(const network_config& net, const train_config& tc,
                                  const train_result& result) {
    checkpoint ckpt;
    ckpt.net_config = net;
    ckpt.train_cfg = tc;
    ckpt.params = result.params;
    ckpt.optimizer = result.optimizer;
    ckpt.best_epoch = result.history.best_epoch;
    ckpt.seed = tc.seed;
    rng gen(tc.seed ^ 0x9a0beULL);
    ckpt.probe_inputs.assign(4, std::vector<double>(net.input_dim, 0.0));
    for (auto& row : ckpt.probe_inputs)
        for (double& x : row) x = gen.normal();
    ckpt.probe_outputs = forward(ckpt.params, net, ckpt.probe_inputs, nullptr);
    return ckpt;
}

}  // namespace fedl
