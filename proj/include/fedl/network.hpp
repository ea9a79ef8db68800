#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedl/fd.hpp"
#include "fedl/math.hpp"
#include "fedl/objective.hpp"
#include "fedl/random.hpp"

namespace fedl {

struct matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    matrix() = default;
    matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct dense_layer {
    matrix w;
    std::vector<double> b;
};

enum class ablation_mode { none, fix_p_uniform, fix_p_normalized, fix_tau };

inline const char* to_string(ablation_mode m) {
    switch (m) {
        case ablation_mode::none: return "none";
        case ablation_mode::fix_p_uniform: return "fix_p_uniform";
        case ablation_mode::fix_p_normalized: return "fix_p_normalized";
        case ablation_mode::fix_tau: return "fix_tau";
    }
    return "none";
}

inline ablation_mode ablation_from_string(const std::string& s) {
    if (s == "none") return ablation_mode::none;
    if (s == "fix_p_uniform") return ablation_mode::fix_p_uniform;
    if (s == "fix_p_normalized") return ablation_mode::fix_p_normalized;
    if (s == "fix_tau") return ablation_mode::fix_tau;
    throw std::invalid_argument("unknown ablation mode: " + s);
}

// Feature extractor f (ReLU MLP over hidden_dims), a single affine head for
// the concentration logits, and shallow ReLU MLP heads for the allocation
// logits and the dispersion logit. Spectral normalization applies to the
// extractor and the concentration head.
struct network_config {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_dims = {16, 16};
    std::size_t k = 2;
    std::vector<std::size_t> head_hidden_dims = {};
    int power_iterations = 1;
    ablation_mode ablation = ablation_mode::none;
    double alpha_logit_clamp = 30.0;
    double tau_floor = 1e-6;

    std::size_t feature_dim() const { return hidden_dims.empty() ? input_dim : hidden_dims.back(); }

    void validate() const {
        if (k < 2) throw std::invalid_argument("network_config: K must be >= 2");
        if (input_dim < 1) throw std::invalid_argument("network_config: input_dim must be >= 1");
        if (hidden_dims.empty())
            throw std::invalid_argument("network_config: at least one hidden layer required");
        for (auto d : hidden_dims)
            if (d < 1) throw std::invalid_argument("network_config: hidden dims must be positive");
        for (auto d : head_hidden_dims)
            if (d < 1) throw std::invalid_argument("network_config: head dims must be positive");
        if (power_iterations < 1)
            throw std::invalid_argument("network_config: power_iterations must be >= 1");
    }
};

// Warm-started power-iteration state for one normalized weight matrix.
struct sn_state {
    std::vector<double> u;  // left singular-vector estimate (rows)
    std::vector<double> v;  // right singular-vector estimate (cols)
};

struct network_params {
    std::vector<dense_layer> feature;
    dense_layer alpha_head;
    std::vector<dense_layer> p_head;
    std::vector<dense_layer> tau_head;
    std::vector<sn_state> sn_feature;
    sn_state sn_alpha;
};

// Gradients share the layer layout of network_params.
struct network_grads {
    std::vector<dense_layer> feature;
    dense_layer alpha_head;
    std::vector<dense_layer> p_head;
    std::vector<dense_layer> tau_head;
};

namespace detail {

inline dense_layer zeros_like(const dense_layer& l) {
    dense_layer z;
    z.w = matrix(l.w.rows, l.w.cols);
    z.b.assign(l.b.size(), 0.0);
    return z;
}

template <class Params, class Fn>
void visit_tensors(Params& p, Fn&& fn) {
    for (auto& l : p.feature) {
        fn(l.w.data);
        fn(l.b);
    }
    fn(p.alpha_head.w.data);
    fn(p.alpha_head.b);
    for (auto& l : p.p_head) {
        fn(l.w.data);
        fn(l.b);
    }
    for (auto& l : p.tau_head) {
        fn(l.w.data);
        fn(l.b);
    }
}

inline void affine(const dense_layer& l, std::span<const double> x, std::vector<double>& y) {
    y.assign(l.w.rows, 0.0);
    for (std::size_t i = 0; i < l.w.rows; ++i) {
        double s = l.b[i];
        const double* row = l.w.data.data() + i * l.w.cols;
        for (std::size_t j = 0; j < l.w.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

// Accumulates dW, db for one affine layer and returns dL/dx.
inline std::vector<double> affine_backward(const dense_layer& l, dense_layer& grad,
                                           std::span<const double> x,
                                           std::span<const double> dy) {
    std::vector<double> dx(l.w.cols, 0.0);
    for (std::size_t i = 0; i < l.w.rows; ++i) {
        grad.b[i] += dy[i];
        const double* row = l.w.data.data() + i * l.w.cols;
        double* grow = grad.w.data.data() + i * l.w.cols;
        for (std::size_t j = 0; j < l.w.cols; ++j) {
            grow[j] += dy[i] * x[j];
            dx[j] += dy[i] * row[j];
        }
    }
    return dx;
}

inline double unit_normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& x : v) x /= n;
    return n;
}

}  // namespace detail

inline network_grads zero_grads(const network_params& p) {
    network_grads g;
    g.feature.reserve(p.feature.size());
    for (const auto& l : p.feature) g.feature.push_back(detail::zeros_like(l));
    g.alpha_head = detail::zeros_like(p.alpha_head);
    for (const auto& l : p.p_head) g.p_head.push_back(detail::zeros_like(l));
    for (const auto& l : p.tau_head) g.tau_head.push_back(detail::zeros_like(l));
    return g;
}

// Cached per-layer activations for one mini-batch; replaying the stored
// inputs through the same parameters reproduces the outputs bit-exactly.
struct forward_trace {
    std::vector<std::vector<double>> inputs;  // batch of D-vectors
    // [layer][example] activation vectors
    std::vector<std::vector<std::vector<double>>> feature_pre, feature_act;
    std::vector<std::vector<double>> alpha_pre;  // per example, K logits
    std::vector<std::vector<std::vector<double>>> p_pre, p_act;
    std::vector<std::vector<std::vector<double>>> tau_pre, tau_act;
    std::vector<fd_params> outputs;
};

inline void sn_init_state(const matrix& w, sn_state& state, rng& gen) {
    state.u.resize(w.rows);
    state.v.resize(w.cols);
    for (double& x : state.u) x = gen.normal();
    for (double& x : state.v) x = gen.normal();
    detail::unit_normalize(state.u);
    detail::unit_normalize(state.v);
}

// He-scaled Gaussian weights, zero biases, random unit power-iteration
// vectors. Deterministic under the seed.
inline network_params init_params(const network_config& config, std::uint64_t seed) {
    config.validate();
    rng gen(seed);
    auto make_layer = [&](std::size_t in, std::size_t out) {
        dense_layer l;
        l.w = matrix(out, in);
        l.b.assign(out, 0.0);
        const double scale = std::sqrt(2.0 / static_cast<double>(in));
        for (double& x : l.w.data) x = scale * gen.normal();
        return l;
    };

    network_params p;
    std::size_t in = config.input_dim;
    for (std::size_t d : config.hidden_dims) {
        p.feature.push_back(make_layer(in, d));
        in = d;
    }
    const std::size_t h = config.feature_dim();
    p.alpha_head = make_layer(h, config.k);

    std::size_t hin = h;
    for (std::size_t d : config.head_hidden_dims) {
        p.p_head.push_back(make_layer(hin, d));
        hin = d;
    }
    p.p_head.push_back(make_layer(hin, config.k));

    hin = h;
    for (std::size_t d : config.head_hidden_dims) {
        p.tau_head.push_back(make_layer(hin, d));
        hin = d;
    }
    p.tau_head.push_back(make_layer(hin, 1));

    p.sn_feature.resize(p.feature.size());
    for (std::size_t i = 0; i < p.feature.size(); ++i)
        sn_init_state(p.feature[i].w, p.sn_feature[i], gen);
    sn_init_state(p.alpha_head.w, p.sn_alpha, gen);
    return p;
}

// One warm-started power-iteration estimate of the largest singular value,
// then divide the matrix by it. Biases are untouched.
inline void sn_normalize_matrix(matrix& w, sn_state& state, int iterations) {
    for (int it = 0; it < iterations; ++it) {
        // v <- normalize(W^T u)
        std::fill(state.v.begin(), state.v.end(), 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double ui = state.u[i];
            const double* row = w.data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) state.v[j] += row[j] * ui;
        }
        detail::unit_normalize(state.v);
        // u <- normalize(W v)
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double* row = w.data.data() + i * w.cols;
            double s = 0.0;
            for (std::size_t j = 0; j < w.cols; ++j) s += row[j] * state.v[j];
            state.u[i] = s;
        }
        detail::unit_normalize(state.u);
    }
    double sigma = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double* row = w.data.data() + i * w.cols;
        double s = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) s += row[j] * state.v[j];
        sigma += state.u[i] * s;
    }
    if (sigma > 1e-30)
        for (double& x : w.data) x /= sigma;
}

inline void spectral_normalize(network_params& params, const network_config& config) {
    for (std::size_t i = 0; i < params.feature.size(); ++i)
        sn_normalize_matrix(params.feature[i].w, params.sn_feature[i], config.power_iterations);
    sn_normalize_matrix(params.alpha_head.w, params.sn_alpha, config.power_iterations);
}

// alpha = exp(clamped logits), p = softmax(logits), tau = softplus(logit) +
// tau_floor; ablations override p or tau after the heads.
inline std::vector<fd_params> forward(const network_params& params, const network_config& config,
                                      const std::vector<std::vector<double>>& inputs,
                                      forward_trace* trace = nullptr) {
    config.validate();
    if (inputs.empty()) throw std::invalid_argument("forward: empty batch");
    for (const auto& x : inputs)
        if (x.size() != config.input_dim)
            throw std::invalid_argument("forward: input dimension mismatch");

    const std::size_t n = inputs.size();
    if (trace) {
        *trace = forward_trace{};
        trace->inputs = inputs;
        trace->feature_pre.resize(params.feature.size(),
                                  std::vector<std::vector<double>>(n));
        trace->feature_act.resize(params.feature.size(),
                                  std::vector<std::vector<double>>(n));
        trace->alpha_pre.resize(n);
        trace->p_pre.resize(params.p_head.size(), std::vector<std::vector<double>>(n));
        trace->p_act.resize(params.p_head.size(), std::vector<std::vector<double>>(n));
        trace->tau_pre.resize(params.tau_head.size(), std::vector<std::vector<double>>(n));
        trace->tau_act.resize(params.tau_head.size(), std::vector<std::vector<double>>(n));
    }

    std::vector<fd_params> out(n);
    std::vector<double> act, pre;
    for (std::size_t i = 0; i < n; ++i) {
        act = inputs[i];
        for (std::size_t l = 0; l < params.feature.size(); ++l) {
            detail::affine(params.feature[l], act, pre);
            if (trace) trace->feature_pre[l][i] = pre;
            for (double& x : pre) x = x > 0.0 ? x : 0.0;
            act = pre;
            if (trace) trace->feature_act[l][i] = act;
        }
        const std::vector<double> features = act;

        // concentration head (single affine)
        std::vector<double> alpha_logits;
        detail::affine(params.alpha_head, features, alpha_logits);
        if (trace) trace->alpha_pre[i] = alpha_logits;
        fd_params fd;
        fd.alpha.resize(config.k);
        for (std::size_t kk = 0; kk < config.k; ++kk) {
            const double c = std::clamp(alpha_logits[kk], -config.alpha_logit_clamp,
                                        config.alpha_logit_clamp);
            fd.alpha[kk] = std::exp(c);
        }

        // allocation head
        act = features;
        for (std::size_t l = 0; l < params.p_head.size(); ++l) {
            detail::affine(params.p_head[l], act, pre);
            if (trace) trace->p_pre[l][i] = pre;
            if (l + 1 < params.p_head.size())
                for (double& x : pre) x = x > 0.0 ? x : 0.0;
            act = pre;
            if (trace) trace->p_act[l][i] = act;
        }
        const std::vector<double> p_logits = act;

        // dispersion head
        act = features;
        for (std::size_t l = 0; l < params.tau_head.size(); ++l) {
            detail::affine(params.tau_head[l], act, pre);
            if (trace) trace->tau_pre[l][i] = pre;
            if (l + 1 < params.tau_head.size())
                for (double& x : pre) x = x > 0.0 ? x : 0.0;
            act = pre;
            if (trace) trace->tau_act[l][i] = act;
        }
        const double tau_logit = act[0];

        switch (config.ablation) {
            case ablation_mode::none:
                fd.p = softmax(p_logits);
                fd.tau = softplus(tau_logit) + config.tau_floor;
                break;
            case ablation_mode::fix_p_uniform:
                fd.p.assign(config.k, 1.0 / static_cast<double>(config.k));
                fd.tau = softplus(tau_logit) + config.tau_floor;
                break;
            case ablation_mode::fix_p_normalized: {
                const double a0 = std::accumulate(fd.alpha.begin(), fd.alpha.end(), 0.0);
                fd.p.resize(config.k);
                for (std::size_t kk = 0; kk < config.k; ++kk) fd.p[kk] = fd.alpha[kk] / a0;
                fd.tau = softplus(tau_logit) + config.tau_floor;
                break;
            }
            case ablation_mode::fix_tau:
                fd.p = softmax(p_logits);
                fd.tau = 1.0;
                break;
        }
        out[i] = fd;
    }
    if (trace) trace->outputs = out;
    return out;
}

// Reverse-mode gradients of the whole network given per-example gradients of
// the loss with respect to (alpha, p, tau) values. Softmax/softplus/exp and
// the ablation reroutings are chained here.
inline network_grads backward(const network_params& params, const network_config& config,
                              const forward_trace& trace,
                              const std::vector<loss_gradients>& upstream) {
    if (upstream.size() != trace.inputs.size())
        throw std::invalid_argument("backward: upstream gradient count does not match trace");
    network_grads grads = zero_grads(params);

    const std::size_t n = trace.inputs.size();
    for (std::size_t i = 0; i < n; ++i) {
        const fd_params& fd = trace.outputs[i];
        std::vector<double> d_alpha = upstream[i].d_alpha;
        std::vector<double> d_p = upstream[i].d_p;
        double d_tau = upstream[i].d_tau;
        if (d_alpha.size() != config.k || d_p.size() != config.k)
            throw std::invalid_argument("backward: upstream gradient dimension mismatch");

        if (config.ablation == ablation_mode::fix_p_normalized) {
            // p = alpha / a0: fold the p gradient into the alpha gradient.
            const double a0 = fd.alpha0();
            double dot = 0.0;
            for (std::size_t kk = 0; kk < config.k; ++kk) dot += d_p[kk] * fd.p[kk];
            for (std::size_t kk = 0; kk < config.k; ++kk)
                d_alpha[kk] += (d_p[kk] - dot) / a0;
        }

        // alpha head: d logit = d alpha * alpha inside the clamp, 0 outside
        std::vector<double> d_alpha_logit(config.k, 0.0);
        for (std::size_t kk = 0; kk < config.k; ++kk) {
            const double pre = trace.alpha_pre[i][kk];
            if (std::abs(pre) < config.alpha_logit_clamp)
                d_alpha_logit[kk] = d_alpha[kk] * fd.alpha[kk];
        }
        const auto& features = trace.feature_act.back()[i];
        std::vector<double> d_features =
            detail::affine_backward(params.alpha_head, grads.alpha_head, features, d_alpha_logit);

        // allocation head through the softmax jacobian
        const bool p_learned = config.ablation == ablation_mode::none ||
                               config.ablation == ablation_mode::fix_tau;
        if (p_learned) {
            double dot = 0.0;
            for (std::size_t kk = 0; kk < config.k; ++kk) dot += d_p[kk] * fd.p[kk];
            std::vector<double> d_logit(config.k);
            for (std::size_t kk = 0; kk < config.k; ++kk)
                d_logit[kk] = fd.p[kk] * (d_p[kk] - dot);
            std::vector<double> dy = d_logit;
            for (std::size_t l = params.p_head.size(); l-- > 0;) {
                const auto& x = l == 0 ? features : trace.p_act[l - 1][i];
                if (l + 1 < params.p_head.size())
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        if (trace.p_pre[l][i][j] <= 0.0) dy[j] = 0.0;
                dy = detail::affine_backward(params.p_head[l], grads.p_head[l], x, dy);
            }
            for (std::size_t j = 0; j < d_features.size(); ++j) d_features[j] += dy[j];
        }

        // dispersion head through softplus
        const bool tau_learned = config.ablation != ablation_mode::fix_tau;
        if (tau_learned) {
            std::vector<double> dy{d_tau * sigmoid(trace.tau_pre.back()[i][0])};
            for (std::size_t l = params.tau_head.size(); l-- > 0;) {
                const auto& x = l == 0 ? features : trace.tau_act[l - 1][i];
                if (l + 1 < params.tau_head.size())
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        if (trace.tau_pre[l][i][j] <= 0.0) dy[j] = 0.0;
                dy = detail::affine_backward(params.tau_head[l], grads.tau_head[l], x, dy);
            }
            for (std::size_t j = 0; j < d_features.size(); ++j) d_features[j] += dy[j];
        }

        // feature extractor (ReLU after every layer)
        std::vector<double> dy = d_features;
        for (std::size_t l = params.feature.size(); l-- > 0;) {
            for (std::size_t j = 0; j < dy.size(); ++j)
                if (trace.feature_pre[l][i][j] <= 0.0) dy[j] = 0.0;
            const auto& x = l == 0 ? trace.inputs[i] : trace.feature_act[l - 1][i];
            dy = detail::affine_backward(params.feature[l], grads.feature[l], x, dy);
        }
    }
    return grads;
}

// Worst relative error between the analytic full-loss gradient and central
// finite differences over every parameter. Relative errors use a 1e-5
// denominator floor so near-zero gradients compare on an absolute scale.
inline double gradient_check(const network_params& params, const network_config& config,
                             const std::vector<double>& input, std::size_t label, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("gradient_check: eps must lie in [1e-7, 1e-3]");
    std::vector<double> onehot(config.k, 0.0);
    onehot[label] = 1.0;
    const std::vector<std::vector<double>> batch{input};

    forward_trace trace;
    const auto fd = forward(params, config, batch, &trace);
    const loss_gradients up = loss_gradient(fd[0], onehot);
    network_grads grads = backward(params, config, trace, {up});

    std::vector<const std::vector<double>*> grad_tensors;
    detail::visit_tensors(grads, [&](std::vector<double>& t) { grad_tensors.push_back(&t); });

    network_params work = params;
    std::vector<std::vector<double>*> param_tensors;
    detail::visit_tensors(work, [&](std::vector<double>& t) { param_tensors.push_back(&t); });

    auto loss_at = [&]() {
        const auto f = forward(work, config, batch, nullptr);
        return loss(f[0], onehot).total;
    };

    double worst = 0.0;
    for (std::size_t t = 0; t < param_tensors.size(); ++t) {
        auto& tensor = *param_tensors[t];
        for (std::size_t j = 0; j < tensor.size(); ++j) {
            const double saved = tensor[j];
            tensor[j] = saved + eps;
            const double lp = loss_at();
            tensor[j] = saved - eps;
            const double lm = loss_at();
            tensor[j] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic = (*grad_tensors[t])[j];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-5});
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
    }
    return worst;
}

}  // namespace fedl
