#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedl/data.hpp"
#include "fedl/network.hpp"
#include "fedl/objective.hpp"
#include "fedl/uncertainty.hpp"

namespace fedl {

// Raised when the training loss turns non-finite; carries the epoch.
struct divergence_error : std::runtime_error {
    int epoch;
    explicit divergence_error(int ep)
        : std::runtime_error("training diverged at epoch " + std::to_string(ep)), epoch(ep) {}
};

struct train_config {
    int max_epochs = 200;
    int batch_size = 64;
    double learning_rate = 5e-4;
    int lr_step_size = 20;
    double lr_gamma = 0.5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int early_stop_patience = 10;
    std::uint64_t seed = 0;
    double val_fraction = 0.05;

    void validate() const {
        if (max_epochs < 1) throw std::invalid_argument("train_config: max_epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("train_config: batch_size must be >= 1");
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("train_config: learning_rate must be positive");
        if (lr_step_size < 1)
            throw std::invalid_argument("train_config: lr_step_size must be >= 1");
        if (!(lr_gamma > 0.0 && lr_gamma < 1.0))
            throw std::invalid_argument("train_config: lr_gamma must lie in (0,1)");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw std::invalid_argument("train_config: adam betas must lie in (0,1)");
        if (!(adam_eps > 0.0)) throw std::invalid_argument("train_config: adam_eps must be positive");
        if (early_stop_patience < 1)
            throw std::invalid_argument("train_config: early_stop_patience must be >= 1");
        if (!(val_fraction > 0.0 && val_fraction < 1.0))
            throw std::invalid_argument("train_config: val_fraction must lie in (0,1)");
    }
};

struct train_history {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    std::vector<double> lr;
    int best_epoch = 0;
    bool stopped_early = false;
};

// Bias-corrected first/second moment state, one slot per parameter tensor.
struct adam_state {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

inline adam_state make_adam_state(network_params& params) {
    adam_state st;
    detail::visit_tensors(params, [&](std::vector<double>& t) {
        st.m.emplace_back(t.size(), 0.0);
        st.v.emplace_back(t.size(), 0.0);
    });
    return st;
}

inline void adam_update(network_params& params, network_grads& grads, adam_state& state,
                        const train_config& config, double lr) {
    std::vector<std::vector<double>*> pt, gt;
    detail::visit_tensors(params, [&](std::vector<double>& t) { pt.push_back(&t); });
    detail::visit_tensors(grads, [&](std::vector<double>& t) { gt.push_back(&t); });
    if (pt.size() != gt.size() || pt.size() != state.m.size())
        throw std::invalid_argument("adam_update: state/parameter shape mismatch");

    ++state.step;
    const double bc1 = 1.0 - std::pow(config.adam_beta1, state.step);
    const double bc2 = 1.0 - std::pow(config.adam_beta2, state.step);
    for (std::size_t t = 0; t < pt.size(); ++t) {
        auto& p = *pt[t];
        const auto& g = *gt[t];
        auto& m = state.m[t];
        auto& v = state.v[t];
        if (p.size() != g.size())
            throw std::invalid_argument("adam_update: gradient shape mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = config.adam_beta1 * m[j] + (1.0 - config.adam_beta1) * g[j];
            v[j] = config.adam_beta2 * v[j] + (1.0 - config.adam_beta2) * g[j] * g[j];
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            p[j] -= lr * mh / (std::sqrt(vh) + config.adam_eps);
        }
    }
}

struct train_result {
    network_params params;  // snapshot at best validation loss
    train_history history;
    adam_state optimizer;   // state at the final executed step
};

namespace detail {

inline double dataset_loss(const network_params& params, const network_config& net,
                           const labeled_dataset& ds, double* accuracy_out) {
    const auto fds = forward(params, net, ds.features, nullptr);
    double total = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<double> onehot(net.k, 0.0);
        onehot[static_cast<std::size_t>(ds.labels[i])] = 1.0;
        total += loss(fds[i], onehot).total;
        if (predict(fds[i]) == static_cast<std::size_t>(ds.labels[i])) ++correct;
    }
    if (accuracy_out) *accuracy_out = static_cast<double>(correct) / ds.size();
    return total / static_cast<double>(ds.size());
}

}  // namespace detail

// Mini-batch training with Adam, step LR decay, per-step spectral
// normalization, and early stopping on validation loss. Returns the weights
// at the best validation epoch. Deterministic under train_config.seed.
inline train_result train(const network_config& net_config, const train_config& config,
                          const labeled_dataset& dataset, std::ostream* progress = &std::cout) {
    net_config.validate();
    config.validate();
    dataset.validate();
    if (dataset.k < 2) throw std::invalid_argument("train: dataset needs >= 2 classes");
    if (dataset.size() < 2 * static_cast<std::size_t>(config.batch_size))
        throw std::invalid_argument("train: dataset must hold at least 2 batches");
    for (int lbl : dataset.labels)
        if (lbl < 0) throw std::invalid_argument("train: OOD rows cannot be trained on");

    const split_result parts = split(dataset, 1.0 - config.val_fraction, config.seed);
    const labeled_dataset& tr = parts.part_a;
    const labeled_dataset& val = parts.part_b;

    train_result res;
    res.params = init_params(net_config, config.seed);
    // warm-start the power-iteration vectors before the first step
    {
        network_config burn_in = net_config;
        burn_in.power_iterations = 30;
        spectral_normalize(res.params, burn_in);
    }
    res.optimizer = make_adam_state(res.params);

    network_params best = res.params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    rng order_gen(config.seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(tr.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = config.learning_rate *
                          std::pow(config.lr_gamma, epoch / config.lr_step_size);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(order_gen.uniform() * i)]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<std::vector<double>> xb;
            std::vector<std::size_t> yb;
            xb.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                xb.push_back(tr.features[order[i]]);
                yb.push_back(static_cast<std::size_t>(tr.labels[order[i]]));
            }

            forward_trace trace;
            const auto fds = forward(res.params, net_config, xb, &trace);
            double batch_loss = 0.0;
            std::vector<loss_gradients> upstream(fds.size());
            const double inv_n = 1.0 / static_cast<double>(fds.size());
            for (std::size_t i = 0; i < fds.size(); ++i) {
                std::vector<double> onehot(net_config.k, 0.0);
                onehot[yb[i]] = 1.0;
                batch_loss += loss(fds[i], onehot).total;
                upstream[i] = loss_gradient(fds[i], onehot);
                for (double& g : upstream[i].d_alpha) g *= inv_n;
                for (double& g : upstream[i].d_p) g *= inv_n;
                upstream[i].d_tau *= inv_n;
            }
            batch_loss *= inv_n;
            if (!std::isfinite(batch_loss)) throw divergence_error(epoch);
            epoch_loss += batch_loss;
            ++batches;

            network_grads grads = backward(res.params, net_config, trace, upstream);
            adam_update(res.params, grads, res.optimizer, config, lr);
            spectral_normalize(res.params, net_config);
        }
        epoch_loss /= static_cast<double>(batches);

        double val_acc = 0.0;
        const double val_loss = detail::dataset_loss(res.params, net_config, val, &val_acc);
        if (!std::isfinite(val_loss)) throw divergence_error(epoch);

        res.history.train_loss.push_back(epoch_loss);
        res.history.val_loss.push_back(val_loss);
        res.history.val_acc.push_back(val_acc);
        res.history.lr.push_back(lr);
        if (progress)
            *progress << "epoch=" << epoch << " train_loss=" << epoch_loss
                      << " val_loss=" << val_loss << " val_acc=" << val_acc << " lr=" << lr
                      << "\n";

        if (val_loss < best_val) {
            best_val = val_loss;
            best = res.params;
            best_epoch = epoch;
        } else if (epoch - best_epoch >= config.early_stop_patience) {
            res.history.stopped_early = true;
            break;
        }
    }
    res.history.best_epoch = best_epoch;
    res.params = best;
    return res;
}

}  // namespace fedl
