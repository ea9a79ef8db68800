#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedl/fd.hpp"

namespace fedl {

struct loss_breakdown {
    double mse_term = 0.0;  // expected MSE under the FD distribution
    double reg_term = 0.0;  // Brier term on the allocation probabilities
    double total = 0.0;
};

struct loss_gradients {
    std::vector<double> d_alpha;
    std::vector<double> d_p;
    double d_tau = 0.0;
};

namespace detail {

inline void check_onehot(std::span<const double> onehot, std::size_t k) {
    if (onehot.size() != k)
        throw std::invalid_argument("loss: one-hot label dimension mismatch");
    int ones = 0;
    for (double y : onehot) {
        if (y == 1.0)
            ++ones;
        else if (y != 0.0)
            throw std::invalid_argument("loss: label vector must be one-hot");
    }
    if (ones != 1) throw std::invalid_argument("loss: label vector must have exactly one 1");
}

}  // namespace detail

// L = sum_k (y_k - E[pi_k])^2 + sum_k Var(pi_k) + sum_k (y_k - p_k)^2,
// evaluated in closed form; no sampling involved.
inline loss_breakdown loss(const fd_params& params, std::span<const double> onehot) {
    params.validate();
    detail::check_onehot(onehot, params.k());
    const simplex_point mean = fd_mean(params);
    const std::vector<double> var = fd_variance(params);
    loss_breakdown out;
    for (std::size_t k = 0; k < params.k(); ++k) {
        const double d = onehot[k] - mean.pi[k];
        out.mse_term += d * d + var[k];
        const double r = onehot[k] - params.p[k];
        out.reg_term += r * r;
    }
    out.total = out.mse_term + out.reg_term;
    return out;
}

// Exact partial derivatives of loss().total with respect to (alpha, p, tau).
// Written against the intermediates A_k = alpha_k + tau p_k and s = a0 + tau:
//   mean m_k = A_k / s,
//   Var_k  = A_k (s - A_k) / (s^2 (s+1)) + tau^2 p_k (1-p_k) / (s (s+1)).
inline loss_gradients loss_gradient(const fd_params& params, std::span<const double> onehot) {
    params.validate();
    detail::check_onehot(onehot, params.k());
    const std::size_t dim = params.k();
    const double t = params.tau;
    const double s = params.alpha0() + t;
    const double d1 = s * (s + 1.0);        // D1
    const double d2 = s * d1;               // D2 = s^2 (s+1)
    const double d1p = 2.0 * s + 1.0;       // dD1/ds
    const double d2p = 3.0 * s * s + 2.0 * s;

    loss_gradients g;
    g.d_alpha.assign(dim, 0.0);
    g.d_p.assign(dim, 0.0);

    double dl_ds = 0.0;                      // accumulated dL/ds at fixed A, p, tau
    std::vector<double> dl_da(dim, 0.0);     // dL/dA_k
    for (std::size_t k = 0; k < dim; ++k) {
        const double a = params.alpha[k] + t * params.p[k];
        const double m = a / s;
        const double pq = params.p[k] * (1.0 - params.p[k]);

        // bias term
        dl_da[k] += -2.0 * (onehot[k] - m) / s;
        dl_ds += 2.0 * (onehot[k] - m) * m / s;

        // variance term
        dl_da[k] += (s - 2.0 * a) / d2;
        dl_ds += a / d2 - a * (s - a) * d2p / (d2 * d2) - t * t * pq * d1p / (d1 * d1);

        // direct tau and p dependence of the variance term
        g.d_tau += 2.0 * t * pq / d1;
        g.d_p[k] += t * t * (1.0 - 2.0 * params.p[k]) / d1;

        // Brier regularizer
        g.d_p[k] += -2.0 * (onehot[k] - params.p[k]);
    }

    g.d_tau += dl_ds;
    for (std::size_t k = 0; k < dim; ++k) {
        g.d_alpha[k] = dl_da[k] + dl_ds;
        g.d_tau += dl_da[k] * params.p[k];
        g.d_p[k] += dl_da[k] * t;
    }
    return g;
}

}  // namespace fedl
