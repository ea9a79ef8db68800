#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedl/math.hpp"
#include "fedl/random.hpp"

namespace fedl {

inline constexpr double simplex_sum_tol = 1e-12;
inline constexpr double density_point_floor = 1e-12;

// Parameters (alpha, p, tau) of one flexible Dirichlet distribution over the
// K-class simplex: concentrations alpha_k > 0, allocation probabilities p on
// the simplex, dispersion tau > 0.
struct fd_params {
    std::vector<double> alpha;
    std::vector<double> p;
    double tau = 1.0;

    std::size_t k() const { return alpha.size(); }
    double alpha0() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }

    void validate() const {
        if (alpha.size() < 2) throw std::invalid_argument("fd_params: K must be >= 2");
        if (p.size() != alpha.size())
            throw std::invalid_argument("fd_params: alpha and p dimension mismatch");
        for (double a : alpha)
            if (!(a > 0.0) || !std::isfinite(a))
                throw std::invalid_argument("fd_params: every alpha_k must be positive");
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw std::invalid_argument("fd_params: tau must be positive");
        double sum = 0.0;
        for (double v : p) {
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("fd_params: every p_k must lie in [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > simplex_sum_tol)
            throw std::invalid_argument("fd_params: p must sum to 1");
    }
};

struct dirichlet_params {
    std::vector<double> alpha;

    std::size_t k() const { return alpha.size(); }
    double alpha0() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }

    void validate() const {
        if (alpha.size() < 2) throw std::invalid_argument("dirichlet_params: K must be >= 2");
        for (double a : alpha)
            if (!(a > 0.0) || !std::isfinite(a))
                throw std::invalid_argument("dirichlet_params: every alpha_k must be positive");
    }
};

// A point on the class-probability simplex. Density evaluation additionally
// requires strict interiority (every component > 0).
struct simplex_point {
    std::vector<double> pi;

    void validate(double tol = 1e-9) const {
        double sum = 0.0;
        for (double v : pi) {
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("simplex_point: components must lie in [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("simplex_point: components must sum to 1");
    }

    bool interior() const {
        return std::all_of(pi.begin(), pi.end(), [](double v) { return v > 0.0; });
    }
};

// One subjective-logic opinion: belief mass per class, shared uncertainty
// mass, and a base rate. belief + uncertainty_mass sums to 1.
struct sl_opinion {
    std::vector<double> belief;
    double uncertainty_mass = 0.0;
    std::vector<double> base_rate;
};

struct sl_mixture {
    std::vector<sl_opinion> opinions;   // opinion j carries base rate e_j
    std::vector<double> selection;      // hypothesis selection probabilities (= p)
};

struct predictive_mix {
    double w_edl = 0.0;
    double w_sm = 0.0;
    std::vector<double> p_edl;
    std::vector<double> p_sm;
    std::vector<double> p_pred;
};

// E[pi_k] = (alpha_k + tau p_k) / (alpha0 + tau)
inline simplex_point fd_mean(const fd_params& params) {
    params.validate();
    const double s = params.alpha0() + params.tau;
    simplex_point out;
    out.pi.resize(params.k());
    for (std::size_t k = 0; k < params.k(); ++k)
        out.pi[k] = (params.alpha[k] + params.tau * params.p[k]) / s;
    return out;
}

// Var(pi_k): the two-term closed form
//   (a_k+t p_k)(a0-a_k+t(1-p_k)) / ((a0+t)^2 (a0+t+1))
// + t^2 p_k (1-p_k) / ((a0+t)(a0+t+1)).
inline std::vector<double> fd_variance(const fd_params& params) {
    params.validate();
    const double a0 = params.alpha0();
    const double t = params.tau;
    const double s = a0 + t;
    std::vector<double> out(params.k());
    for (std::size_t k = 0; k < params.k(); ++k) {
        const double ak = params.alpha[k] + t * params.p[k];
        out[k] = ak * (s - ak) / (s * s * (s + 1.0)) +
                 t * t * params.p[k] * (1.0 - params.p[k]) / (s * (s + 1.0));
    }
    return out;
}

inline double dirichlet_log_density(const dirichlet_params& d, const simplex_point& point) {
    d.validate();
    if (point.pi.size() != d.k())
        throw std::invalid_argument("dirichlet_log_density: dimension mismatch");
    if (!point.interior())
        throw std::domain_error("dirichlet_log_density: point must be strictly interior");
    double lp = log_gamma(d.alpha0());
    for (std::size_t k = 0; k < d.k(); ++k) {
        const double x = std::max(point.pi[k], density_point_floor);
        lp += (d.alpha[k] - 1.0) * std::log(x) - log_gamma(d.alpha[k]);
    }
    return lp;
}

// log p_FD(pi; alpha, p, tau)
//   = lg(a0+t) - sum_k lg(a_k) + sum_k (a_k-1) ln pi_k
//     + logsumexp_k [ln p_k + lg(a_k) - lg(a_k+t) + t ln pi_k].
// Exact-boundary points are rejected rather than clamped; strictly interior
// components are floored at 1e-12 before the log.
inline double fd_log_density(const fd_params& params, const simplex_point& point) {
    params.validate();
    if (point.pi.size() != params.k())
        throw std::invalid_argument("fd_log_density: dimension mismatch");
    if (!point.interior())
        throw std::domain_error("fd_log_density: point must be strictly interior");

    const double t = params.tau;
    double lp = log_gamma(params.alpha0() + t);
    std::vector<double> mix(params.k(), -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < params.k(); ++k) {
        const double x = std::max(point.pi[k], density_point_floor);
        lp += (params.alpha[k] - 1.0) * std::log(x) - log_gamma(params.alpha[k]);
        if (params.p[k] > 0.0)
            mix[k] = std::log(params.p[k]) + log_gamma(params.alpha[k]) -
                     log_gamma(params.alpha[k] + t) + t * std::log(x);
    }
    return lp + log_sum_exp(mix);
}

// FG-basis sampler: Y_k = W_k + Z_k U with W_k ~ Gamma(alpha_k),
// U ~ Gamma(tau), Z ~ Mu(1, p), then X = Y / sum(Y). All Gamma draws use
// unit scale; a common scale cancels under normalization.
inline std::vector<simplex_point> fd_sample(const fd_params& params, rng& gen, std::size_t n) {
    params.validate();
    if (n < 1) throw std::invalid_argument("fd_sample: n must be >= 1");
    std::vector<simplex_point> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> y(params.k());
        const double u = gen.gamma(params.tau);
        const std::size_t z = gen.categorical(params.p);
        double sum = 0.0;
        for (std::size_t k = 0; k < params.k(); ++k) {
            y[k] = gen.gamma(params.alpha[k]);
            if (k == z) y[k] += u;
            sum += y[k];
        }
        for (double& v : y) v /= sum;
        out[i].pi = std::move(y);
    }
    return out;
}

// Conjugate update under categorical observations: alpha' = alpha + counts
// and tau unchanged, while the allocation probabilities are reweighted by
// each Dirichlet component's marginal likelihood,
//   p'_k  proportional to  p_k * G(a'_k+t) G(a_k) / (G(a_k+t) G(a'_k)),
// which is what prior x likelihood demands (the grid-Bayes oracle checks
// this pointwise). Counts may be real-valued pseudo-counts.
inline fd_params fd_posterior(const fd_params& prior, std::span<const double> counts) {
    prior.validate();
    if (counts.size() != prior.k())
        throw std::invalid_argument("fd_posterior: counts dimension mismatch");
    bool all_zero = true;
    for (double c : counts) {
        if (!(c >= 0.0))
            throw std::invalid_argument("fd_posterior: counts must be non-negative");
        if (c != 0.0) all_zero = false;
    }
    fd_params post = prior;
    for (std::size_t k = 0; k < counts.size(); ++k) post.alpha[k] += counts[k];
    if (all_zero) return post;

    std::vector<double> logw(prior.k(), -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < prior.k(); ++k) {
        if (prior.p[k] == 0.0) continue;
        logw[k] = std::log(prior.p[k]) + log_gamma(post.alpha[k] + prior.tau) -
                  log_gamma(prior.alpha[k] + prior.tau) + log_gamma(prior.alpha[k]) -
                  log_gamma(post.alpha[k]);
    }
    const double norm = log_sum_exp(logw);
    for (std::size_t k = 0; k < prior.k(); ++k)
        post.p[k] = std::isfinite(logw[k]) ? std::exp(logw[k] - norm) : 0.0;
    // make the simplex sum exact despite rounding
    double sum = 0.0;
    for (double v : post.p) sum += v;
    for (double& v : post.p) v /= sum;
    return post;
}

// Marginal of component k: a two-part Beta mixture
//   p_k Beta(a_k+t, a0-a_k) + (1-p_k) Beta(a_k, a0-a_k+t).
inline double fd_marginal_density(const fd_params& params, std::size_t class_index, double x) {
    params.validate();
    if (class_index >= params.k())
        throw std::invalid_argument("fd_marginal_density: class index out of range");
    if (!(x > 0.0 && x < 1.0))
        throw std::domain_error("fd_marginal_density: x must lie in (0,1)");
    const double a0 = params.alpha0();
    const double ak = params.alpha[class_index];
    const double t = params.tau;
    const double pk = params.p[class_index];
    double density = 0.0;
    if (pk > 0.0) density += pk * std::exp(beta_log_pdf(x, ak + t, a0 - ak));
    if (pk < 1.0) density += (1.0 - pk) * std::exp(beta_log_pdf(x, ak, a0 - ak + t));
    return density;
}

// Mode-separation diagnostic |tau / (alpha0 + tau - 2)|; the pole at
// alpha0 + tau = 2 is an error, not an infinity.
inline double fd_mode_separation(const fd_params& params) {
    params.validate();
    const double denom = params.alpha0() + params.tau - 2.0;
    if (denom == 0.0)
        throw std::domain_error("fd_mode_separation: singular at alpha0 + tau = 2");
    return std::abs(params.tau / denom);
}

// Splits the predictive distribution into its evidential and softmax parts:
// w_edl = a0/(a0+t) on alpha/a0, w_sm = t/(a0+t) on p.
inline predictive_mix predictive_decomposition(const fd_params& params) {
    params.validate();
    const double a0 = params.alpha0();
    const double s = a0 + params.tau;
    predictive_mix mix;
    mix.w_edl = a0 / s;
    mix.w_sm = params.tau / s;
    mix.p_edl.resize(params.k());
    mix.p_pred.resize(params.k());
    mix.p_sm = params.p;
    for (std::size_t k = 0; k < params.k(); ++k) {
        mix.p_edl[k] = params.alpha[k] / a0;
        mix.p_pred[k] = mix.w_edl * mix.p_edl[k] + mix.w_sm * mix.p_sm[k];
    }
    return mix;
}

// K class-specific opinions sharing belief alpha/(a0+t) and uncertainty mass
// t/(a0+t); opinion j carries base rate e_j and selection probability p_j.
inline sl_mixture sl_opinions(const fd_params& params) {
    params.validate();
    const double s = params.alpha0() + params.tau;
    std::vector<double> belief(params.k());
    for (std::size_t k = 0; k < params.k(); ++k) belief[k] = params.alpha[k] / s;
    const double u = params.tau / s;

    sl_mixture mix;
    mix.selection = params.p;
    mix.opinions.resize(params.k());
    for (std::size_t j = 0; j < params.k(); ++j) {
        mix.opinions[j].belief = belief;
        mix.opinions[j].uncertainty_mass = u;
        mix.opinions[j].base_rate.assign(params.k(), 0.0);
        mix.opinions[j].base_rate[j] = 1.0;
    }
    return mix;
}

}  // namespace fedl
