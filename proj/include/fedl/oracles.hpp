#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fedl/fd.hpp"
#include "fedl/math.hpp"
#include "fedl/random.hpp"

namespace fedl {

// Brute-force oracles for validating the closed-form FD mathematics.
// Grid methods are limited to K <= 3; higher dimensions are covered by the
// Monte Carlo paths.

struct grid_spec {
    int resolution = 1000;  // points per simplex edge
    int k = 2;

    void validate() const {
        if (k != 2 && k != 3)
            throw std::invalid_argument("grid_spec: only K in {2,3} is supported");
        if (k == 2 && resolution < 100)
            throw std::invalid_argument("grid_spec: resolution must be >= 100 for K=2");
        if (k == 3 && resolution < 50)
            throw std::invalid_argument("grid_spec: resolution must be >= 50 for K=3");
    }
};

struct moment_estimate {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> mean_se;
    std::vector<double> variance_se;
    std::size_t n = 0;
};

// Sample moments of n FG-basis draws, with standard errors. The variance SE
// uses the large-sample formula sqrt((m4 - s^4) / n).
inline moment_estimate mc_moments(const fd_params& params, rng& gen, std::size_t n) {
    params.validate();
    if (n < 10000) throw std::invalid_argument("mc_moments: n must be >= 1e4");
    const std::size_t dim = params.k();
    std::vector<double> sum(dim, 0.0), sum2(dim, 0.0), sum3(dim, 0.0), sum4(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = fd_sample(params, gen, 1);
        for (std::size_t k = 0; k < dim; ++k) {
            const double v = x[0].pi[k];
            const double v2 = v * v;
            sum[k] += v;
            sum2[k] += v2;
            sum3[k] += v2 * v;
            sum4[k] += v2 * v2;
        }
    }
    moment_estimate est;
    est.n = n;
    est.mean.resize(dim);
    est.variance.resize(dim);
    est.mean_se.resize(dim);
    est.variance_se.resize(dim);
    const double dn = static_cast<double>(n);
    for (std::size_t k = 0; k < dim; ++k) {
        const double m1 = sum[k] / dn;
        const double m2 = sum2[k] / dn;
        const double m3 = sum3[k] / dn;
        const double m4 = sum4[k] / dn;
        const double var = std::max(m2 - m1 * m1, 0.0);
        // central fourth moment from raw moments
        const double c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
        est.mean[k] = m1;
        est.variance[k] = var;
        est.mean_se[k] = std::sqrt(var / dn);
        est.variance_se[k] = std::sqrt(std::max(c4 - var * var, 0.0) / dn);
    }
    return est;
}

struct grid_density {
    // Interior grid points (as simplex points) and the numerically
    // normalized density at each.
    std::vector<simplex_point> points;
    std::vector<double> density;
};

namespace detail {

// Unnormalized log posterior: log prior density + sum_k counts_k log pi_k.
inline double log_prior_times_likelihood(const fd_params& prior,
                                         std::span<const double> counts,
                                         const simplex_point& pt) {
    double lp = fd_log_density(prior, pt);
    for (std::size_t k = 0; k < counts.size(); ++k)
        lp += counts[k] * std::log(pt.pi[k]);
    return lp;
}

// FD density at a simplex boundary where exactly one coordinate hits zero.
// Finite only when the vanishing coordinate has alpha_k >= 1; used by the
// closed trapezoidal rule on K=2. Infinite densities (alpha_k < 1) are
// reported as an error for the grid method.
inline double fd_density_boundary_k2(const fd_params& params, int zero_index) {
    const double a0 = params.alpha0();
    const double t = params.tau;
    const std::size_t z = static_cast<std::size_t>(zero_index);
    const std::size_t o = 1 - z;
    if (params.alpha[z] < 1.0)
        throw std::domain_error("grid oracle: density unbounded at the boundary (alpha < 1)");
    if (params.alpha[z] > 1.0) return 0.0;
    // alpha_z == 1: only the opposite mixture component survives.
    const double log_c = log_gamma(a0 + t) - log_gamma(params.alpha[0]) - log_gamma(params.alpha[1]);
    if (params.p[o] == 0.0) return 0.0;
    return std::exp(log_c + std::log(params.p[o]) + log_gamma(params.alpha[o]) -
                    log_gamma(params.alpha[o] + t));
}

}  // namespace detail

// Numerically normalized posterior density on a grid, computed from
// prior x likelihood without the conjugacy shortcut. K=2 uses the closed
// trapezoidal rule on (0,1) with boundary limits; K=3 uses a cell-midpoint
// rule over the triangle. The trapezoidal normalization reaches ~1e-5
// relative accuracy at resolution 1000 when the posterior exponents keep the
// integrand C1 (all alpha + counts >= 2 and tau >= 1); integrands with
// boundary-singular derivatives degrade it to ~1e-3.
inline grid_density grid_posterior_oracle(const fd_params& prior,
                                          std::span<const double> counts,
                                          const grid_spec& grid) {
    prior.validate();
    grid.validate();
    if (counts.size() != prior.k())
        throw std::invalid_argument("grid_posterior_oracle: counts dimension mismatch");
    if (static_cast<int>(prior.k()) != grid.k)
        throw std::invalid_argument("grid_posterior_oracle: prior dimension does not match grid");

    grid_density out;
    if (grid.k == 2) {
        const int r = grid.resolution;
        const double h = 1.0 / r;
        out.points.reserve(r - 1);
        std::vector<double> unnorm(r - 1);
        for (int i = 1; i < r; ++i) {
            simplex_point pt{{i * h, 1.0 - i * h}};
            unnorm[i - 1] = std::exp(detail::log_prior_times_likelihood(prior, counts, pt));
            out.points.push_back(std::move(pt));
        }
        // Boundary limits of the unnormalized integrand. A positive count on
        // the vanishing coordinate kills that boundary value outright.
        const fd_params post = fd_posterior(prior, counts);
        if (post.alpha[0] < 1.0 || post.alpha[1] < 1.0)
            throw std::domain_error("grid oracle: posterior density unbounded at the boundary");
        const double f0 = counts[0] > 0.0 ? 0.0 : detail::fd_density_boundary_k2(prior, 0);
        const double f1 = counts[1] > 0.0 ? 0.0 : detail::fd_density_boundary_k2(prior, 1);
        double total = 0.5 * (f0 + f1);
        for (double v : unnorm) total += v;
        total *= h;
        out.density.resize(unnorm.size());
        for (std::size_t i = 0; i < unnorm.size(); ++i) out.density[i] = unnorm[i] / total;
    } else {
        const int r = grid.resolution;
        const double h = 1.0 / r;
        double total = 0.0;
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j + i < r; ++j) {
                // lower-triangle cell midpoints in (pi1, pi2) coordinates
                const double x = (i + 1.0 / 3.0) * h;
                const double y = (j + 1.0 / 3.0) * h;
                simplex_point pt{{x, y, 1.0 - x - y}};
                const double v = std::exp(detail::log_prior_times_likelihood(prior, counts, pt));
                total += v * 0.5 * h * h;
                out.points.push_back(std::move(pt));
                out.density.push_back(v);
                if (j + i + 1 < r) {
                    const double xu = (i + 2.0 / 3.0) * h;
                    const double yu = (j + 2.0 / 3.0) * h;
                    simplex_point up{{xu, yu, 1.0 - xu - yu}};
                    const double vu =
                        std::exp(detail::log_prior_times_likelihood(prior, counts, up));
                    total += vu * 0.5 * h * h;
                    out.points.push_back(std::move(up));
                    out.density.push_back(vu);
                }
            }
        }
        for (double& v : out.density) v /= total;
    }
    return out;
}

enum class normalization_method { grid, mc };

// Estimate of the total probability mass (contract: ~1). The MC path uses a
// Dirichlet(alpha) proposal with importance weights so that boundary
// behavior of the FD density cancels against the proposal.
inline double density_normalization_estimate(const fd_params& params,
                                             normalization_method method,
                                             std::size_t budget,
                                             rng* gen = nullptr) {
    params.validate();
    if (method == normalization_method::grid) {
        const grid_spec grid{static_cast<int>(budget), static_cast<int>(params.k())};
        grid.validate();
        const double h = 1.0 / grid.resolution;
        double total = 0.0;
        if (params.k() == 2) {
            total = 0.5 * (detail::fd_density_boundary_k2(params, 0) +
                           detail::fd_density_boundary_k2(params, 1));
            for (int i = 1; i < grid.resolution; ++i) {
                simplex_point pt{{i * h, 1.0 - i * h}};
                total += std::exp(fd_log_density(params, pt));
            }
            total *= h;
        } else {
            std::vector<double> zero_counts(params.k(), 0.0);
            const grid_density g = grid_posterior_oracle(params, zero_counts, grid);
            // The K=3 oracle is normalized by its own quadrature; integrate
            // the raw density over the same cells instead.
            for (const auto& pt : g.points)
                total += std::exp(fd_log_density(params, pt)) * 0.5 * h * h;
        }
        return total;
    }
    if (gen == nullptr)
        throw std::invalid_argument("density_normalization_estimate: mc method needs an rng");
    dirichlet_params proposal{params.alpha};
    double sum = 0.0;
    for (std::size_t i = 0; i < budget; ++i) {
        simplex_point pt{gen->dirichlet(params.alpha)};
        const double lw = fd_log_density(params, pt) - dirichlet_log_density(proposal, pt);
        sum += std::exp(lw);
    }
    return sum / static_cast<double>(budget);
}

}  // namespace fedl
