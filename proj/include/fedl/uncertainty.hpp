#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedl/fd.hpp"

namespace fedl {

// Label-wise variance decomposition for one input: total = aleatoric +
// epistemic. aleatoric is clamped to 0 in the report; the raw (possibly
// -1e-16-ish) value is retained for tests.
struct uncertainty_report {
    std::size_t predicted_class = 0;
    std::vector<double> expected_probs;
    double total = 0.0;
    double aleatoric = 0.0;
    double epistemic = 0.0;
    double aleatoric_raw = 0.0;
    std::vector<double> per_class_total;
};

// argmax_k E[pi_k], ties broken toward the lowest index.
inline std::size_t predict(const fd_params& params) {
    const simplex_point mean = fd_mean(params);
    std::size_t best = 0;
    for (std::size_t k = 1; k < mean.pi.size(); ++k)
        if (mean.pi[k] > mean.pi[best]) best = k;
    return best;
}

// TU = 1 - sum_k E[pi_k]^2;
// EU = sum_k E[pi_k](1-E[pi_k])/(a0+t+1) + t^2 p_k(1-p_k)/((a0+t)(a0+t+1));
// AU = TU - EU.
inline uncertainty_report uncertainties(const fd_params& params) {
    params.validate();
    const double t = params.tau;
    const double s = params.alpha0() + t;
    const simplex_point mean = fd_mean(params);

    uncertainty_report rep;
    rep.expected_probs = mean.pi;
    rep.per_class_total.resize(params.k());
    for (std::size_t k = 0; k < params.k(); ++k) {
        const double m = mean.pi[k];
        rep.total += m * m;
        rep.per_class_total[k] = m * (1.0 - m);
        rep.epistemic += m * (1.0 - m) / (s + 1.0) +
                         t * t * params.p[k] * (1.0 - params.p[k]) / (s * (s + 1.0));
        if (m > mean.pi[rep.predicted_class]) rep.predicted_class = k;
    }
    rep.total = 1.0 - rep.total;
    rep.aleatoric_raw = rep.total - rep.epistemic;
    rep.aleatoric = std::max(rep.aleatoric_raw, 0.0);
    return rep;
}

struct edl_uncertainty {
    double aleatoric = 0.0;
    double epistemic = 0.0;
};

// Baseline Dirichlet measures: AU = 1 - max_k alpha_k/a0, EU = K/a0.
inline edl_uncertainty edl_uncertainties(const dirichlet_params& d) {
    d.validate();
    const double a0 = d.alpha0();
    double max_mean = 0.0;
    for (double a : d.alpha) max_mean = std::max(max_mean, a / a0);
    return {1.0 - max_mean, static_cast<double>(d.k()) / a0};
}

// Min-max scaling to [0,1], with an optional log transform first (used for
// epistemic values). A constant list maps to all zeros.
inline std::vector<double> normalize_batch(std::span<const double> values, bool log_transform) {
    if (values.empty())
        throw std::invalid_argument("normalize_batch: values must be non-empty");
    std::vector<double> v(values.begin(), values.end());
    if (log_transform) {
        for (double& x : v) {
            if (!(x > 0.0))
                throw std::domain_error("normalize_batch: log transform requires positive values");
            x = std::log(x);
        }
    }
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, hi = *mx;
    if (hi == lo) {
        std::fill(v.begin(), v.end(), 0.0);
        return v;
    }
    for (double& x : v) x = (x - lo) / (hi - lo);
    return v;
}

}  // namespace fedl
