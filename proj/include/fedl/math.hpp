#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedl {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double log_two_pi = 1.8378770664093454836;

// Log-gamma via the Lanczos approximation (Godfrey coefficient set,
// g = 607/128, 15 terms). Relative accuracy is ~1e-15 on (0, 1e6);
// arguments below 1 are lifted with ln G(x) = ln G(x+1) - ln x.
inline double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::domain_error("log_gamma: argument must be positive and finite");

    static constexpr double g = 607.0 / 128.0;
    static constexpr double coeff[15] = {
        0.99999999999999709182,     57.156235665862923517,
        -59.597960355475491248,     14.136097974741747174,
        -0.49191381609762019978,    0.33994649984811888699e-4,
        0.46523628927048575665e-4,  -0.98374475304879564677e-4,
        0.15808870322491248884e-3,  -0.21026444172410488319e-3,
        0.21743961811521264320e-3,  -0.16431810653676389022e-3,
        0.84418223983852743293e-4,  -0.26190838401581408670e-4,
        0.36899182659531622704e-5};

    double shift = 0.0;
    if (x < 1.0) {
        shift = -std::log(x);
        x += 1.0;
    }
    const double zp = x - 1.0;
    double series = coeff[0];
    for (int i = 1; i < 15; ++i) series += coeff[i] / (zp + i);
    const double t = zp + g + 0.5;
    return shift + 0.5 * log_two_pi + (zp + 0.5) * std::log(t) - t + std::log(series);
}

inline double log_beta(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

// log(sum(exp(v))) over finite entries; -inf entries are skipped.
inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (x > m) m = x;
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v)
        if (std::isfinite(x)) s += std::exp(x - m);
    return m + std::log(s);
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline std::vector<double> softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double x : logits)
        if (x > m) m = x;
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        s += out[i];
    }
    for (double& x : out) x /= s;
    return out;
}

inline double beta_log_pdf(double x, double a, double b) {
    if (!(x > 0.0 && x < 1.0))
        throw std::domain_error("beta_log_pdf: x must lie in (0,1)");
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b);
}

inline double relative_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

}  // namespace fedl
