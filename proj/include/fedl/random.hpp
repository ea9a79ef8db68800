#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedl {

// Seeded random source. All transforms (uniform, normal, gamma, categorical)
// are implemented here on top of std::mt19937_64 so that sequences are fully
// determined by the seed, independent of the standard library's distribution
// implementations.
class rng {
public:
    explicit rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1), never exactly 0.
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // Standard normal via the Marsaglia polar method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    // Gamma(shape) with unit scale. Marsaglia-Tsang squeeze for shape >= 1;
    // shapes below 1 use the exact boost Gamma(shape+1) * U^(1/shape).
    double gamma(double shape) {
        if (!(shape > 0.0))
            throw std::domain_error("rng::gamma: shape must be positive");
        if (shape < 1.0)
            return gamma(shape + 1.0) * std::pow(uniform_pos(), 1.0 / shape);
        const double d = shape - 1.0 / 3.0;
        const double c = (1.0 / 3.0) / std::sqrt(d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Single draw from Mu(1, p); p must sum to 1.
    std::size_t categorical(std::span<const double> p) {
        const double u = uniform();
        double cum = 0.0;
        for (std::size_t k = 0; k + 1 < p.size(); ++k) {
            cum += p[k];
            if (u < cum) return k;
        }
        return p.size() - 1;
    }

    std::vector<double> dirichlet(std::span<const double> alpha) {
        std::vector<double> x(alpha.size());
        double s = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            x[k] = gamma(alpha[k]);
            s += x[k];
        }
        for (double& v : x) v /= s;
        return x;
    }

    // Deterministic sub-stream derivation for independent components.
    rng fork(std::uint64_t salt) {
        return rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ull));
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fedl
