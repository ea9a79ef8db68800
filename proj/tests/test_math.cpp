#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fedl/math.hpp"

using namespace fedl;

TEST_CASE("log_gamma matches integer factorials exactly") {
    // ln G(n) = ln((n-1)!)
    double fact = 1.0;
    for (int n = 1; n <= 20; ++n) {
        REQUIRE(relative_diff(log_gamma(n), std::log(fact)) < 1e-14);
        fact *= n;
    }
    REQUIRE(log_gamma(1.0) == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(log_gamma(2.0) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("log_gamma agrees with the library implementation over (0, 1e6)") {
    for (double e = -6.0; e <= 6.0; e += 0.083) {
        const double x = std::pow(10.0, e);
        const double ours = log_gamma(x);
        const double ref = std::lgamma(x);
        REQUIRE(std::abs(ours - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
    // half-integer identity: ln G(1/2) = ln sqrt(pi)
    REQUIRE(log_gamma(0.5) == Catch::Approx(0.5 * std::log(pi)).epsilon(1e-14));
}

TEST_CASE("log_gamma rejects non-positive arguments") {
    REQUIRE_THROWS_AS(log_gamma(0.0), std::domain_error);
    REQUIRE_THROWS_AS(log_gamma(-1.5), std::domain_error);
}

TEST_CASE("log_sum_exp") {
    std::vector<double> v{0.0, 0.0};
    REQUIRE(log_sum_exp(v) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    std::vector<double> big{1000.0, 1000.0};
    REQUIRE(log_sum_exp(big) == Catch::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    std::vector<double> with_inf{-std::numeric_limits<double>::infinity(), 1.0};
    REQUIRE(log_sum_exp(with_inf) == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("softplus and sigmoid are stable at extremes") {
    REQUIRE(softplus(0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    REQUIRE(softplus(800.0) == Catch::Approx(800.0).epsilon(1e-15));
    REQUIRE(softplus(-800.0) == Catch::Approx(0.0).margin(1e-300));
    REQUIRE(sigmoid(0.0) == Catch::Approx(0.5).epsilon(1e-15));
    REQUIRE(sigmoid(800.0) == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("softmax lies on the simplex") {
    std::vector<double> logits{1.0, 2.0, 3.0, -1.0};
    const auto p = softmax(logits);
    double sum = 0.0;
    for (double x : p) {
        REQUIRE(x > 0.0);
        sum += x;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
    REQUIRE(p[2] > p[1]);
    // shift invariance
    std::vector<double> shifted{1001.0, 1002.0, 1003.0, 999.0};
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) REQUIRE(p[i] == Catch::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("beta_log_pdf normalizes against known values") {
    // Beta(2,1): pdf = 2x
    REQUIRE(std::exp(beta_log_pdf(0.5, 2.0, 1.0)) == Catch::Approx(1.0).epsilon(1e-13));
    REQUIRE(std::exp(beta_log_pdf(0.25, 1.0, 2.0)) == Catch::Approx(1.5).epsilon(1e-13));
    REQUIRE_THROWS_AS(beta_log_pdf(0.0, 2.0, 2.0), std::domain_error);
    REQUIRE_THROWS_AS(beta_log_pdf(1.0, 2.0, 2.0), std::domain_error);
}
