#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedl/fd.hpp"
#include "fedl/uncertainty.hpp"

using namespace fedl;

TEST_CASE("uncertainties at the K=2 uniform point") {
    const auto rep = uncertainties({{1.0, 1.0}, {0.5, 0.5}, 1.0});
    REQUIRE(std::abs(rep.total - 0.5) < 1e-14);
    REQUIRE(std::abs(rep.epistemic - 1.0 / 6.0) < 1e-14);
    REQUIRE(std::abs(rep.aleatoric - 1.0 / 3.0) < 1e-14);
}

TEST_CASE("total uncertainty limits") {
    // concentrated mean: TU -> 0
    const auto sharp = uncertainties({{1e6, 1.0}, {1.0, 0.0}, 1.0});
    REQUIRE(sharp.total < 1e-5);
    // uniform mean with K=10: TU = 0.9
    fd_params uniform;
    uniform.alpha.assign(10, 1.0);
    uniform.p.assign(10, 0.1);
    uniform.tau = 1.0;
    REQUIRE(uncertainties(uniform).total == Catch::Approx(0.9).epsilon(1e-14));
}

TEST_CASE("TU = AU + EU and the bound TU <= 1 - 1/K") {
    rng gen(3);
    for (int rep_i = 0; rep_i < 500; ++rep_i) {
        const std::size_t k = 2 + rep_i % 6;
        fd_params params;
        params.alpha.resize(k);
        for (auto& a : params.alpha) a = 0.2 + 6.0 * gen.uniform();
        params.p = gen.dirichlet(std::vector<double>(k, 1.0));
        params.tau = 0.1 + 5.0 * gen.uniform();

        const auto rep = uncertainties(params);
        REQUIRE(std::abs(rep.total - (rep.aleatoric_raw + rep.epistemic)) < 1e-12);
        REQUIRE(rep.total >= 0.0);
        REQUIRE(rep.total <= 1.0 - 1.0 / k + 1e-12);
        REQUIRE(rep.epistemic > 0.0);
        REQUIRE(rep.aleatoric >= 0.0);

        // per-class totals decompose the same way
        double tu_sum = 0.0;
        for (double t : rep.per_class_total) tu_sum += t;
        REQUIRE(std::abs(tu_sum - rep.total) < 1e-12);
    }
}

TEST_CASE("EU decreases strictly under evidence scaling") {
    const fd_params base{{2.0, 1.0, 0.5}, {0.5, 0.3, 0.2}, 1.5};
    double prev = std::numeric_limits<double>::infinity();
    for (double c : {1.0, 10.0, 100.0, 1000.0}) {
        fd_params scaled = base;
        for (auto& a : scaled.alpha) a *= c;
        const double eu = uncertainties(scaled).epistemic;
        REQUIRE(eu < prev);
        prev = eu;
    }
}

TEST_CASE("EU matches the summed Dirichlet variance under the reduction") {
    rng gen(5);
    for (int rep_i = 0; rep_i < 100; ++rep_i) {
        const std::size_t k = 2 + rep_i % 4;
        fd_params params;
        params.alpha.resize(k);
        for (auto& a : params.alpha) a = 0.5 + 4.0 * gen.uniform();
        params.tau = 1.0;
        const double a0 = params.alpha0();
        params.p.resize(k);
        for (std::size_t j = 0; j < k; ++j) params.p[j] = params.alpha[j] / a0;

        // the reduction IS Dir(alpha), so EU equals its summed variance
        double dir_var = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            dir_var += params.alpha[j] * (a0 - params.alpha[j]) / (a0 * a0 * (a0 + 1.0));
        REQUIRE(relative_diff(uncertainties(params).epistemic, dir_var) < 1e-12);
    }
}

TEST_CASE("predict follows the expected probabilities") {
    REQUIRE(predict({{3.0, 1.0}, {0.75, 0.25}, 1.0}) == 0);
    // exact tie resolves to the lowest index
    REQUIRE(predict({{1.0, 1.0}, {0.5, 0.5}, 1.0}) == 0);
    REQUIRE(predict({{1.0, 5.0}, {0.5, 0.5}, 1.0}) == 1);

    rng gen(7);
    for (int rep_i = 0; rep_i < 100; ++rep_i) {
        fd_params params;
        const std::size_t k = 2 + rep_i % 5;
        params.alpha.resize(k);
        for (auto& a : params.alpha) a = 0.2 + 5.0 * gen.uniform();
        params.p = gen.dirichlet(std::vector<double>(k, 1.0));
        params.tau = 0.2 + 3.0 * gen.uniform();
        const auto rep = uncertainties(params);
        REQUIRE(predict(params) == rep.predicted_class);
        const auto mix = predictive_decomposition(params);
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (mix.p_pred[j] > mix.p_pred[best]) best = j;
        REQUIRE(predict(params) == best);
    }
}

TEST_CASE("EDL baseline uncertainties") {
    dirichlet_params uniform;
    uniform.alpha.assign(10, 1.0);
    const auto u = edl_uncertainties(uniform);
    REQUIRE(u.aleatoric == Catch::Approx(0.9).epsilon(1e-14));
    REQUIRE(u.epistemic == Catch::Approx(1.0).epsilon(1e-14));

    const auto sharp = edl_uncertainties({{100.0, 1.0}});
    REQUIRE(sharp.aleatoric == Catch::Approx(1.0 - 100.0 / 101.0).epsilon(1e-12));
    REQUIRE(sharp.epistemic == Catch::Approx(2.0 / 101.0).epsilon(1e-12));

    // scaling alpha leaves AU unchanged and divides EU by the factor
    const auto base = edl_uncertainties({{3.0, 2.0, 1.0}});
    const auto scaled = edl_uncertainties({{30.0, 20.0, 10.0}});
    REQUIRE(base.aleatoric == Catch::Approx(scaled.aleatoric).epsilon(1e-14));
    REQUIRE(base.epistemic == Catch::Approx(10.0 * scaled.epistemic).epsilon(1e-14));
}

TEST_CASE("normalize_batch") {
    const std::vector<double> v{1.0, 2.0, 3.0};
    const auto plain = normalize_batch(v, false);
    REQUIRE(plain == std::vector<double>{0.0, 0.5, 1.0});

    const std::vector<double> constant{4.0, 4.0, 4.0};
    REQUIRE(normalize_batch(constant, false) == std::vector<double>{0.0, 0.0, 0.0});

    const std::vector<double> logs{1.0, 10.0, 100.0};
    const auto logged = normalize_batch(logs, true);
    REQUIRE(logged[0] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(logged[1] == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(logged[2] == Catch::Approx(1.0).epsilon(1e-12));

    const std::vector<double> bad{1.0, 0.0};
    REQUIRE_THROWS_AS(normalize_batch(bad, true), std::domain_error);
    REQUIRE_THROWS_AS(normalize_batch(std::vector<double>{}, false), std::invalid_argument);
}
