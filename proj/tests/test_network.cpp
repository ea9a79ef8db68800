#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedl/network.hpp"

using namespace fedl;

namespace {

// Exact largest singular value via power iteration on W^T W with many
// restarts; dense oracle for matrices up to 64x64.
double exact_sigma(const matrix& w) {
    std::vector<double> v(w.cols, 1.0 / std::sqrt(static_cast<double>(w.cols)));
    double sigma = 0.0;
    for (int it = 0; it < 5000; ++it) {
        // u = W v; v' = W^T u
        std::vector<double> u(w.rows, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i)
            for (std::size_t j = 0; j < w.cols; ++j) u[i] += w.at(i, j) * v[j];
        std::vector<double> nv(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i)
            for (std::size_t j = 0; j < w.cols; ++j) nv[j] += w.at(i, j) * u[i];
        double norm = 0.0;
        for (double x : nv) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& x : nv) x /= norm;
        v = nv;
        double un = 0.0;
        for (double x : u) un += x * x;
        sigma = std::sqrt(un);
    }
    return sigma;
}

std::vector<double> random_input(rng& gen, std::size_t d) {
    std::vector<double> x(d);
    for (double& v : x) v = gen.normal();
    return x;
}

}  // namespace

TEST_CASE("forward at zero weights hits the activation fixed points") {
    network_config cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {4};
    cfg.k = 3;
    network_params params = init_params(cfg, 1);
    detail::visit_tensors(params, [](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });

    const auto out = forward(params, cfg, {{0.5, -0.2, 1.0}});
    for (double a : out[0].alpha) REQUIRE(a == Catch::Approx(1.0).epsilon(1e-15));
    for (double p : out[0].p) REQUIRE(p == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    REQUIRE(out[0].tau == Catch::Approx(std::log(2.0)).margin(1e-6));
}

TEST_CASE("forward is deterministic and the trace replays bit-exactly") {
    network_config cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {8, 8};
    cfg.k = 3;
    cfg.head_hidden_dims = {4};
    const network_params params = init_params(cfg, 7);
    rng gen(5);
    std::vector<std::vector<double>> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(random_input(gen, 4));

    forward_trace trace;
    const auto a = forward(params, cfg, batch, &trace);
    const auto b = forward(params, cfg, trace.inputs, nullptr);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].alpha == b[i].alpha);
        REQUIRE(a[i].p == b[i].p);
        REQUIRE(a[i].tau == b[i].tau);
        REQUIRE(a[i].alpha == trace.outputs[i].alpha);
        double psum = 0.0;
        for (double p : a[i].p) psum += p;
        REQUIRE(std::abs(psum - 1.0) < 1e-12);
        REQUIRE(a[i].tau >= cfg.tau_floor);
    }
}

TEST_CASE("forward rejects shape mismatches") {
    network_config cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {8};
    cfg.k = 2;
    const network_params params = init_params(cfg, 7);
    REQUIRE_THROWS_AS(forward(params, cfg, {{1.0, 2.0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(forward(params, cfg, {}), std::invalid_argument);
}

TEST_CASE("alpha logits are clamped") {
    network_config cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {2};
    cfg.k = 2;
    network_params params = init_params(cfg, 3);
    // crank the alpha head so the raw logit exceeds the clamp
    for (double& w : params.alpha_head.w.data) w = 1000.0;
    for (double& b : params.alpha_head.b) b = 1000.0;
    const auto out = forward(params, cfg, {{5.0, 5.0}});
    for (double a : out[0].alpha) REQUIRE(a <= std::exp(30.0) * (1.0 + 1e-12));
}

TEST_CASE("ablations override the heads") {
    network_config cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {6};
    cfg.k = 4;
    const network_params params = init_params(cfg, 11);
    rng gen(13);
    const std::vector<std::vector<double>> batch{random_input(gen, 3)};

    network_config fix_tau_cfg = cfg;
    fix_tau_cfg.ablation = ablation_mode::fix_tau;
    REQUIRE(forward(params, fix_tau_cfg, batch)[0].tau == 1.0);

    network_config fix_pu_cfg = cfg;
    fix_pu_cfg.ablation = ablation_mode::fix_p_uniform;
    const auto uniform_out = forward(params, fix_pu_cfg, batch)[0];
    for (double p : uniform_out.p) REQUIRE(p == Catch::Approx(0.25).epsilon(1e-15));

    network_config fix_pn_cfg = cfg;
    fix_pn_cfg.ablation = ablation_mode::fix_p_normalized;
    const auto out = forward(params, fix_pn_cfg, batch)[0];
    const double a0 = out.alpha0();
    for (std::size_t k = 0; k < 4; ++k)
        REQUIRE(out.p[k] == Catch::Approx(out.alpha[k] / a0).epsilon(1e-14));
}

TEST_CASE("backward is linear in the upstream gradient") {
    network_config cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {5};
    cfg.k = 2;
    cfg.head_hidden_dims = {3};
    const network_params params = init_params(cfg, 17);
    rng gen(19);
    const std::vector<std::vector<double>> batch{random_input(gen, 3)};
    forward_trace trace;
    forward(params, cfg, batch, &trace);

    loss_gradients zero;
    zero.d_alpha.assign(2, 0.0);
    zero.d_p.assign(2, 0.0);
    zero.d_tau = 0.0;
    network_grads gz = backward(params, cfg, trace, {zero});
    detail::visit_tensors(gz, [](std::vector<double>& t) {
        for (double v : t) REQUIRE(v == 0.0);
    });

    loss_gradients one;
    one.d_alpha = {0.3, -0.2};
    one.d_p = {0.1, -0.1};
    one.d_tau = 0.7;
    loss_gradients two = one;
    for (double& v : two.d_alpha) v *= 2.0;
    for (double& v : two.d_p) v *= 2.0;
    two.d_tau *= 2.0;

    network_grads g1 = backward(params, cfg, trace, {one});
    network_grads g2 = backward(params, cfg, trace, {two});
    std::vector<std::vector<double>*> t1, t2;
    detail::visit_tensors(g1, [&](std::vector<double>& t) { t1.push_back(&t); });
    detail::visit_tensors(g2, [&](std::vector<double>& t) { t2.push_back(&t); });
    for (std::size_t t = 0; t < t1.size(); ++t)
        for (std::size_t j = 0; j < t1[t]->size(); ++j)
            REQUIRE((*t2[t])[j] == Catch::Approx(2.0 * (*t1[t])[j]).margin(1e-15));
}

TEST_CASE("gradient check on a 2-16-2 network") {
    network_config cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {16};
    cfg.k = 2;
    cfg.head_hidden_dims = {4};
    rng gen(23);
    for (int rep = 0; rep < 3; ++rep) {
        const network_params params = init_params(cfg, 100 + rep);
        const double err = gradient_check(params, cfg, random_input(gen, 2), rep % 2, 1e-5);
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("gradient check covers every ablation") {
    network_config cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {6};
    cfg.k = 3;
    cfg.head_hidden_dims = {4};
    rng gen(29);
    const auto input = random_input(gen, 3);
    for (ablation_mode mode : {ablation_mode::none, ablation_mode::fix_p_uniform,
                               ablation_mode::fix_p_normalized, ablation_mode::fix_tau}) {
        network_config c = cfg;
        c.ablation = mode;
        const network_params params = init_params(c, 31);
        REQUIRE(gradient_check(params, c, input, 1, 1e-5) < 1e-4);
    }
}

TEST_CASE("gradient check at zero weights with a symmetric label") {
    network_config cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {4};
    cfg.k = 2;
    network_params params = init_params(cfg, 37);
    detail::visit_tensors(params, [](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });
    const double err = gradient_check(params, cfg, {0.3, -0.4}, 0, 1e-5);
    REQUIRE(std::isfinite(err));
    REQUIRE(err < 1e-4);
}

TEST_CASE("spectral_normalize: identity and diagonal cases") {
    network_config cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {2};
    cfg.k = 2;
    cfg.power_iterations = 200;
    network_params params = init_params(cfg, 41);

    // W = identity stays identity
    params.feature[0].w.at(0, 0) = 1.0;
    params.feature[0].w.at(0, 1) = 0.0;
    params.feature[0].w.at(1, 0) = 0.0;
    params.feature[0].w.at(1, 1) = 1.0;
    spectral_normalize(params, cfg);
    REQUIRE(params.feature[0].w.at(0, 0) == Catch::Approx(1.0).epsilon(1e-9));
    REQUIRE(params.feature[0].w.at(1, 1) == Catch::Approx(1.0).epsilon(1e-9));

    // W = diag(2, 0.5) -> diag(1, 0.25)
    params.feature[0].w.at(0, 0) = 2.0;
    params.feature[0].w.at(1, 1) = 0.5;
    spectral_normalize(params, cfg);
    REQUIRE(params.feature[0].w.at(0, 0) == Catch::Approx(1.0).epsilon(1e-9));
    REQUIRE(params.feature[0].w.at(1, 1) == Catch::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("spectral_normalize drives sigma to one on random matrices") {
    network_config cfg;
    cfg.input_dim = 32;
    cfg.hidden_dims = {32};
    cfg.k = 2;
    cfg.power_iterations = 100;
    network_params params = init_params(cfg, 43);
    spectral_normalize(params, cfg);
    const double sigma = exact_sigma(params.feature[0].w);
    REQUIRE(sigma > 1.0 - 1e-3);
    REQUIRE(sigma < 1.0 + 1e-3);
    // warm-started single iterations keep it there
    network_config one_iter = cfg;
    one_iter.power_iterations = 1;
    for (int i = 0; i < 3; ++i) spectral_normalize(params, one_iter);
    const double sigma2 = exact_sigma(params.feature[0].w);
    REQUIRE(sigma2 > 1.0 - 1e-3);
    REQUIRE(sigma2 < 1.0 + 1e-3);
}

TEST_CASE("normalized extractor is 1-Lipschitz") {
    network_config cfg;
    cfg.input_dim = 6;
    cfg.hidden_dims = {16, 16};
    cfg.k = 2;
    cfg.power_iterations = 100;
    network_params params = init_params(cfg, 47);
    spectral_normalize(params, cfg);

    rng gen(53);
    for (int rep = 0; rep < 50; ++rep) {
        const auto x = random_input(gen, 6);
        auto y = x;
        for (double& v : y) v += 0.1 * gen.normal();

        forward_trace tx, ty;
        forward(params, cfg, {x}, &tx);
        forward(params, cfg, {y}, &ty);
        const auto& fx = tx.feature_act.back()[0];
        const auto& fy = ty.feature_act.back()[0];
        double df = 0.0, dx = 0.0;
        for (std::size_t j = 0; j < fx.size(); ++j) df += (fx[j] - fy[j]) * (fx[j] - fy[j]);
        for (std::size_t j = 0; j < x.size(); ++j) dx += (x[j] - y[j]) * (x[j] - y[j]);
        REQUIRE(std::sqrt(df) <= std::sqrt(dx) * (1.0 + 1e-3));
    }
}
