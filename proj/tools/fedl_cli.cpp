// fedl: flexible-Dirichlet evidential classifier toolkit.
//
// Subcommands: synth, train, eval, ood, predict, sample, scaling, ablate,
// verify. Exit codes: 0 success, 1 usage, 2 data/format, 3 verification
// failure, 4 training divergence. FEDL_SEED provides the default seed.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedl/fedl.hpp"

using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_verification = 3;
constexpr int exit_divergence = 4;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("FEDL_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw std::invalid_argument("FEDL_SEED is not a valid integer");
        }
    }
    return 0;
}

int fail(int code, const std::string& message) {
    json err{{"error", message}, {"code", code}};
    std::cerr << err.dump() << "\n";
    return code;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct run_context {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

void emit_record(const run_context& ctx, const std::string& task, const std::string& dataset,
                 const std::string& metric, double value) {
    json rec{{"task", task},   {"dataset", dataset},
             {"metric", metric}, {"value", value},
             {"seed", ctx.seed}, {"config_hash", ctx.config_hash}};
    std::cout << rec.dump() << "\n";
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stoull(cell));
    return out;
}

// Shared data-input flags: either a CSV file or an IDX image/label pair.
struct data_input {
    std::string csv;
    std::string images;
    std::string labels;
    std::string label_column = "label";

    void attach(CLI::App* cmd, const std::string& prefix = "") {
        const std::string dash = prefix.empty() ? "" : prefix + "-";
        cmd->add_option("--" + dash + "data", csv, "CSV dataset path");
        cmd->add_option("--" + dash + "images", images, "IDX image file");
        cmd->add_option("--" + dash + "labels", labels, "IDX label file");
        if (prefix.empty())
            cmd->add_option("--label-column", label_column, "CSV label column name");
    }

    fedl::labeled_dataset load() const {
        if (!csv.empty()) return fedl::load_csv(csv, label_column);
        if (!images.empty() && !labels.empty()) return fedl::load_idx(images, labels);
        throw std::invalid_argument("no dataset given; pass --data or --images/--labels");
    }
};

struct cli_options {
    // network
    std::string hidden = "16,16";
    std::string head_hidden = "8";
    int power_iterations = 1;
    std::string ablation = "none";
    // training (defaults mirror the DMNIST-style row, desk scale)
    fedl::train_config train;
    std::string config_path;
    std::optional<std::uint64_t> seed_flag;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags override)");
        cmd->add_option("--hidden", hidden, "feature extractor widths, comma separated");
        cmd->add_option("--head-hidden", head_hidden,
                        "hidden widths of the p/tau heads (empty for affine heads)");
        cmd->add_option("--power-iterations", power_iterations, "power iterations per pass");
        cmd->add_option("--ablation", ablation,
                        "none | fix_p_uniform | fix_p_normalized | fix_tau");
        cmd->add_option("--epochs", train.max_epochs, "maximum training epochs");
        cmd->add_option("--batch-size", train.batch_size, "mini-batch size");
        cmd->add_option("--lr", train.learning_rate, "Adam learning rate");
        cmd->add_option("--lr-step", train.lr_step_size, "epochs per LR decay step");
        cmd->add_option("--lr-gamma", train.lr_gamma, "LR decay factor");
        cmd->add_option("--patience", train.early_stop_patience, "early-stopping patience");
        cmd->add_option("--val-fraction", train.val_fraction, "validation split fraction");
        auto* seed_opt = cmd->add_option("--seed", "RNG seed (default: FEDL_SEED or 0)");
        seed_opt->each([this](const std::string& v) { seed_flag = std::stoull(v); });
    }

    // Precedence: built-in defaults < config file < flags. Flags are applied
    // by re-reading only those the user actually passed.
    void apply_config_file(CLI::App* cmd) {
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in) throw fedl::data_format_error("cannot open config file " + config_path);
        json cfg;
        try {
            in >> cfg;
        } catch (const json::exception& e) {
            throw fedl::data_format_error(std::string("config parse error: ") + e.what());
        }
        if (cfg.contains("net")) {
            const auto& n = cfg["net"];
            if (n.contains("hidden_dims") && cmd->count("--hidden") == 0) {
                hidden.clear();
                for (const auto& d : n["hidden_dims"])
                    hidden += (hidden.empty() ? "" : ",") + std::to_string(d.get<int>());
            }
            if (n.contains("head_hidden_dims") && cmd->count("--head-hidden") == 0) {
                head_hidden.clear();
                for (const auto& d : n["head_hidden_dims"])
                    head_hidden += (head_hidden.empty() ? "" : ",") + std::to_string(d.get<int>());
            }
            if (n.contains("power_iterations") && cmd->count("--power-iterations") == 0)
                power_iterations = n["power_iterations"].get<int>();
            if (n.contains("ablation") && cmd->count("--ablation") == 0)
                ablation = n["ablation"].get<std::string>();
        }
        if (cfg.contains("train")) {
            const auto& t = cfg["train"];
            auto set_int = [&](const char* key, const char* flag, int& dst) {
                if (t.contains(key) && cmd->count(flag) == 0) dst = t[key].get<int>();
            };
            auto set_double = [&](const char* key, const char* flag, double& dst) {
                if (t.contains(key) && cmd->count(flag) == 0) dst = t[key].get<double>();
            };
            set_int("max_epochs", "--epochs", train.max_epochs);
            set_int("batch_size", "--batch-size", train.batch_size);
            set_double("learning_rate", "--lr", train.learning_rate);
            set_int("lr_step_size", "--lr-step", train.lr_step_size);
            set_double("lr_gamma", "--lr-gamma", train.lr_gamma);
            set_int("early_stop_patience", "--patience", train.early_stop_patience);
            set_double("val_fraction", "--val-fraction", train.val_fraction);
            if (t.contains("seed") && !seed_flag) seed_flag = t["seed"].get<std::uint64_t>();
        }
    }

    fedl::network_config net_config(std::size_t input_dim, std::size_t k) const {
        fedl::network_config net;
        net.input_dim = input_dim;
        net.k = k;
        net.hidden_dims.clear();
        for (std::size_t d : parse_size_list(hidden)) net.hidden_dims.push_back(d);
        net.head_hidden_dims.clear();
        if (!head_hidden.empty())
            for (std::size_t d : parse_size_list(head_hidden)) net.head_hidden_dims.push_back(d);
        net.power_iterations = power_iterations;
        net.ablation = fedl::ablation_from_string(ablation);
        return net;
    }

    run_context context(const fedl::network_config& net) {
        train.seed = seed_flag.value_or(default_seed());
        json merged{{"net", fedl::detail::net_config_to_json(net)},
                    {"train", fedl::detail::train_config_to_json(train)}};
        return {train.seed, fnv1a(merged.dump())};
    }
};

int run_synth(const fedl::synth_config& cfg, const std::string& out_path) {
    const fedl::labeled_dataset ds = fedl::synth_generate(cfg);
    fedl::save_csv(ds, out_path);
    run_context ctx{cfg.seed, fnv1a(json{{"synth", {{"k", cfg.k}, {"n", cfg.n_per_class}}}}.dump())};
    emit_record(ctx, "synth", out_path, "rows", static_cast<double>(ds.size()));
    return exit_ok;
}

int run_train(cli_options& opts, CLI::App* cmd, const data_input& input,
              const std::string& out_path) {
    opts.apply_config_file(cmd);
    const fedl::labeled_dataset full = input.load();
    const fedl::labeled_dataset ds = full.id_subset();
    const fedl::network_config net = opts.net_config(ds.dim(), static_cast<std::size_t>(ds.k));
    const run_context ctx = opts.context(net);

    const fedl::train_result res = fedl::train(net, opts.train, ds);
    fedl::save_checkpoint(out_path, fedl::make_checkpoint(net, opts.train, res));
    emit_record(ctx, "train", ds.name, "best_epoch", res.history.best_epoch);
    emit_record(ctx, "train", ds.name, "best_val_loss",
                res.history.val_loss[static_cast<std::size_t>(res.history.best_epoch)]);
    emit_record(ctx, "train", ds.name, "best_val_acc",
                res.history.val_acc[static_cast<std::size_t>(res.history.best_epoch)]);
    return exit_ok;
}

int run_eval(const std::string& model_path, const data_input& input) {
    const fedl::checkpoint ckpt = fedl::load_checkpoint(model_path);
    const fedl::model m{ckpt.params, ckpt.net_config};
    const fedl::labeled_dataset ds = input.load().id_subset();
    run_context ctx{ckpt.seed, fnv1a(fedl::detail::net_config_to_json(ckpt.net_config).dump())};

    const auto fds = fedl::forward(m.params, m.config, ds.features);
    std::vector<std::size_t> preds(fds.size());
    std::vector<std::vector<double>> probs(fds.size());
    for (std::size_t i = 0; i < fds.size(); ++i) {
        preds[i] = fedl::predict(fds[i]);
        probs[i] = fedl::fd_mean(fds[i]).pi;
    }
    emit_record(ctx, "eval", ds.name, "accuracy", fedl::accuracy(preds, ds.labels));
    const double brier = fedl::brier_score(probs, ds.labels);
    emit_record(ctx, "eval", ds.name, "brier", brier);
    emit_record(ctx, "eval", ds.name, "brier_x100", brier * 100.0);
    const fedl::task_report rep = fedl::run_misclassification_detection(m, ds);
    emit_record(ctx, "eval", ds.name, "misclassification_aupr", rep.metrics.at("aupr"));
    emit_record(ctx, "eval", ds.name, "misclassification_auroc", rep.metrics.at("auroc"));
    return exit_ok;
}

int run_ood(const std::string& model_path, const data_input& id_input,
            const data_input& ood_input, const data_input& combined) {
    const fedl::checkpoint ckpt = fedl::load_checkpoint(model_path);
    const fedl::model m{ckpt.params, ckpt.net_config};
    run_context ctx{ckpt.seed, fnv1a(fedl::detail::net_config_to_json(ckpt.net_config).dump())};

    fedl::labeled_dataset id_set, ood_set;
    if (!combined.csv.empty() || !combined.images.empty()) {
        const fedl::labeled_dataset all = combined.load();
        id_set = all.id_subset();
        ood_set = all.role_subset(fedl::sample_role::ood);
    } else {
        id_set = id_input.load();
        ood_set = ood_input.load();
    }
    const fedl::task_report rep = fedl::run_ood_detection(m, id_set, ood_set);
    emit_record(ctx, "ood", rep.dataset, "aupr", rep.metrics.at("aupr"));
    emit_record(ctx, "ood", rep.dataset, "auroc", rep.metrics.at("auroc"));
    emit_record(ctx, "ood", rep.dataset, "aupr_x100", rep.metrics.at("aupr") * 100.0);
    return exit_ok;
}

int run_predict(const std::string& model_path, const data_input& input) {
    const fedl::checkpoint ckpt = fedl::load_checkpoint(model_path);
    const fedl::labeled_dataset ds = input.load();
    const auto fds = fedl::forward(ckpt.params, ckpt.net_config, ds.features);
    for (std::size_t i = 0; i < fds.size(); ++i) {
        const fedl::uncertainty_report rep = fedl::uncertainties(fds[i]);
        json line{{"row", i},
                  {"alpha", fds[i].alpha},
                  {"p", fds[i].p},
                  {"tau", fds[i].tau},
                  {"predicted_class", rep.predicted_class},
                  {"expected_probs", rep.expected_probs},
                  {"total", rep.total},
                  {"aleatoric", rep.aleatoric},
                  {"epistemic", rep.epistemic}};
        std::cout << line.dump() << "\n";
    }
    return exit_ok;
}

int run_sample(const std::string& alpha_csv, const std::string& p_csv, double tau, std::size_t n,
               std::uint64_t seed) {
    fedl::fd_params params;
    params.alpha = parse_double_list(alpha_csv);
    params.p = parse_double_list(p_csv);
    params.tau = tau;
    fedl::rng gen(seed);
    for (const auto& pt : fedl::fd_sample(params, gen, n)) {
        std::string line;
        for (double v : pt.pi) line += (line.empty() ? "" : ",") + fedl::detail::format_double(v);
        std::cout << line << "\n";
    }
    return exit_ok;
}

int run_scaling(cli_options& opts, CLI::App* cmd, const data_input& input,
                const std::string& sizes_csv) {
    opts.apply_config_file(cmd);
    const fedl::labeled_dataset ds = input.load().id_subset();
    const std::vector<std::size_t> sizes = parse_size_list(sizes_csv);
    const fedl::network_config net = opts.net_config(ds.dim(), static_cast<std::size_t>(ds.k));
    const run_context ctx = opts.context(net);

    const fedl::scaling_result res =
        fedl::data_scaling_experiment(net, opts.train, sizes, ds, nullptr);
    std::vector<double> xs, eus;
    for (const auto& pt : res.points) {
        emit_record(ctx, "scaling", ds.name + "/n" + std::to_string(pt.size), "mean_epistemic",
                    pt.mean_epistemic);
        emit_record(ctx, "scaling", ds.name + "/n" + std::to_string(pt.size), "accuracy",
                    pt.accuracy);
        if (pt.diverged)
            emit_record(ctx, "scaling", ds.name + "/n" + std::to_string(pt.size), "diverged", 1.0);
        else {
            xs.push_back(static_cast<double>(pt.size));
            eus.push_back(pt.mean_epistemic);
        }
    }
    if (xs.size() >= 2)
        emit_record(ctx, "scaling", ds.name, "spearman_size_vs_eu", fedl::spearman(xs, eus));
    return exit_ok;
}

int run_ablate(cli_options& opts, CLI::App* cmd, const data_input& input, int n_seeds) {
    opts.apply_config_file(cmd);
    const fedl::labeled_dataset all = input.load();
    const fedl::labeled_dataset id = all.id_subset();
    const fedl::labeled_dataset ood = all.role_subset(fedl::sample_role::ood);

    const std::vector<std::string> variants{"none", "fix_p_uniform", "fix_p_normalized",
                                            "fix_tau"};
    for (const std::string& variant : variants) {
        cli_options v = opts;
        v.ablation = variant;
        for (int s = 0; s < n_seeds; ++s) {
            fedl::network_config net = v.net_config(id.dim(), static_cast<std::size_t>(id.k));
            run_context ctx = v.context(net);
            ctx.seed += static_cast<std::uint64_t>(s);
            v.train.seed = ctx.seed;
            try {
                const fedl::train_result res = fedl::train(net, v.train, id, nullptr);
                const fedl::model m{res.params, net};
                const std::string tag = variant + "/seed" + std::to_string(ctx.seed);
                if (ood.size() > 0) {
                    const fedl::task_report rep = fedl::run_ood_detection(m, id, ood);
                    emit_record(ctx, "ablate", tag, "ood_aupr", rep.metrics.at("aupr"));
                    emit_record(ctx, "ablate", tag, "ood_auroc", rep.metrics.at("auroc"));
                }
                const auto fds = fedl::forward(m.params, net, id.features);
                std::vector<std::size_t> preds(fds.size());
                for (std::size_t i = 0; i < fds.size(); ++i) preds[i] = fedl::predict(fds[i]);
                emit_record(ctx, "ablate", tag, "accuracy", fedl::accuracy(preds, id.labels));
            } catch (const fedl::divergence_error& e) {
                emit_record(ctx, "ablate", variant + "/seed" + std::to_string(ctx.seed),
                            "diverged_epoch", e.epoch);
            }
        }
    }
    return exit_ok;
}

// Executable verification of the closed-form identities against the oracles;
// one summary line each, nonzero exit on any failure.
int run_verify(std::uint64_t seed) {
    using namespace fedl;
    int failures = 0;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        std::cout << "verify " << name << ": " << (ok ? "PASS" : "FAIL") << " (" << detail << ")\n";
        if (!ok) ++failures;
    };
    rng gen(seed);

    auto random_params = [&](std::size_t k) {
        fd_params p;
        p.alpha.resize(k);
        for (auto& a : p.alpha) a = 0.2 + 4.8 * gen.uniform();
        p.p = gen.dirichlet(std::vector<double>(k, 1.0));
        p.tau = 0.1 + 5.0 * gen.uniform();
        return p;
    };

    {  // Dirichlet reduction of the density
        double worst = 0.0;
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t k = std::vector<std::size_t>{2, 3, 10}[rep % 3];
            fd_params params = random_params(k);
            params.tau = 1.0;
            const double a0 = params.alpha0();
            for (std::size_t j = 0; j < k; ++j) params.p[j] = params.alpha[j] / a0;
            const dirichlet_params dir{params.alpha};
            for (int i = 0; i < 100; ++i) {
                const simplex_point pt{gen.dirichlet(std::vector<double>(k, 1.0))};
                worst = std::max(worst, std::abs(fd_log_density(params, pt) -
                                                 dirichlet_log_density(dir, pt)));
            }
        }
        report("dirichlet_reduction", worst < 1e-10, "max abs diff " + std::to_string(worst));
    }
    {  // Dirichlet-mixture identity
        double worst = 0.0;
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t k = std::vector<std::size_t>{2, 3, 10}[rep % 3];
            const fd_params params = random_params(k);
            for (int i = 0; i < 100; ++i) {
                const simplex_point pt{gen.dirichlet(std::vector<double>(k, 1.0))};
                std::vector<double> terms;
                for (std::size_t j = 0; j < k; ++j) {
                    if (params.p[j] == 0.0) continue;
                    dirichlet_params comp{params.alpha};
                    comp.alpha[j] += params.tau;
                    terms.push_back(std::log(params.p[j]) + dirichlet_log_density(comp, pt));
                }
                worst = std::max(worst,
                                 relative_diff(fd_log_density(params, pt), log_sum_exp(terms)));
            }
        }
        report("mixture_identity", worst < 1e-10, "max rel diff " + std::to_string(worst));
    }
    {  // predictive decomposition + posterior-mean identity
        double worst = 0.0;
        for (int rep = 0; rep < 1000; ++rep) {
            const fd_params params = random_params(2 + rep % 5);
            const auto mix = predictive_decomposition(params);
            const auto mean = fd_mean(params);
            double s = 0.0;
            for (std::size_t j = 0; j < params.k(); ++j)
                s += params.alpha[j] + params.tau * params.p[j];
            for (std::size_t j = 0; j < params.k(); ++j) {
                worst = std::max(worst, std::abs(mix.p_pred[j] - mean.pi[j]));
                const double dir_mean = (params.alpha[j] + params.tau * params.p[j]) / s;
                worst = std::max(worst, std::abs(mean.pi[j] - dir_mean));
            }
            worst = std::max(worst, std::abs(mix.w_edl + mix.w_sm - 1.0));
        }
        report("predictive_decomposition", worst < 1e-12, "max diff " + std::to_string(worst));
    }
    {  // conjugacy against the grid-Bayes oracle (inside its accuracy domain)
        double worst = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            fd_params prior;
            prior.alpha = {2.0 + 2.0 * gen.uniform(), 2.0 + 2.0 * gen.uniform()};
            prior.p = {0.2 + 0.6 * gen.uniform(), 0.0};
            prior.p[1] = 1.0 - prior.p[0];
            prior.tau = 1.0 + 2.0 * gen.uniform();
            const std::vector<double> counts{std::floor(6.0 * gen.uniform()),
                                             std::floor(4.0 * gen.uniform())};
            const auto oracle = grid_posterior_oracle(prior, counts, grid_spec{1000, 2});
            const fd_params post = fd_posterior(prior, counts);
            for (std::size_t i = 0; i < oracle.points.size(); ++i)
                worst = std::max(worst,
                                 relative_diff(oracle.density[i],
                                               std::exp(fd_log_density(post, oracle.points[i]))));
        }
        report("conjugate_posterior", worst < 1e-4, "max rel diff " + std::to_string(worst));
    }
    {  // moments against the FG sampler
        bool ok = true;
        for (int rep = 0; rep < 5; ++rep) {
            const fd_params params = random_params(2 + rep % 3);
            const auto est = mc_moments(params, gen, 200000);
            const auto mean = fd_mean(params);
            const auto var = fd_variance(params);
            for (std::size_t j = 0; j < params.k(); ++j) {
                ok &= std::abs(est.mean[j] - mean.pi[j]) < 3.0 * est.mean_se[j] + 1e-9;
                ok &= std::abs(est.variance[j] - var[j]) < 3.0 * est.variance_se[j] + 1e-9;
            }
        }
        report("sampling_moments", ok, "2e5 draws, 3 standard errors");
    }
    {  // network gradients
        double worst = 0.0;
        for (int rep = 0; rep < 3; ++rep) {
            network_config cfg;
            cfg.input_dim = 2;
            cfg.hidden_dims = {16};
            cfg.k = 2;
            cfg.head_hidden_dims = {4};
            const network_params params = init_params(cfg, seed + rep);
            std::vector<double> input{gen.normal(), gen.normal()};
            worst = std::max(worst, gradient_check(params, cfg, input, rep % 2, 1e-5));
        }
        report("network_gradients", worst < 1e-4, "max rel err " + std::to_string(worst));
    }
    {  // spectral normalization
        network_config cfg;
        cfg.input_dim = 32;
        cfg.hidden_dims = {32};
        cfg.k = 2;
        cfg.power_iterations = 100;
        network_params params = init_params(cfg, seed);
        spectral_normalize(params, cfg);
        // dense sigma oracle
        const matrix& w = params.feature[0].w;
        std::vector<double> v(w.cols, 1.0 / std::sqrt(static_cast<double>(w.cols)));
        double sigma = 0.0;
        for (int it = 0; it < 3000; ++it) {
            std::vector<double> u(w.rows, 0.0);
            for (std::size_t i = 0; i < w.rows; ++i)
                for (std::size_t j = 0; j < w.cols; ++j) u[i] += w.at(i, j) * v[j];
            std::vector<double> nv(w.cols, 0.0);
            for (std::size_t i = 0; i < w.rows; ++i)
                for (std::size_t j = 0; j < w.cols; ++j) nv[j] += w.at(i, j) * u[i];
            double norm = 0.0;
            for (double x : nv) norm += x * x;
            norm = std::sqrt(norm);
            for (double& x : nv) x /= norm;
            v = nv;
            double un = 0.0;
            for (double x : u) un += x * x;
            sigma = std::sqrt(un);
        }
        report("spectral_norm", std::abs(sigma - 1.0) < 1e-3,
               "sigma " + std::to_string(sigma));
    }
    {  // variance decomposition
        double worst = 0.0;
        for (int rep = 0; rep < 500; ++rep) {
            const fd_params params = random_params(2 + rep % 5);
            const auto u = uncertainties(params);
            worst = std::max(worst, std::abs(u.total - (u.aleatoric_raw + u.epistemic)));
            double var_sum = 0.0;
            for (double vv : fd_variance(params)) var_sum += vv;
            worst = std::max(worst, relative_diff(u.epistemic, var_sum));
        }
        report("variance_decomposition", worst < 1e-12, "max diff " + std::to_string(worst));
    }
    std::cout << (failures == 0 ? "verify: all checks passed\n"
                                : "verify: " + std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? exit_ok : exit_verification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flexible-Dirichlet evidential classifier toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    fedl::synth_config synth_cfg;
    std::string synth_out;
    bool synth_seed_given = false;
    synth->add_option("--out", synth_out, "output CSV path")->required();
    synth->add_option("--k", synth_cfg.k, "number of classes");
    synth->add_option("--n-per-class", synth_cfg.n_per_class, "head-class sample count");
    synth->add_option("--dim", synth_cfg.dim, "feature dimension");
    synth->add_option("--separation", synth_cfg.class_separation, "circle radius of class means");
    synth->add_option("--sigma", synth_cfg.noise_sigma, "Gaussian noise scale");
    synth->add_option("--n-ambiguous", synth_cfg.n_ambiguous, "midpoint ambiguous samples");
    synth->add_option("--n-ood", synth_cfg.n_ood, "OOD samples");
    synth->add_option("--ood-offset", synth_cfg.ood_offset, "OOD displacement");
    synth->add_option("--rho", synth_cfg.imbalance_rho, "imbalance factor (1 = balanced)");
    synth->add_option("--seed", "RNG seed")->each([&](const std::string& v) {
        synth_cfg.seed = std::stoull(v);
        synth_seed_given = true;
    });

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model");
    cli_options train_opts;
    data_input train_input;
    std::string train_out;
    train_input.attach(train_cmd);
    train_opts.attach(train_cmd);
    train_cmd->add_option("--out", train_out, "checkpoint output path")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "accuracy, Brier, misclassification detection");
    std::string eval_model;
    data_input eval_input;
    eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
    eval_input.attach(eval_cmd);

    // ood
    auto* ood_cmd = app.add_subcommand("ood", "OOD detection report");
    std::string ood_model;
    data_input ood_combined, ood_id, ood_ood;
    ood_cmd->add_option("--model", ood_model, "checkpoint path")->required();
    ood_combined.attach(ood_cmd);
    ood_id.attach(ood_cmd, "id");
    ood_ood.attach(ood_cmd, "ood");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "per-row FD parameters and uncertainties");
    std::string predict_model;
    data_input predict_input;
    predict_cmd->add_option("--model", predict_model, "checkpoint path")->required();
    predict_input.attach(predict_cmd);

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "draw FD samples for given parameters");
    std::string sample_alpha, sample_p;
    double sample_tau = 1.0;
    std::size_t sample_n = 1;
    std::optional<std::uint64_t> sample_seed;
    sample_cmd->add_option("--alpha", sample_alpha, "concentrations, comma separated")->required();
    sample_cmd->add_option("--p", sample_p, "allocation probabilities")->required();
    sample_cmd->add_option("--tau", sample_tau, "dispersion")->required();
    sample_cmd->add_option("--n", sample_n, "number of samples");
    sample_cmd->add_option("--seed", "RNG seed")->each(
        [&](const std::string& v) { sample_seed = std::stoull(v); });

    // scaling
    auto* scaling_cmd = app.add_subcommand("scaling", "epistemic uncertainty vs training size");
    cli_options scaling_opts;
    data_input scaling_input;
    std::string scaling_sizes = "100,300,1000,3000";
    scaling_input.attach(scaling_cmd);
    scaling_opts.attach(scaling_cmd);
    scaling_cmd->add_option("--sizes", scaling_sizes, "ascending subset sizes");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the fixed-parameter variants");
    cli_options ablate_opts;
    data_input ablate_input;
    int ablate_seeds = 3;
    ablate_input.attach(ablate_cmd);
    ablate_opts.attach(ablate_cmd);
    ablate_cmd->add_option("--runs", ablate_seeds, "seeded runs per variant");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the identity/oracle suite");
    std::optional<std::uint64_t> verify_seed;
    verify_cmd->add_option("--seed", "RNG seed")->each(
        [&](const std::string& v) { verify_seed = std::stoull(v); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : fail(exit_usage, std::string("usage: ") + e.what());
    }

    try {
        if (synth->parsed()) {
            if (!synth_seed_given) synth_cfg.seed = default_seed();
            return run_synth(synth_cfg, synth_out);
        }
        if (train_cmd->parsed()) return run_train(train_opts, train_cmd, train_input, train_out);
        if (eval_cmd->parsed()) return run_eval(eval_model, eval_input);
        if (ood_cmd->parsed()) return run_ood(ood_model, ood_id, ood_ood, ood_combined);
        if (predict_cmd->parsed()) return run_predict(predict_model, predict_input);
        if (sample_cmd->parsed())
            return run_sample(sample_alpha, sample_p, sample_tau, sample_n,
                              sample_seed.value_or(default_seed()));
        if (scaling_cmd->parsed())
            return run_scaling(scaling_opts, scaling_cmd, scaling_input, scaling_sizes);
        if (ablate_cmd->parsed())
            return run_ablate(ablate_opts, ablate_cmd, ablate_input, ablate_seeds);
        if (verify_cmd->parsed()) return run_verify(verify_seed.value_or(default_seed()));
        return fail(exit_usage, "no subcommand given");
    } catch (const fedl::data_format_error& e) {
        return fail(exit_data, e.what());
    } catch (const fedl::checkpoint_error& e) {
        return fail(exit_data, e.what());
    } catch (const fedl::metric_error& e) {
        return fail(exit_data, e.what());
    } catch (const fedl::divergence_error& e) {
        return fail(exit_divergence, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(exit_usage, e.what());
    } catch (const std::exception& e) {
        return fail(exit_data, e.what());
    }
}
