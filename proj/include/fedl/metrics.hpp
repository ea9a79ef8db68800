#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedl/data.hpp"
#include "fedl/network.hpp"
#include "fedl/trainer.hpp"
#include "fedl/uncertainty.hpp"

namespace fedl {

// A ranking metric was requested on degenerate labels (single class).
struct metric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ranking_result {
    double aupr = 0.0;
    double auroc = 0.0;
    long n_pos = 0;
    long n_neg = 0;
};

struct task_report {
    std::string task;
    std::string dataset;
    std::string score_convention;
    std::map<std::string, double> metrics;
};

inline double accuracy(std::span<const std::size_t> predictions, std::span<const int> labels) {
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: length mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (labels[i] >= 0 && predictions[i] == static_cast<std::size_t>(labels[i])) ++correct;
    return static_cast<double>(correct) / predictions.size();
}

// AUROC as the Mann-Whitney statistic with ties credited 0.5, computed in
// integer arithmetic (doubled wins) so it matches the brute-force pairwise
// statistic exactly. AUPR is step-wise average precision with tied scores
// grouped per threshold.
inline ranking_result ranking_metrics(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("ranking_metrics: length mismatch");
    ranking_result res;
    for (int l : labels) (l ? res.n_pos : res.n_neg) += 1;
    if (res.n_pos == 0 || res.n_neg == 0)
        throw metric_error("ranking_metrics: labels contain a single class");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    long long won2 = 0;  // 2*wins + ties over (pos, neg) pairs
    double ap = 0.0;
    long neg_seen = 0, pos_seen = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        long pos_block = 0, neg_block = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] ? pos_block : neg_block) += 1;
            ++j;
        }
        const long neg_after = res.n_neg - neg_seen - neg_block;
        won2 += static_cast<long long>(pos_block) * (neg_block + 2 * neg_after);
        pos_seen += pos_block;
        neg_seen += neg_block;
        if (pos_block > 0)
            ap += static_cast<double>(pos_block) * pos_seen / (pos_seen + neg_seen);
        i = j;
    }
    res.auroc = static_cast<double>(won2) / (2.0 * res.n_pos * res.n_neg);
    res.aupr = ap / static_cast<double>(res.n_pos);
    return res;
}

// Mean multiclass Brier score: mean_i sum_k (prob_ik - y_ik)^2.
inline double brier_score(const std::vector<std::vector<double>>& expected_probs,
                          std::span<const int> labels) {
    if (expected_probs.empty()) throw std::invalid_argument("brier_score: empty input");
    if (expected_probs.size() != labels.size())
        throw std::invalid_argument("brier_score: length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < expected_probs.size(); ++i) {
        for (std::size_t k = 0; k < expected_probs[i].size(); ++k) {
            const double y = static_cast<long>(k) == labels[i] ? 1.0 : 0.0;
            const double d = expected_probs[i][k] - y;
            total += d * d;
        }
    }
    return total / static_cast<double>(expected_probs.size());
}

struct model {
    network_params params;
    network_config config;
};

inline std::vector<uncertainty_report> score_dataset(const model& m,
                                                     const labeled_dataset& ds) {
    const auto fds = forward(m.params, m.config, ds.features, nullptr);
    std::vector<uncertainty_report> out;
    out.reserve(fds.size());
    for (const auto& fd : fds) out.push_back(uncertainties(fd));
    return out;
}

// Confidence = negative aleatoric uncertainty; labels: correct = 1,
// incorrect = 0. Degenerate all-correct/all-wrong predictions surface the
// underlying metric error.
inline task_report run_misclassification_detection(const model& m, const labeled_dataset& ds) {
    ds.validate();
    if (ds.size() == 0) throw std::invalid_argument("misclassification: empty dataset");
    const auto reports = score_dataset(m, ds);
    std::vector<double> scores(reports.size());
    std::vector<int> correct(reports.size());
    std::vector<std::size_t> preds(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        scores[i] = -reports[i].aleatoric;
        preds[i] = reports[i].predicted_class;
        correct[i] = reports[i].predicted_class == static_cast<std::size_t>(ds.labels[i]) ? 1 : 0;
    }
    const ranking_result rank = ranking_metrics(scores, correct);
    task_report rep;
    rep.task = "misclassification_detection";
    rep.dataset = ds.name;
    rep.score_convention = "-aleatoric; correct=1, incorrect=0";
    rep.metrics["accuracy"] = accuracy(preds, ds.labels);
    rep.metrics["aupr"] = rank.aupr;
    rep.metrics["auroc"] = rank.auroc;
    return rep;
}

// Scores = negative epistemic uncertainty; labels: ID = 1, OOD = 0.
inline task_report run_ood_detection(const model& m, const labeled_dataset& id_set,
                                     const labeled_dataset& ood_set) {
    if (id_set.size() == 0 || ood_set.size() == 0)
        throw std::invalid_argument("ood_detection: empty dataset");
    const auto id_reports = score_dataset(m, id_set);
    const auto ood_reports = score_dataset(m, ood_set);
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(id_reports.size() + ood_reports.size());
    for (const auto& r : id_reports) {
        scores.push_back(-r.epistemic);
        labels.push_back(1);
    }
    for (const auto& r : ood_reports) {
        scores.push_back(-r.epistemic);
        labels.push_back(0);
    }
    const ranking_result rank = ranking_metrics(scores, labels);
    task_report rep;
    rep.task = "ood_detection";
    rep.dataset = id_set.name + " vs " + ood_set.name;
    rep.score_convention = "-epistemic; id=1, ood=0";
    rep.metrics["aupr"] = rank.aupr;
    rep.metrics["auroc"] = rank.auroc;
    rep.metrics["n_id"] = static_cast<double>(rank.n_pos);
    rep.metrics["n_ood"] = static_cast<double>(rank.n_neg);
    return rep;
}

struct scaling_point {
    std::size_t size = 0;
    double mean_epistemic = 0.0;
    double accuracy = 0.0;
    bool diverged = false;
};

struct scaling_result {
    std::vector<scaling_point> points;
    std::size_t heldout_size = 0;
};

// Trains one model per size on a nested subset chain and evaluates mean
// epistemic uncertainty and accuracy on a fixed held-out set. Divergence at
// one size is recorded and the sweep continues.
inline scaling_result data_scaling_experiment(const network_config& net_config,
                                              const train_config& config,
                                              std::span<const std::size_t> sizes,
                                              const labeled_dataset& dataset,
                                              std::ostream* progress = nullptr) {
    if (sizes.empty()) throw std::invalid_argument("scaling: sizes must be non-empty");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw std::invalid_argument("scaling: sizes must be strictly ascending");

    // fixed held-out set, then a shuffled pool whose prefixes form the chain
    const split_result held = split(dataset, 0.8, config.seed ^ 0x48e1dULL);
    const labeled_dataset& pool = held.part_a;
    const labeled_dataset& heldout = held.part_b;
    if (sizes.back() > pool.size())
        throw std::invalid_argument("scaling: largest size exceeds the data pool");

    rng order_gen(config.seed ^ 0x9d5cULL);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(order_gen.uniform() * i)]);

    scaling_result res;
    res.heldout_size = heldout.size();
    for (std::size_t s : sizes) {
        labeled_dataset subset;
        subset.k = pool.k;
        subset.name = pool.name + "/n" + std::to_string(s);
        for (std::size_t i = 0; i < s; ++i) {
            subset.features.push_back(pool.features[order[i]]);
            subset.labels.push_back(pool.labels[order[i]]);
            subset.roles.push_back(pool.roles[order[i]]);
        }
        scaling_point pt;
        pt.size = s;
        try {
            const train_result tr = train(net_config, config, subset, progress);
            const model m{tr.params, net_config};
            const auto reports = score_dataset(m, heldout);
            double eu = 0.0;
            std::vector<std::size_t> preds(reports.size());
            for (std::size_t i = 0; i < reports.size(); ++i) {
                eu += reports[i].epistemic;
                preds[i] = reports[i].predicted_class;
            }
            pt.mean_epistemic = eu / static_cast<double>(reports.size());
            pt.accuracy = accuracy(preds, heldout.labels);
        } catch (const divergence_error&) {
            pt.diverged = true;
        }
        res.points.push_back(pt);
    }
    return res;
}

// Spearman rank correlation (no-tie variant; inputs here are strictly
// ordered sizes against measured values).
inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two aligned samples");
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = rx[i] - ry[i];
        d2 += d * d;
    }
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace fedl
