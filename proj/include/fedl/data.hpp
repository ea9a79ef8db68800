#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedl/math.hpp"
#include "fedl/random.hpp"

namespace fedl {

// Malformed external input (IDX/CSV); carries the offending field in what().
struct data_format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class sample_role { clean_id, ambiguous_id, ood };

inline const char* to_string(sample_role r) {
    switch (r) {
        case sample_role::clean_id: return "clean_id";
        case sample_role::ambiguous_id: return "ambiguous_id";
        case sample_role::ood: return "ood";
    }
    return "clean_id";
}

inline sample_role role_from_string(const std::string& s) {
    if (s == "clean_id") return sample_role::clean_id;
    if (s == "ambiguous_id") return sample_role::ambiguous_id;
    if (s == "ood") return sample_role::ood;
    throw data_format_error("unknown sample role: " + s);
}

// Feature matrix with integer labels and role tags. OOD rows carry the
// sentinel label -1.
struct labeled_dataset {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    std::vector<sample_role> roles;
    int k = 0;
    std::string name;

    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features[0].size(); }

    void validate() const {
        if (labels.size() != features.size() || roles.size() != features.size())
            throw std::invalid_argument("labeled_dataset: row counts disagree");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (roles[i] == sample_role::ood) {
                if (labels[i] >= k)
                    throw std::invalid_argument("labeled_dataset: ood label out of range");
            } else if (labels[i] < 0 || labels[i] >= k) {
                throw std::invalid_argument("labeled_dataset: label out of range");
            }
        }
    }

    // Rows usable for supervised training (labels in [0, K)).
    labeled_dataset id_subset() const {
        labeled_dataset out;
        out.k = k;
        out.name = name;
        for (std::size_t i = 0; i < size(); ++i) {
            if (roles[i] == sample_role::ood) continue;
            out.features.push_back(features[i]);
            out.labels.push_back(labels[i]);
            out.roles.push_back(roles[i]);
        }
        return out;
    }

    labeled_dataset role_subset(sample_role r) const {
        labeled_dataset out;
        out.k = k;
        out.name = name;
        for (std::size_t i = 0; i < size(); ++i) {
            if (roles[i] != r) continue;
            out.features.push_back(features[i]);
            out.labels.push_back(labels[i]);
            out.roles.push_back(roles[i]);
        }
        return out;
    }
};

// Synthetic benchmark: K Gaussian blobs on a circle of radius
// class_separation, midpoint ambiguous samples with coin-flip labels between
// the two adjacent classes, one displaced OOD blob, and a geometric
// long-tail profile n_k = n_per_class * rho^(k/(K-1)).
struct synth_config {
    int k = 3;
    int n_per_class = 100;
    int dim = 2;
    double class_separation = 4.0;
    double noise_sigma = 1.0;
    int n_ambiguous = 0;
    int n_ood = 0;
    double ood_offset = 10.0;
    double imbalance_rho = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 2) throw std::invalid_argument("synth_config: K must be >= 2");
        if (n_per_class < 1) throw std::invalid_argument("synth_config: n_per_class must be >= 1");
        if (dim < 2) throw std::invalid_argument("synth_config: dim must be >= 2");
        if (!(class_separation > 0.0))
            throw std::invalid_argument("synth_config: class_separation must be positive");
        if (!(noise_sigma > 0.0))
            throw std::invalid_argument("synth_config: noise_sigma must be positive");
        if (n_ambiguous < 0 || n_ood < 0)
            throw std::invalid_argument("synth_config: counts must be non-negative");
        if (!(ood_offset > 0.0))
            throw std::invalid_argument("synth_config: ood_offset must be positive");
        if (!(imbalance_rho > 0.0 && imbalance_rho <= 1.0))
            throw std::invalid_argument("synth_config: imbalance_rho must lie in (0,1]");
    }
};

inline std::vector<std::vector<double>> synth_class_means(const synth_config& config) {
    std::vector<std::vector<double>> means(config.k, std::vector<double>(config.dim, 0.0));
    for (int c = 0; c < config.k; ++c) {
        const double angle = 2.0 * pi * c / config.k;
        means[c][0] = config.class_separation * std::cos(angle);
        means[c][1] = config.class_separation * std::sin(angle);
    }
    return means;
}

inline labeled_dataset synth_generate(const synth_config& config, rng& gen) {
    config.validate();
    const auto means = synth_class_means(config);
    labeled_dataset ds;
    ds.k = config.k;
    ds.name = "synth";

    auto noisy_point = [&](const std::vector<double>& center) {
        std::vector<double> x(config.dim);
        for (int d = 0; d < config.dim; ++d) x[d] = center[d] + config.noise_sigma * gen.normal();
        return x;
    };

    // clean ID with the geometric long-tail profile (head/tail = 1/rho)
    for (int c = 0; c < config.k; ++c) {
        const double frac = config.k == 1 ? 0.0 : static_cast<double>(c) / (config.k - 1);
        const long n_c = std::lround(config.n_per_class * std::pow(config.imbalance_rho, frac));
        for (long i = 0; i < n_c; ++i) {
            ds.features.push_back(noisy_point(means[c]));
            ds.labels.push_back(c);
            ds.roles.push_back(sample_role::clean_id);
        }
    }

    // ambiguous ID at adjacent-pair midpoints, label decided by a fair coin
    const int n_pairs = config.k == 2 ? 1 : config.k;
    for (int i = 0; i < config.n_ambiguous; ++i) {
        const int pair = i % n_pairs;
        const int a = pair;
        const int b = (pair + 1) % config.k;
        std::vector<double> mid(config.dim);
        for (int d = 0; d < config.dim; ++d) mid[d] = 0.5 * (means[a][d] + means[b][d]);
        ds.features.push_back(noisy_point(mid));
        ds.labels.push_back(gen.uniform() < 0.5 ? a : b);
        ds.roles.push_back(sample_role::ambiguous_id);
    }

    // OOD blob displaced from every class mean by at least ood_offset,
    // placed on the bisector between two adjacent classes so it does not
    // extrapolate any single class's direction
    if (config.n_ood > 0) {
        const double angle = config.k == 2 ? pi / 2.0 : pi / config.k;
        const double radius = config.class_separation + config.ood_offset;
        std::vector<double> center(config.dim, 0.0);
        center[0] = radius * std::cos(angle);
        center[1] = radius * std::sin(angle);
        for (int i = 0; i < config.n_ood; ++i) {
            ds.features.push_back(noisy_point(center));
            ds.labels.push_back(-1);
            ds.roles.push_back(sample_role::ood);
        }
    }
    return ds;
}

inline labeled_dataset synth_generate(const synth_config& config) {
    rng gen(config.seed);
    return synth_generate(config, gen);
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const char* field) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw data_format_error(std::string("idx: truncated ") + field);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

// IDX image/label pair (the MNIST distribution format): big-endian headers,
// unsigned-byte payload. Pixels are scaled to [0,1] and flattened row-major.
inline labeled_dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw data_format_error("idx: cannot open image file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw data_format_error("idx: cannot open label file " + labels_path);

    const std::uint32_t img_magic = detail::read_be_u32(img, "image magic");
    if (img_magic != 0x00000803u)
        throw data_format_error("idx: bad image magic number");
    const std::uint32_t n_images = detail::read_be_u32(img, "image count");
    const std::uint32_t rows = detail::read_be_u32(img, "image rows");
    const std::uint32_t cols = detail::read_be_u32(img, "image cols");

    const std::uint32_t lab_magic = detail::read_be_u32(lab, "label magic");
    if (lab_magic != 0x00000801u)
        throw data_format_error("idx: bad label magic number");
    const std::uint32_t n_labels = detail::read_be_u32(lab, "label count");
    if (n_images != n_labels)
        throw data_format_error("idx: image count does not match label count");

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    labeled_dataset ds;
    ds.name = images_path;
    ds.k = 0;
    ds.features.resize(n_images);
    ds.labels.resize(n_images);
    ds.roles.assign(n_images, sample_role::clean_id);

    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
            throw data_format_error("idx: truncated image payload");
        auto& row = ds.features[i];
        row.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
        char lbl;
        if (!lab.read(&lbl, 1)) throw data_format_error("idx: truncated label payload");
        ds.labels[i] = static_cast<unsigned char>(lbl);
        ds.k = std::max(ds.k, ds.labels[i] + 1);
    }
    return ds;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

// CSV with a header row; the named label column holds class labels (any
// distinct strings, later densified to 0..K-1 by sorted original order), an
// optional "role" column carries the dataset role tags, and every other
// column must be numeric. OOD rows keep the sentinel label -1.
inline labeled_dataset load_csv(const std::string& path, const std::string& label_column = "label") {
    std::ifstream in(path);
    if (!in) throw data_format_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_format_error("csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);

    long label_idx = -1, role_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_idx = static_cast<long>(i);
        if (header[i] == "role") role_idx = static_cast<long>(i);
    }
    if (label_idx < 0)
        throw data_format_error("csv: missing label column '" + label_column + "'");

    labeled_dataset ds;
    ds.name = path;
    std::vector<std::string> raw_labels;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw data_format_error("csv: row " + std::to_string(row_no) + " has " +
                                    std::to_string(cells.size()) + " cells, expected " +
                                    std::to_string(header.size()));
        std::vector<double> row;
        row.reserve(header.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<long>(c) == label_idx || static_cast<long>(c) == role_idx) continue;
            double v = 0.0;
            const char* first = cells[c].data();
            const char* last = first + cells[c].size();
            auto res = std::from_chars(first, last, v);
            if (res.ec != std::errc{} || res.ptr != last)
                throw data_format_error("csv: non-numeric cell at row " + std::to_string(row_no) +
                                        ", column '" + header[c] + "'");
            row.push_back(v);
        }
        ds.features.push_back(std::move(row));
        raw_labels.push_back(cells[static_cast<std::size_t>(label_idx)]);
        ds.roles.push_back(role_idx >= 0
                               ? role_from_string(cells[static_cast<std::size_t>(role_idx)])
                               : sample_role::clean_id);
    }
    if (ds.features.empty()) throw data_format_error("csv: no data rows in " + path);

    // densify labels over non-OOD rows, numeric order when possible
    std::vector<std::string> distinct;
    for (std::size_t i = 0; i < raw_labels.size(); ++i)
        if (ds.roles[i] != sample_role::ood) distinct.push_back(raw_labels[i]);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const bool all_numeric = std::all_of(distinct.begin(), distinct.end(), [](const std::string& s) {
        long v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        return res.ec == std::errc{} && res.ptr == s.data() + s.size();
    });
    if (all_numeric)
        std::sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
            long va = 0, vb = 0;
            std::from_chars(a.data(), a.data() + a.size(), va);
            std::from_chars(b.data(), b.data() + b.size(), vb);
            return va < vb;
        });
    std::map<std::string, int> dense;
    for (std::size_t i = 0; i < distinct.size(); ++i) dense[distinct[i]] = static_cast<int>(i);

    ds.labels.resize(raw_labels.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i)
        ds.labels[i] = ds.roles[i] == sample_role::ood ? -1 : dense[raw_labels[i]];
    ds.k = static_cast<int>(distinct.size());
    return ds;
}

// Shortest-round-trip decimal formatting so that a write/read cycle
// reproduces features exactly.
inline void save_csv(const labeled_dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_format_error("csv: cannot write " + path);
    const std::size_t d = ds.dim();
    for (std::size_t j = 0; j < d; ++j) out << "f" << j << ",";
    out << "label,role\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out << detail::format_double(ds.features[i][j]) << ",";
        out << ds.labels[i] << "," << to_string(ds.roles[i]) << "\n";
    }
}

struct split_result {
    labeled_dataset part_a;
    labeled_dataset part_b;
    bool stratified = true;  // false when some class was too small to stratify
};

// Deterministic stratified split; part_a receives the given fraction. Falls
// back to an unstratified split when a class has fewer than 2 rows.
inline split_result split(const labeled_dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split: fraction must lie in (0,1)");
    const std::size_t n = ds.size();
    if (n < 2) throw std::invalid_argument("split: need at least 2 rows");

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < n; ++i) by_label[ds.labels[i]].push_back(i);
    bool stratified = true;
    for (const auto& [lbl, rows] : by_label)
        if (rows.size() < 2) stratified = false;

    rng gen(seed);
    auto shuffle = [&gen](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<std::size_t>(gen.uniform() * i)]);
    };

    const std::size_t target_a = static_cast<std::size_t>(std::llround(fraction * n));
    std::vector<std::size_t> take_a;
    if (stratified) {
        // largest-remainder allocation so the total is exact
        std::vector<std::pair<double, int>> remainders;
        std::size_t assigned = 0;
        std::map<int, std::size_t> quota;
        for (const auto& [lbl, rows] : by_label) {
            const double exact = fraction * rows.size();
            quota[lbl] = static_cast<std::size_t>(exact);
            assigned += quota[lbl];
            remainders.push_back({exact - quota[lbl], lbl});
        }
        std::sort(remainders.begin(), remainders.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [rem, lbl] : remainders) {
            if (assigned >= target_a) break;
            if (quota[lbl] < by_label[lbl].size()) {
                ++quota[lbl];
                ++assigned;
            }
        }
        for (auto& [lbl, rows] : by_label) {
            shuffle(rows);
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (i < quota[lbl]) take_a.push_back(rows[i]);
        }
    } else {
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        shuffle(rows);
        take_a.assign(rows.begin(), rows.begin() + target_a);
    }

    std::vector<bool> in_a(n, false);
    for (std::size_t i : take_a) in_a[i] = true;
    split_result res;
    res.stratified = stratified;
    res.part_a.k = res.part_b.k = ds.k;
    res.part_a.name = ds.name + "/a";
    res.part_b.name = ds.name + "/b";
    for (std::size_t i = 0; i < n; ++i) {
        auto& part = in_a[i] ? res.part_a : res.part_b;
        part.features.push_back(ds.features[i]);
        part.labels.push_back(ds.labels[i]);
        part.roles.push_back(ds.roles[i]);
    }
    return res;
}

}  // namespace fedl
