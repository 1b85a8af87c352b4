#pragma once

// Label disambiguation through label-label mutual information, weight
// reconstruction through label connectivity, and the final feature ranking.

#include "pmlfs/common.hpp"
#include "pmlfs/infotheory.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace pmlfs {

enum class LabelNormalization { row_max, global_max, none };

inline LabelNormalization parse_label_normalization(std::string_view s) {
    if (s == "row-max") return LabelNormalization::row_max;
    if (s == "global-max") return LabelNormalization::global_max;
    if (s == "none") return LabelNormalization::none;
    throw ConfigError("unknown label normalization '" + std::string(s) + "'");
}

inline std::string to_string(LabelNormalization m) {
    switch (m) {
        case LabelNormalization::row_max: return "row-max";
        case LabelNormalization::global_max: return "global-max";
        case LabelNormalization::none: return "none";
    }
    return "?";
}

struct ReconstructedLabels {
    Matrix values;  // n x q, nonnegative
    LabelNormalization normalization = LabelNormalization::row_max;
    /// Labels that are candidates somewhere but whose MI row is all zero
    /// (constant column); those candidates receive confidence 0.
    std::vector<std::size_t> degenerate_labels;
};

struct FeatureRanking {
    IndexVector order;          // feature indices, most important first
    std::vector<double> scores; // indexed by feature

    [[nodiscard]] IndexVector top(std::size_t count) const {
        return IndexVector(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(count, order.size())));
    }
};

struct ReconstructOptions {
    LabelNormalization normalization = LabelNormalization::row_max;
    /// Keep Z's diagonal (self-information) in the per-candidate sum.
    bool include_diagonal = true;
};

/// T = (Y Z) masked by the candidate indicator of Y, then normalized.
inline ReconstructedLabels reconstruct_labels(const Matrix& y, const MIMatrix& z, const ReconstructOptions& opt = {}) {
    const Eigen::Index q = y.cols();
    require(z.values.rows() == q && z.values.cols() == q,
            "reconstruct_labels: Z is " + shape_str(z.values.rows(), z.values.cols()) + ", expected " + shape_str(q, q));

    Matrix zz = z.values;
    if (!opt.include_diagonal) zz.diagonal().setZero();
    const Matrix mask = (y.array() > 0.0).cast<double>();

    ReconstructedLabels out;
    out.normalization = opt.normalization;
    out.values = (mask * zz).cwiseProduct(mask);

    for (Eigen::Index j = 0; j < q; ++j)
        if (mask.col(j).any() && (z.values.row(j).array() == 0.0).all())
            out.degenerate_labels.push_back(static_cast<std::size_t>(j));

    switch (opt.normalization) {
        case LabelNormalization::row_max:
            for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
                const double m = out.values.row(i).maxCoeff();
                if (m > 0.0) out.values.row(i) /= m;
            }
            break;
        case LabelNormalization::global_max:
            if (const double m = out.values.size() ? out.values.maxCoeff() : 0.0; m > 0.0) out.values /= m;
            break;
        case LabelNormalization::none: break;
    }
    return out;
}

/// W Z': each feature's weight on a label becomes its connectivity-weighted
/// sum over all labels.
inline Matrix reconstruct_weights(const Matrix& w, const MIMatrix& zp) {
    require(zp.values.rows() == w.cols() && zp.values.cols() == w.cols(),
            "reconstruct_weights: W is " + shape_str(w.rows(), w.cols()) + " but Z' is " +
                shape_str(zp.values.rows(), zp.values.cols()));
    return w * zp.values;
}

/// Row L2 norms sorted descending, ties by ascending feature index.
inline FeatureRanking rank_features(const Matrix& w) {
    FeatureRanking r;
    r.scores.resize(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) r.scores[static_cast<std::size_t>(i)] = w.row(i).norm();
    r.order.resize(r.scores.size());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
    return r;
}

/// CSV columns: feature_index, feature_name, score, rank (1-based), in rank order.
inline void write_ranking_csv(const std::filesystem::path& path, const FeatureRanking& r,
                              const std::vector<std::string>& names) {
    require(names.size() == r.scores.size(), "write_ranking_csv: name count does not match ranking size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "feature_index,feature_name,score,rank\n";
    for (std::size_t pos = 0; pos < r.order.size(); ++pos) {
        const auto f = r.order[pos];
        out << f << ',' << names[f] << ',' << format_double(r.scores[f]) << ',' << (pos + 1) << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

inline FeatureRanking read_ranking_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<std::size_t, std::pair<std::size_t, double>>> rows;  // rank -> (feature, score)
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (lineno == 1) continue;  // header
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                f.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        if (f.size() < 4) throw ParseError("ranking row needs 4 fields", lineno);
        // Names never contain unquoted commas when written by write_ranking_csv, but
        // tolerate it by reading index, score and rank from the ends.
        double idx = 0, score = 0, rank = 0;
        if (!parse_double(f.front(), idx) || !parse_double(f[f.size() - 2], score) || !parse_double(f.back(), rank))
            throw ParseError("malformed ranking row", lineno);
        rows.push_back({static_cast<std::size_t>(rank), {static_cast<std::size_t>(idx), score}});
    }
    std::sort(rows.begin(), rows.end());
    FeatureRanking r;
    r.scores.assign(rows.size(), 0.0);
    std::vector<bool> seen(rows.size(), false);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto [feat, score] = rows[i].second;
        if (rows[i].first != i + 1 || feat >= rows.size() || seen[feat])
            throw ValidationError(path.filename().string() + ": ranks/indices do not form a permutation");
        seen[feat] = true;
        r.order.push_back(feat);
        r.scores[feat] = score;
    }
    return r;
}

}  // namespace pmlfs
