#pragma once

// Downstream evaluation of a feature ranking: a closed-form binary-relevance
// ridge model trained on the top-ranked features, scored with ranking loss,
// coverage, average precision, macro-F1 and micro-F1 under k-fold CV.

#include "pmlfs/common.hpp"
#include "pmlfs/dataset.hpp"
#include "pmlfs/reconstruction.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace pmlfs {

// ---------------------------------------------------------------------------
// Binary-relevance ridge regression
// ---------------------------------------------------------------------------

struct RidgeModel {
    /// (s+1) x q; row 0 holds the intercepts.
    Matrix coef;

    [[nodiscard]] Matrix predict(const Matrix& x) const {
        require(x.cols() + 1 == coef.rows(), "RidgeModel::predict: expected " + std::to_string(coef.rows() - 1) +
                                                 " features, got " + std::to_string(x.cols()));
        return (x * coef.bottomRows(coef.rows() - 1)).rowwise() + coef.row(0);
    }
};

/// Per-label least squares with an unpenalized intercept:
/// (X̃ᵀX̃ + lambda·diag(0,1,…,1)) B = X̃ᵀY with X̃ = [1 | X].
inline RidgeModel train_br_ridge(const Matrix& x, const Matrix& y, double lambda) {
    require(x.cols() >= 1, "train_br_ridge: need at least one feature");
    require(x.rows() >= 1 && x.rows() == y.rows(), "train_br_ridge: X and Y row counts differ");
    require(lambda > 0.0, "train_br_ridge: lambda must be > 0");
    const auto m = x.rows(), s = x.cols();
    Matrix xt(m, s + 1);
    xt.col(0).setOnes();
    xt.rightCols(s) = x;
    Matrix gram = xt.transpose() * xt;
    gram.diagonal().tail(s).array() += lambda;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericError("train_br_ridge: normal equations are singular");
    RidgeModel model;
    model.coef = ldlt.solve(xt.transpose() * y);
    if (!model.coef.allFinite()) throw NumericError("train_br_ridge: non-finite coefficients");
    return model;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricResult {
    double value = 0.0;
    /// Rows excluded because the metric is undefined for them.
    std::size_t skipped = 0;
};

namespace detail {

inline void check_metric_shapes(const Matrix& s, const Matrix& y, const char* who) {
    require(s.rows() == y.rows() && s.cols() == y.cols(),
            std::string(who) + ": score matrix " + shape_str(s.rows(), s.cols()) + " vs labels " +
                shape_str(y.rows(), y.cols()));
    require(s.allFinite(), std::string(who) + ": scores must be finite");
}

/// 1-based ranks of one row: descending score, ties by ascending label index.
inline std::vector<std::size_t> row_ranks(const Matrix& s, Eigen::Index i) {
    const auto q = static_cast<std::size_t>(s.cols());
    std::vector<std::size_t> order(q);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s(i, static_cast<Eigen::Index>(a)) > s(i, static_cast<Eigen::Index>(b));
    });
    std::vector<std::size_t> rank(q);
    for (std::size_t p = 0; p < q; ++p) rank[order[p]] = p + 1;
    return rank;
}

inline MetricResult finish_mean(double sum, std::size_t used, std::size_t skipped, const char* who) {
    if (used == 0) throw Error(std::string(who) + ": undefined, every row was skipped");
    return {sum / static_cast<double>(used), skipped};
}

}  // namespace detail

/// Fraction of (positive, negative) pairs ordered wrongly, ties count one half.
inline MetricResult ranking_loss(const Matrix& s, const Matrix& y) {
    detail::check_metric_shapes(s, y, "ranking_loss");
    double sum = 0.0;
    std::size_t used = 0, skipped = 0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        double bad = 0.0;
        std::size_t np = 0, nn = 0;
        for (Eigen::Index p = 0; p < s.cols(); ++p) {
            if (y(i, p) == 1.0) ++np; else ++nn;
        }
        if (np == 0 || nn == 0) {
            ++skipped;
            continue;
        }
        for (Eigen::Index p = 0; p < s.cols(); ++p) {
            if (y(i, p) != 1.0) continue;
            for (Eigen::Index m = 0; m < s.cols(); ++m) {
                if (y(i, m) == 1.0) continue;
                if (s(i, p) < s(i, m)) bad += 1.0;
                else if (s(i, p) == s(i, m)) bad += 0.5;
            }
        }
        sum += bad / (static_cast<double>(np) * static_cast<double>(nn));
        ++used;
    }
    return detail::finish_mean(sum, used, skipped, "ranking_loss");
}

/// (deepest rank reached by a positive - 1) / q, averaged over rows.
inline MetricResult coverage(const Matrix& s, const Matrix& y) {
    detail::check_metric_shapes(s, y, "coverage");
    double sum = 0.0;
    std::size_t used = 0, skipped = 0;
    const auto q = static_cast<double>(s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const auto rank = detail::row_ranks(s, i);
        std::size_t deepest = 0;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            if (y(i, j) == 1.0) deepest = std::max(deepest, rank[static_cast<std::size_t>(j)]);
        if (deepest == 0) {
            ++skipped;
            continue;
        }
        sum += static_cast<double>(deepest - 1) / q;
        ++used;
    }
    return detail::finish_mean(sum, used, skipped, "coverage");
}

inline MetricResult average_precision(const Matrix& s, const Matrix& y) {
    detail::check_metric_shapes(s, y, "average_precision");
    double sum = 0.0;
    std::size_t used = 0, skipped = 0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const auto rank = detail::row_ranks(s, i);
        std::vector<std::size_t> pos_ranks;
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            if (y(i, j) == 1.0) pos_ranks.push_back(rank[static_cast<std::size_t>(j)]);
        if (pos_ranks.empty()) {
            ++skipped;
            continue;
        }
        std::sort(pos_ranks.begin(), pos_ranks.end());
        double row = 0.0;
        // The p-th best positive (0-based) has p+1 positives at or above it.
        for (std::size_t p = 0; p < pos_ranks.size(); ++p)
            row += static_cast<double>(p + 1) / static_cast<double>(pos_ranks[p]);
        sum += row / static_cast<double>(pos_ranks.size());
        ++used;
    }
    return detail::finish_mean(sum, used, skipped, "average_precision");
}

struct Confusion {
    long long tp = 0, fp = 0, fn = 0;
};

namespace detail {

inline double f1(const Confusion& c) {
    const long long denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline std::vector<Confusion> per_label_confusion(const Matrix& pred, const Matrix& y) {
    require(pred.rows() == y.rows() && pred.cols() == y.cols(), "F1: prediction and label shapes differ");
    std::vector<Confusion> c(static_cast<std::size_t>(y.cols()));
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const bool p = pred(i, j) == 1.0, t = y(i, j) == 1.0;
            auto& cj = c[static_cast<std::size_t>(j)];
            if (p && t) ++cj.tp;
            else if (p) ++cj.fp;
            else if (t) ++cj.fn;
        }
    return c;
}

}  // namespace detail

/// Mean per-label F1; a label with no positives and no predictions scores 0.
inline double macro_f1(const Matrix& pred, const Matrix& y) {
    const auto c = detail::per_label_confusion(pred, y);
    double sum = 0.0;
    for (const auto& cj : c) sum += detail::f1(cj);
    return c.empty() ? 0.0 : sum / static_cast<double>(c.size());
}

inline double micro_f1(const Matrix& pred, const Matrix& y) {
    Confusion total;
    for (const auto& cj : detail::per_label_confusion(pred, y)) {
        total.tp += cj.tp;
        total.fp += cj.fp;
        total.fn += cj.fn;
    }
    return detail::f1(total);
}

inline constexpr double kDecisionThreshold = 0.5;

inline Matrix threshold_scores(const Matrix& s, double threshold = kDecisionThreshold) {
    return (s.array() >= threshold).cast<double>();
}

// ---------------------------------------------------------------------------
// Cross-validated evaluation of a ranking
// ---------------------------------------------------------------------------

struct Metrics {
    double ranking_loss = 0.0;
    double coverage = 0.0;
    double average_precision = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;

    static constexpr std::array<const char*, 5> names{"ranking_loss", "coverage", "average_precision", "macro_f1",
                                                      "micro_f1"};

    [[nodiscard]] std::array<double, 5> as_array() const {
        return {ranking_loss, coverage, average_precision, macro_f1, micro_f1};
    }
    static Metrics from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
};

inline Metrics score_all(const Matrix& scores, const Matrix& truth) {
    Metrics m;
    m.ranking_loss = ranking_loss(scores, truth).value;
    m.coverage = coverage(scores, truth).value;
    m.average_precision = average_precision(scores, truth).value;
    const Matrix pred = threshold_scores(scores);
    m.macro_f1 = macro_f1(pred, truth);
    m.micro_f1 = micro_f1(pred, truth);
    return m;
}

struct EvalEntry {
    std::size_t fold = 0;
    double percent = 0.0;
    std::size_t features = 0;
    Metrics metrics;
};

struct MetricSummary {
    Metrics mean;
    Metrics stddev;  // sample standard deviation, 0 for a single value
};

struct EvaluationReport {
    std::vector<double> percents;
    std::vector<FoldSplit> folds;
    std::vector<EvalEntry> entries;  // fold-major, then percent order
    MetricSummary overall;
    std::vector<MetricSummary> by_percent;  // aligned with percents
};

inline MetricSummary summarize(const std::vector<Metrics>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    std::array<double, 5> mean{}, var{};
    for (const auto& m : values) {
        const auto a = m.as_array();
        for (std::size_t i = 0; i < 5; ++i) mean[i] += a[i];
    }
    for (auto& v : mean) v /= static_cast<double>(values.size());
    if (values.size() > 1) {
        for (const auto& m : values) {
            const auto a = m.as_array();
            for (std::size_t i = 0; i < 5; ++i) var[i] += (a[i] - mean[i]) * (a[i] - mean[i]);
        }
        for (auto& v : var) v = std::sqrt(v / static_cast<double>(values.size() - 1));
    }
    s.mean = Metrics::from_array(mean);
    s.stddev = Metrics::from_array(var);
    return s;
}

/// Number of top features used for a fraction p of d: ceil(p*d), with a
/// small guard so decimal fractions like 0.07*100 do not round up to 8.
inline std::size_t feature_count(double percent, std::size_t d) {
    require(percent > 0.0 && percent <= 1.0, "percent " + format_double(percent) + " outside (0, 1]");
    const double raw = percent * static_cast<double>(d);
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    require(count >= 1, "percent " + format_double(percent) + " selects no feature of " + std::to_string(d));
    return std::min(count, d);
}

/// 0.01, 0.02, ..., 0.20.
inline std::vector<double> default_percents() {
    std::vector<double> p;
    for (int i = 1; i <= 20; ++i) p.push_back(i / 100.0);
    return p;
}

struct EvaluateOptions {
    std::vector<double> percents = default_percents();
    std::size_t folds = 10;
    std::uint64_t seed = 0;  // fold split seed
    double lambda = 1.0;
};

/// Trains on the ground truth of each training fold using the top features of
/// `ranking` and scores the held-out fold.
inline EvaluationReport evaluate_selection(const Dataset& ds, const FeatureRanking& ranking,
                                           const EvaluateOptions& opt) {
    require(ds.true_labels.has_value(), "evaluate_selection: dataset has no ground-truth labels");
    require(ranking.order.size() == static_cast<std::size_t>(ds.d()),
            "evaluate_selection: ranking covers " + std::to_string(ranking.order.size()) + " features, dataset has " +
                std::to_string(ds.d()));
    require(!opt.percents.empty(), "evaluate_selection: no percents given");
    const auto d = static_cast<std::size_t>(ds.d());
    std::vector<std::size_t> counts;
    for (double p : opt.percents) counts.push_back(feature_count(p, d));

    EvaluationReport rep;
    rep.percents = opt.percents;
    rep.folds = kfold_split(static_cast<std::size_t>(ds.n()), opt.folds, opt.seed);
    const Matrix& truth = *ds.true_labels;
    const std::size_t np = opt.percents.size();
    rep.entries.resize(rep.folds.size() * np);

    parallel_for(rep.folds.size(), [&](std::size_t f) {
        const auto& split = rep.folds[f];
        const Matrix y_train = select_rows(truth, split.train_indices);
        const Matrix y_test = select_rows(truth, split.test_indices);
        const Matrix x_train_all = select_rows(ds.features, split.train_indices);
        const Matrix x_test_all = select_rows(ds.features, split.test_indices);
        for (std::size_t p = 0; p < np; ++p) {
            const auto cols = ranking.top(counts[p]);
            const auto model = train_br_ridge(select_cols(x_train_all, cols), y_train, opt.lambda);
            const Matrix scores = model.predict(select_cols(x_test_all, cols));
            EvalEntry& e = rep.entries[f * np + p];
            e.fold = f;
            e.percent = opt.percents[p];
            e.features = counts[p];
            try {
                e.metrics = score_all(scores, y_test);
            } catch (const Error& err) {
                throw Error("fold " + std::to_string(f) + ", percent " + format_double(opt.percents[p]) + ": " +
                            err.what());
            }
        }
    });

    std::vector<Metrics> all;
    for (const auto& e : rep.entries) all.push_back(e.metrics);
    rep.overall = summarize(all);
    for (std::size_t p = 0; p < np; ++p) {
        std::vector<Metrics> col;
        for (std::size_t f = 0; f < rep.folds.size(); ++f) col.push_back(rep.entries[f * np + p].metrics);
        rep.by_percent.push_back(summarize(col));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Metrics& m) {
    nlohmann::json j = nlohmann::json::object();
    const auto a = m.as_array();
    for (std::size_t i = 0; i < 5; ++i) j[Metrics::names[i]] = a[i];
    return j;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["percents"] = r.percents;
    j["folds"] = nlohmann::json::array();
    for (const auto& f : r.folds) j["folds"].push_back({{"test_indices", f.test_indices}});
    j["entries"] = nlohmann::json::array();
    for (const auto& e : r.entries) {
        nlohmann::json row = to_json(e.metrics);
        row["fold"] = e.fold;
        row["percent"] = e.percent;
        row["features"] = e.features;
        j["entries"].push_back(std::move(row));
    }
    j["mean"] = to_json(r.overall.mean);
    j["std"] = to_json(r.overall.stddev);
    j["by_percent"] = nlohmann::json::array();
    for (std::size_t p = 0; p < r.by_percent.size(); ++p)
        j["by_percent"].push_back({{"percent", r.percents[p]},
                                   {"mean", to_json(r.by_percent[p].mean)},
                                   {"std", to_json(r.by_percent[p].stddev)}});
    return j;
}

/// Flat CSV: fold, percent, metric, value.
inline void write_report_csv(const std::filesystem::path& path, const EvaluationReport& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "fold,percent,metric,value\n";
    for (const auto& e : r.entries) {
        const auto a = e.metrics.as_array();
        for (std::size_t i = 0; i < 5; ++i)
            out << e.fold << ',' << format_double(e.percent) << ',' << Metrics::names[i] << ',' << format_double(a[i])
                << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

inline void write_report_json(const std::filesystem::path& path, const EvaluationReport& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << to_json(r).dump(2) << '\n';
}

}  // namespace pmlfs
