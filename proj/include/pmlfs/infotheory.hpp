#pragma once

// Plug-in mutual information between label columns, in bits.
//
// All estimators reduce to integer joint counts, so results depend only on
// the partition of samples, never on sample order. Per-cell terms are summed
// in sorted order, which makes I(a,b) and I(b,a) bit-identical.

#include "pmlfs/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace pmlfs {

enum class MIKind { binary_over_labels, discretized_over_scores };
enum class BinStrategy { equal_width, quantile };

inline BinStrategy parse_bin_strategy(std::string_view s) {
    if (s == "equal-width") return BinStrategy::equal_width;
    if (s == "quantile") return BinStrategy::quantile;
    throw ConfigError("unknown bin strategy '" + std::string(s) + "' (expected equal-width or quantile)");
}

inline std::string to_string(BinStrategy b) { return b == BinStrategy::equal_width ? "equal-width" : "quantile"; }

/// Symmetric q x q matrix of pairwise MI; the diagonal holds each column's entropy.
struct MIMatrix {
    Matrix values;
    MIKind kind = MIKind::binary_over_labels;

    [[nodiscard]] Eigen::Index size() const { return values.rows(); }
};

using Codes = std::vector<int>;

/// I(a;b) from two integer code columns of equal length.
inline double mi_from_codes(std::span<const int> a, std::span<const int> b) {
    require(a.size() == b.size(), "mutual information: column lengths differ (" + std::to_string(a.size()) +
                                      " vs " + std::to_string(b.size()) + ")");
    require(!a.empty(), "mutual information: empty columns");
    const int ka = *std::max_element(a.begin(), a.end()) + 1;
    const int kb = *std::max_element(b.begin(), b.end()) + 1;
    require(*std::min_element(a.begin(), a.end()) >= 0 && *std::min_element(b.begin(), b.end()) >= 0,
            "mutual information: negative code");

    std::vector<long long> joint(static_cast<std::size_t>(ka) * static_cast<std::size_t>(kb), 0);
    std::vector<long long> ca(static_cast<std::size_t>(ka), 0), cb(static_cast<std::size_t>(kb), 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++joint[static_cast<std::size_t>(a[i]) * static_cast<std::size_t>(kb) + static_cast<std::size_t>(b[i])];
        ++ca[static_cast<std::size_t>(a[i])];
        ++cb[static_cast<std::size_t>(b[i])];
    }
    const auto n = static_cast<double>(a.size());
    std::vector<double> terms;
    terms.reserve(joint.size());
    for (int u = 0; u < ka; ++u) {
        for (int v = 0; v < kb; ++v) {
            const long long c = joint[static_cast<std::size_t>(u) * static_cast<std::size_t>(kb) + static_cast<std::size_t>(v)];
            if (c == 0) continue;  // 0 log 0 := 0
            // ca*cb is an exact integer product, commutative in (a, b).
            const double marg = static_cast<double>(ca[static_cast<std::size_t>(u)] * cb[static_cast<std::size_t>(v)]);
            terms.push_back(static_cast<double>(c) / n * std::log2(static_cast<double>(c) * n / marg));
        }
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    return std::max(0.0, sum);
}

/// Shannon entropy (bits) of a code column.
inline double entropy(std::span<const int> a) {
    require(!a.empty(), "entropy: empty column");
    std::vector<long long> counts(static_cast<std::size_t>(*std::max_element(a.begin(), a.end()) + 1), 0);
    for (int v : a) ++counts[static_cast<std::size_t>(v)];
    const auto n = static_cast<double>(a.size());
    std::vector<double> terms;
    for (auto c : counts)
        if (c > 0) terms.push_back(static_cast<double>(c) / n * std::log2(n / static_cast<double>(c)));
    std::sort(terms.begin(), terms.end());
    double h = 0.0;
    for (double t : terms) h += t;
    return h;
}

namespace detail {

inline Codes binary_codes(const Eigen::Ref<const Vector>& col, const char* who) {
    Codes c(static_cast<std::size_t>(col.size()));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        if (col[i] != 0.0 && col[i] != 1.0)
            throw ContractError(std::string(who) + ": non-binary entry " + format_double(col[i]) + " at row " +
                                std::to_string(i));
        c[static_cast<std::size_t>(i)] = col[i] == 1.0 ? 1 : 0;
    }
    return c;
}

template <typename CodeFn>
MIMatrix pairwise(Eigen::Index q, MIKind kind, CodeFn&& code_of) {
    std::vector<Codes> codes(static_cast<std::size_t>(q));
    for (Eigen::Index j = 0; j < q; ++j) codes[static_cast<std::size_t>(j)] = code_of(j);
    MIMatrix z;
    z.kind = kind;
    z.values = Matrix::Zero(q, q);
    // Upper triangle including the diagonal, one independent entry per index.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = i; j < q; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const double v = mi_from_codes(codes[static_cast<std::size_t>(i)], codes[static_cast<std::size_t>(j)]);
        z.values(i, j) = v;
        z.values(j, i) = v;
    });
    return z;
}

}  // namespace detail

/// I(a;b) for two {0,1} columns.
inline double binary_mi(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    require(a.size() == b.size(), "binary_mi: column lengths differ (" + std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()) + ")");
    require(a.size() >= 1, "binary_mi: empty columns");
    return mi_from_codes(detail::binary_codes(a, "binary_mi"), detail::binary_codes(b, "binary_mi"));
}

/// Pairwise MI over the columns of a binary label matrix.
inline MIMatrix mi_matrix_binary(const Matrix& y) {
    require(y.rows() >= 1 && y.cols() >= 1, "mi_matrix_binary: empty matrix");
    return detail::pairwise(y.cols(), MIKind::binary_over_labels,
                            [&](Eigen::Index j) { return detail::binary_codes(y.col(j), "mi_matrix_binary"); });
}

/// Maps a real column to codes in [0, bins).
///
/// equal-width: code = floor((x - min) / (max - min) * bins), the top edge
/// folded into the last bin, so a value on an interior boundary goes up.
/// quantile: if the column has at most `bins` distinct values each value
/// gets its own code (dense rank); otherwise code = floor(bins * #{x' < x} / n).
/// Both are monotone in x and send constant columns to 0.
inline Codes discretize_column(const Eigen::Ref<const Vector>& col, int bins, BinStrategy strategy) {
    require(bins >= 2, "discretize_column: bins must be >= 2");
    for (Eigen::Index i = 0; i < col.size(); ++i)
        if (std::isnan(col[i])) throw ContractError("discretize_column: NaN at row " + std::to_string(i));
    const auto n = static_cast<std::size_t>(col.size());
    Codes codes(n, 0);
    if (n == 0) return codes;

    if (strategy == BinStrategy::equal_width) {
        const double lo = col.minCoeff(), hi = col.maxCoeff();
        if (!(hi > lo)) return codes;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = (col[static_cast<Eigen::Index>(i)] - lo) / (hi - lo) * bins;
            codes[i] = std::min(bins - 1, static_cast<int>(std::floor(t)));
        }
        return codes;
    }

    std::vector<double> sorted(col.data(), col.data() + n);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double x = col[static_cast<Eigen::Index>(i)];
        if (distinct.size() <= static_cast<std::size_t>(bins)) {
            codes[i] = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), x) - distinct.begin());
        } else {
            const auto below = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
            codes[i] = std::min(bins - 1, static_cast<int>(below * static_cast<std::size_t>(bins) / n));
        }
    }
    return codes;
}

/// Pairwise MI over real-valued columns after per-column discretization.
inline MIMatrix mi_matrix_real(const Matrix& t, int bins = 5, BinStrategy strategy = BinStrategy::quantile) {
    require(t.rows() >= 1 && t.cols() >= 1, "mi_matrix_real: empty matrix");
    return detail::pairwise(t.cols(), MIKind::discretized_over_scores,
                            [&](Eigen::Index j) { return discretize_column(t.col(j), bins, strategy); });
}

}  // namespace pmlfs
