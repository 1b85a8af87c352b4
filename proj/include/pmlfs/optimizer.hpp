#pragma once

// Nonnegative tri-factor model with an l2,1 row-sparsity penalty and a
// label-graph Laplacian regularizer on the feature weights:
//
//   min  ||U V W - T||_F^2 + alpha ||X - U V||_F^2
//        + beta Tr(W L Wᵀ) + gamma ||W||_{2,1}
//
// solved by multiplicative updates with the l2,1 term relaxed to
// Tr(Wᵀ Q W), Q recomputed from the current W at every iteration.

#include "pmlfs/common.hpp"
#include "pmlfs/infotheory.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pmlfs {

enum class UpdateMode {
    /// W numerator gains beta W Z', denominator uses beta W A (degree
    /// matrix): the positive/negative split of the Laplacian gradient.
    corrected_split,
    /// W update exactly as the original printed rule: beta W in the
    /// denominator and no affinity term in the numerator.
    paper_faithful,
};

inline UpdateMode parse_update_mode(std::string_view s) {
    if (s == "corrected-split") return UpdateMode::corrected_split;
    if (s == "paper-faithful") return UpdateMode::paper_faithful;
    throw ConfigError("unknown update mode '" + std::string(s) + "' (expected corrected-split or paper-faithful)");
}

inline std::string to_string(UpdateMode m) {
    return m == UpdateMode::corrected_split ? "corrected-split" : "paper-faithful";
}

/// How the sparsity term is reported by `objective`.
enum class SparsityTerm {
    relaxed,  // gamma Tr(Wᵀ Q W), Q from the current W
    exact,    // gamma ||W||_{2,1}
};

struct HyperParams {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    /// Latent rank; 0 selects max(1, round(min(n, d) / 4)).
    Eigen::Index k = 0;
    int max_iters = 500;
    double tol = 1e-6;
    double epsilon = 1e-8;
    double denom_floor = 1e-12;
    UpdateMode update_mode = UpdateMode::corrected_split;

    [[nodiscard]] Eigen::Index rank_for(Eigen::Index n, Eigen::Index d) const {
        if (k > 0) return k;
        return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(static_cast<double>(std::min(n, d)) / 4.0)));
    }

    void validate(Eigen::Index n, Eigen::Index d) const {
        require(alpha > 0.0, "alpha must be > 0");
        require(beta >= 0.0, "beta must be >= 0");
        require(gamma >= 0.0, "gamma must be >= 0");
        require(tol > 0.0, "tol must be > 0");
        require(epsilon > 0.0, "epsilon must be > 0");
        require(denom_floor > 0.0, "denom_floor must be > 0");
        require(max_iters >= 0, "max_iters must be >= 0");
        const auto r = rank_for(n, d);
        require(r >= 1 && r <= std::min(n, d),
                "latent rank k=" + std::to_string(r) + " outside [1, min(n,d)=" + std::to_string(std::min(n, d)) + "]");
    }
};

struct FactorState {
    Matrix U;  // n x k
    Matrix V;  // k x d
    Matrix W;  // d x q
};

struct LaplacianPair {
    Matrix L;         // A - Z'
    Matrix A;         // diagonal degree matrix
    Matrix affinity;  // Z'
};

struct ObjectiveTerms {
    double fit = 0.0;       // ||UVW - T||^2
    double recon = 0.0;     // alpha ||X - UV||^2
    double manifold = 0.0;  // beta Tr(W L Wᵀ)
    double sparsity = 0.0;  // gamma Tr(Wᵀ Q W) or gamma ||W||_{2,1}
    [[nodiscard]] double total() const { return fit + recon + manifold + sparsity; }
};

inline LaplacianPair build_laplacian(const MIMatrix& zp) {
    LaplacianPair lap;
    lap.affinity = zp.values;
    lap.A = Matrix::Zero(zp.size(), zp.size());
    lap.A.diagonal() = zp.values.rowwise().sum();
    lap.L = lap.A - zp.values;
    return lap;
}

/// Uniform draws on [0.01, 1.01), filled U, then V, then W, column-major.
inline FactorState init_factors(Eigen::Index n, Eigen::Index d, Eigen::Index q, Eigen::Index k, std::uint64_t seed) {
    require(n >= 1 && d >= 1 && q >= 1, "init_factors: dimensions must be >= 1");
    require(k >= 1 && k <= std::min(n, d),
            "init_factors: k=" + std::to_string(k) + " outside [1, " + std::to_string(std::min(n, d)) + "]");
    Rng rng(seed);
    auto fill = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = 0.01 + rng.uniform();
        return m;
    };
    FactorState s;
    s.U = fill(n, k);
    s.V = fill(k, d);
    s.W = fill(d, q);
    return s;
}

/// Diagonal of Q: 1 / (2 sqrt(||W_i||^2 + epsilon)).
inline Vector compute_q(const Matrix& w, double epsilon) {
    require(epsilon > 0.0, "compute_q: epsilon must be > 0");
    Vector q(w.rows());
    for (Eigen::Index i = 0; i < w.rows(); ++i) q[i] = 1.0 / (2.0 * std::sqrt(w.row(i).squaredNorm() + epsilon));
    return q;
}

inline double l21_norm(const Matrix& w) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += w.row(i).norm();
    return s;
}

namespace detail {

inline void check_finite(const Matrix& m, const char* name, const std::string& context) {
    if (!m.allFinite()) throw NumericError(std::string("non-finite entry in ") + name + context);
}

inline void check_shapes(const FactorState& s, const Matrix& x, const Matrix& t, const LaplacianPair& lap) {
    const auto n = x.rows(), d = x.cols(), q = t.cols(), k = s.U.cols();
    require(t.rows() == n, "T has " + std::to_string(t.rows()) + " rows, X has " + std::to_string(n));
    require(s.U.rows() == n && s.V.rows() == k && s.V.cols() == d && s.W.rows() == d && s.W.cols() == q,
            "factor shapes U " + shape_str(s.U.rows(), s.U.cols()) + ", V " + shape_str(s.V.rows(), s.V.cols()) +
                ", W " + shape_str(s.W.rows(), s.W.cols()) + " inconsistent with X " + shape_str(n, d) + ", T " +
                shape_str(t.rows(), q));
    require(lap.L.rows() == q && lap.L.cols() == q && lap.affinity.rows() == q,
            "Laplacian is " + shape_str(lap.L.rows(), lap.L.cols()) + ", expected " + shape_str(q, q));
}

inline Matrix floored_ratio(const Matrix& num, const Matrix& den, double floor) {
    return num.array() / den.array().max(floor);
}

}  // namespace detail

inline ObjectiveTerms objective(const FactorState& s, const Matrix& x, const Matrix& t, const LaplacianPair& lap,
                                const HyperParams& hp, SparsityTerm sparsity = SparsityTerm::relaxed) {
    detail::check_shapes(s, x, t, lap);
    detail::check_finite(s.U, "U", "");
    detail::check_finite(s.V, "V", "");
    detail::check_finite(s.W, "W", "");
    const Matrix uv = s.U * s.V;
    ObjectiveTerms o;
    o.fit = (uv * s.W - t).squaredNorm();
    o.recon = hp.alpha * (x - uv).squaredNorm();
    o.manifold = hp.beta * (s.W * lap.L * s.W.transpose()).trace();
    if (sparsity == SparsityTerm::exact) {
        o.sparsity = hp.gamma * l21_norm(s.W);
    } else {
        const Vector qd = compute_q(s.W, hp.epsilon);
        o.sparsity = hp.gamma * (s.W.transpose() * qd.asDiagonal() * s.W).trace();
    }
    return o;
}

/// One sweep of multiplicative updates: U, then V, then W, each against the
/// freshest values of the others. Q is taken from W at entry.
inline FactorState step(const FactorState& s, const Matrix& x, const Matrix& t, const LaplacianPair& lap,
                        const HyperParams& hp, int iteration = 0) {
    detail::check_shapes(s, x, t, lap);
    const std::string ctx = " after update at iteration " + std::to_string(iteration);
    const double a = hp.alpha, floor = hp.denom_floor;
    const Vector qd = compute_q(s.W, hp.epsilon);
    FactorState o = s;

    {
        const Matrix vw = o.V * o.W;  // k x q
        const Matrix num = t * vw.transpose() + a * x * o.V.transpose();
        const Matrix den = o.U * (vw * vw.transpose()) + a * o.U * (o.V * o.V.transpose());
        o.U = o.U.cwiseProduct(detail::floored_ratio(num, den, floor));
        detail::check_finite(o.U, "U", ctx);
    }
    {
        const Matrix utu = o.U.transpose() * o.U;
        const Matrix wwt = o.W * o.W.transpose();
        const Matrix num = o.U.transpose() * t * o.W.transpose() + a * o.U.transpose() * x;
        const Matrix den = utu * o.V * wwt + a * utu * o.V;
        o.V = o.V.cwiseProduct(detail::floored_ratio(num, den, floor));
        detail::check_finite(o.V, "V", ctx);
    }
    {
        const Matrix uv = o.U * o.V;  // n x d
        Matrix num = uv.transpose() * t;
        Matrix den = (uv.transpose() * uv) * o.W + hp.gamma * (qd.asDiagonal() * o.W);
        if (hp.update_mode == UpdateMode::corrected_split) {
            num += hp.beta * o.W * lap.affinity;
            den += hp.beta * o.W * lap.A;
        } else {
            den += hp.beta * o.W;
        }
        o.W = o.W.cwiseProduct(detail::floored_ratio(num, den, floor));
        detail::check_finite(o.W, "W", ctx);
    }
    return o;
}

struct FitResult {
    FactorState state;
    /// trace[0] is the initial objective, trace[t] the objective after t sweeps.
    std::vector<ObjectiveTerms> trace;
    bool converged = false;
};

/// Raised when the objective stops being finite; carries the trace so far.
class FitAborted : public NumericError {
public:
    FitAborted(const std::string& what, std::vector<ObjectiveTerms> trace)
        : NumericError(what), trace_(std::move(trace)) {}
    [[nodiscard]] const std::vector<ObjectiveTerms>& trace() const noexcept { return trace_; }

private:
    std::vector<ObjectiveTerms> trace_;
};

/// Runs `step` from `init` until the relative objective change falls below
/// hp.tol or hp.max_iters sweeps have run.
inline FitResult fit_from(FactorState init, const Matrix& x, const Matrix& t, const LaplacianPair& lap,
                          const HyperParams& hp) {
    require((x.array() >= 0.0).all(), "fit: X must be nonnegative");
    require((t.array() >= 0.0).all(), "fit: T must be nonnegative");
    FitResult r;
    r.state = std::move(init);
    r.trace.push_back(objective(r.state, x, t, lap, hp));
    for (int it = 1; it <= hp.max_iters; ++it) {
        try {
            r.state = step(r.state, x, t, lap, hp, it);
        } catch (const NumericError& e) {
            throw FitAborted(e.what(), r.trace);
        }
        const ObjectiveTerms o = objective(r.state, x, t, lap, hp);
        if (!std::isfinite(o.total()))
            throw FitAborted("objective became non-finite at iteration " + std::to_string(it), r.trace);
        const double prev = r.trace.back().total();
        r.trace.push_back(o);
        if (std::abs(o.total() - prev) / std::max(prev, 1e-12) < hp.tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

inline FitResult fit(const Matrix& x, const Matrix& t, const MIMatrix& zp, const HyperParams& hp, std::uint64_t seed) {
    require(t.rows() == x.rows(), "fit: X and T row counts differ");
    require(zp.size() == t.cols(), "fit: Z' size does not match label count");
    hp.validate(x.rows(), x.cols());
    const auto k = hp.rank_for(x.rows(), x.cols());
    return fit_from(init_factors(x.rows(), x.cols(), t.cols(), k, seed), x, t, build_laplacian(zp), hp);
}

/// CSV columns: iteration, theta, term1..term4.
inline void write_trace_csv(const std::filesystem::path& path, const std::vector<ObjectiveTerms>& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "iteration,theta,term1,term2,term3,term4\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& o = trace[i];
        out << i << ',' << format_double(o.total()) << ',' << format_double(o.fit) << ',' << format_double(o.recon)
            << ',' << format_double(o.manifold) << ',' << format_double(o.sparsity) << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace pmlfs
