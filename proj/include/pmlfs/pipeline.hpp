#pragma once

// End-to-end orchestration behind the `pmlfs` command-line tool: run
// configuration, the three-stage selection pipeline, evaluation, ablation,
// parameter sweeps and the planted-feature synthetic generator.

#include "pmlfs/common.hpp"
#include "pmlfs/dataset.hpp"
#include "pmlfs/evaluation.hpp"
#include "pmlfs/infotheory.hpp"
#include "pmlfs/optimizer.hpp"
#include "pmlfs/reconstruction.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace pmlfs {

namespace fs = std::filesystem;

/// An error annotated with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

template <typename F>
decltype(auto) in_stage(const char* stage, F&& f) {
    try {
        return std::forward<F>(f)();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

struct RunConfig {
    std::string data;
    DataFormat format = DataFormat::csv_pair;
    std::size_t arff_label_count = 0;
    bool drop_empty_label_rows = false;

    /// When set, candidates are regenerated from the ground truth at this rate.
    std::optional<double> noise;
    NoiseModel noise_model = NoiseModel::per_entry;
    std::uint64_t seed = 0;

    HyperParams hp;
    int bins = 5;
    BinStrategy bin_strategy = BinStrategy::quantile;
    LabelNormalization label_normalization = LabelNormalization::row_max;
    bool include_diagonal = true;

    std::vector<double> percents = default_percents();
    std::size_t folds = 10;
    double lambda = 1.0;

    bool skip_stage1 = false;
    bool skip_stage3 = false;

    std::string out = "out";
    /// Ranking consumed by `evaluate`; empty means <out>/ranking.csv.
    std::string ranking;

    [[nodiscard]] LoadOptions load_options() const { return {arff_label_count, drop_empty_label_rows}; }
    [[nodiscard]] fs::path ranking_path() const { return ranking.empty() ? fs::path(out) / "ranking.csv" : fs::path(ranking); }

    void validate() const {
        if (data.empty()) throw ConfigError("no dataset given (--data)");
        if (!fs::exists(data)) throw ConfigError("dataset path does not exist: " + data);
        if (noise && !(*noise >= 0.0 && *noise <= 1.0)) throw ConfigError("noise rate must be in [0,1]");
        if (bins < 2) throw ConfigError("bins must be >= 2");
        if (folds < 2) throw ConfigError("folds must be >= 2");
        if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
        if (percents.empty()) throw ConfigError("percents list is empty");
        for (double p : percents)
            if (!(p > 0.0 && p <= 1.0)) throw ConfigError("percent " + format_double(p) + " outside (0, 1]");
        if (!(hp.alpha > 0.0) || hp.beta < 0.0 || hp.gamma < 0.0 || hp.k < 0 || hp.max_iters < 0 ||
            !(hp.tol > 0.0) || !(hp.epsilon > 0.0) || !(hp.denom_floor > 0.0))
            throw ConfigError("invalid optimizer hyperparameters");
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["data"] = c.data;
    j["format"] = to_string(c.format);
    j["arff_label_count"] = c.arff_label_count;
    j["drop_empty_label_rows"] = c.drop_empty_label_rows;
    j["noise"] = c.noise ? nlohmann::json(*c.noise) : nlohmann::json(nullptr);
    j["noise_model"] = to_string(c.noise_model);
    j["seed"] = c.seed;
    j["alpha"] = c.hp.alpha;
    j["beta"] = c.hp.beta;
    j["gamma"] = c.hp.gamma;
    j["latent_k"] = c.hp.k;
    j["max_iters"] = c.hp.max_iters;
    j["tol"] = c.hp.tol;
    j["epsilon"] = c.hp.epsilon;
    j["denom_floor"] = c.hp.denom_floor;
    j["update_mode"] = to_string(c.hp.update_mode);
    j["bins"] = c.bins;
    j["bin_strategy"] = to_string(c.bin_strategy);
    j["label_normalization"] = to_string(c.label_normalization);
    j["include_diagonal"] = c.include_diagonal;
    j["percents"] = c.percents;
    j["folds"] = c.folds;
    j["lambda"] = c.lambda;
    j["skip_stage1"] = c.skip_stage1;
    j["skip_stage3"] = c.skip_stage3;
    j["out"] = c.out;
    j["ranking"] = c.ranking;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.data = j.at("data").get<std::string>();
        c.format = parse_data_format(j.at("format").get<std::string>());
        c.arff_label_count = j.value("arff_label_count", std::size_t{0});
        c.drop_empty_label_rows = j.value("drop_empty_label_rows", false);
        if (j.contains("noise") && !j["noise"].is_null()) c.noise = j["noise"].get<double>();
        c.noise_model = parse_noise_model(j.value("noise_model", std::string("per-entry")));
        c.seed = j.value("seed", std::uint64_t{0});
        c.hp.alpha = j.value("alpha", c.hp.alpha);
        c.hp.beta = j.value("beta", c.hp.beta);
        c.hp.gamma = j.value("gamma", c.hp.gamma);
        c.hp.k = j.value("latent_k", c.hp.k);
        c.hp.max_iters = j.value("max_iters", c.hp.max_iters);
        c.hp.tol = j.value("tol", c.hp.tol);
        c.hp.epsilon = j.value("epsilon", c.hp.epsilon);
        c.hp.denom_floor = j.value("denom_floor", c.hp.denom_floor);
        c.hp.update_mode = parse_update_mode(j.value("update_mode", std::string("corrected-split")));
        c.bins = j.value("bins", c.bins);
        c.bin_strategy = parse_bin_strategy(j.value("bin_strategy", std::string("quantile")));
        c.label_normalization = parse_label_normalization(j.value("label_normalization", std::string("row-max")));
        c.include_diagonal = j.value("include_diagonal", true);
        if (j.contains("percents")) c.percents = j["percents"].get<std::vector<double>>();
        c.folds = j.value("folds", c.folds);
        c.lambda = j.value("lambda", c.lambda);
        c.skip_stage1 = j.value("skip_stage1", false);
        c.skip_stage3 = j.value("skip_stage3", false);
        c.out = j.value("out", c.out);
        c.ranking = j.value("ranking", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

inline RunConfig read_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

/// Writes the resolved configuration (the latent rank made explicit).
inline void write_resolved_config(const RunConfig& cfg, const Dataset& ds, const fs::path& dir) {
    RunConfig resolved = cfg;
    resolved.hp.k = cfg.hp.rank_for(ds.n(), ds.d());
    write_json_file(dir / "config.json", to_json(resolved));
}

// ---------------------------------------------------------------------------
// Selection pipeline
// ---------------------------------------------------------------------------

struct SelectionResult {
    Dataset data;               // normalized features, candidates in use
    MIMatrix z;                 // over candidates
    ReconstructedLabels labels; // stage 1 output (or the candidates when skipped)
    MIMatrix zp;                // over labels.values
    FitResult fit;
    Matrix weights;             // W after stage 3 (or raw W when skipped)
    FeatureRanking ranking;
};

/// Loaded data with the configured candidate noise applied and features scaled.
inline Dataset prepare_dataset(const RunConfig& cfg, const Dataset& raw) {
    Dataset ds = raw;
    if (cfg.noise)
        ds = in_stage("noise", [&] {
            return inject_candidate_noise(ds, *cfg.noise, derive_seed(cfg.seed, Stream::noise), cfg.noise_model);
        });
    return normalize_features(ds);
}

inline Dataset load_for(const RunConfig& cfg) {
    return in_stage("load", [&] { return load_dataset(cfg.data, cfg.format, cfg.load_options()); });
}

/// Stages 1-3 on already prepared data.
inline SelectionResult select_features(const RunConfig& cfg, const Dataset& prepared) {
    SelectionResult r;
    r.data = prepared;
    const Matrix& y = prepared.candidate_labels;
    r.z = in_stage("label-mi", [&] { return mi_matrix_binary(y); });
    r.labels = in_stage("label-reconstruction", [&] {
        if (cfg.skip_stage1) return ReconstructedLabels{y, LabelNormalization::none, {}};
        return reconstruct_labels(y, r.z, {cfg.label_normalization, cfg.include_diagonal});
    });
    r.zp = in_stage("score-mi", [&] { return mi_matrix_real(r.labels.values, cfg.bins, cfg.bin_strategy); });
    r.fit = in_stage("optimize", [&] {
        return fit(prepared.features, r.labels.values, r.zp, cfg.hp, derive_seed(cfg.seed, Stream::init));
    });
    r.weights = in_stage("weight-reconstruction", [&] {
        return cfg.skip_stage3 ? r.fit.state.W : reconstruct_weights(r.fit.state.W, r.zp);
    });
    r.ranking = rank_features(r.weights);
    return r;
}

inline EvaluateOptions evaluate_options(const RunConfig& cfg) {
    return {cfg.percents, cfg.folds, derive_seed(cfg.seed, Stream::folds), cfg.lambda};
}

inline void warn_degenerate(const SelectionResult& r, std::ostream& log) {
    if (r.labels.degenerate_labels.empty()) return;
    log << "warning: candidate labels with zero entropy get confidence 0:";
    for (auto j : r.labels.degenerate_labels) log << ' ' << r.data.label_names[j];
    log << '\n';
}

/// load -> noise -> normalize -> stages 1-3; writes ranking.csv, trace.csv, config.json.
inline SelectionResult cmd_select(const RunConfig& cfg, std::ostream& log = std::cerr) {
    cfg.validate();
    const Dataset prepared = prepare_dataset(cfg, load_for(cfg));
    SelectionResult r = select_features(cfg, prepared);
    warn_degenerate(r, log);
    in_stage("write", [&] {
        fs::create_directories(cfg.out);
        write_ranking_csv(fs::path(cfg.out) / "ranking.csv", r.ranking, r.data.feature_names);
        write_trace_csv(fs::path(cfg.out) / "trace.csv", r.fit.trace);
        write_resolved_config(cfg, r.data, cfg.out);
    });
    return r;
}

/// Evaluates cfg.ranking_path() against the dataset; writes report.json and report.csv.
inline EvaluationReport cmd_evaluate(const RunConfig& cfg) {
    cfg.validate();
    const Dataset prepared = prepare_dataset(cfg, load_for(cfg));
    const FeatureRanking ranking = in_stage("read-ranking", [&] { return read_ranking_csv(cfg.ranking_path()); });
    if (ranking.order.size() != static_cast<std::size_t>(prepared.d()))
        throw ConfigError("ranking has " + std::to_string(ranking.order.size()) + " features, dataset has " +
                          std::to_string(prepared.d()));
    EvaluationReport rep = in_stage("evaluate", [&] { return evaluate_selection(prepared, ranking, evaluate_options(cfg)); });
    in_stage("write", [&] {
        fs::create_directories(cfg.out);
        write_report_json(fs::path(cfg.out) / "report.json", rep);
        write_report_csv(fs::path(cfg.out) / "report.csv", rep);
        write_resolved_config(cfg, prepared, cfg.out);
    });
    return rep;
}

// ---------------------------------------------------------------------------
// Ablation and sweeps
// ---------------------------------------------------------------------------

struct Variant {
    std::string name;
    bool skip_stage1;
    bool skip_stage3;
};

inline const std::vector<Variant>& ablation_variants() {
    static const std::vector<Variant> v{{"stage2-only", true, true}, {"stage1+2", false, true}, {"full", false, false}};
    return v;
}

struct VariantOutcome {
    std::string name;
    FeatureRanking ranking;
    EvaluationReport report;
};

/// Selection + evaluation on prepared data, writing the usual files into `dir`.
inline VariantOutcome run_variant(const RunConfig& cfg, const Dataset& prepared, const std::string& name,
                                  const fs::path& dir) {
    SelectionResult sel = select_features(cfg, prepared);
    VariantOutcome v{name, sel.ranking, in_stage("evaluate", [&] {
                         return evaluate_selection(prepared, sel.ranking, evaluate_options(cfg));
                     })};
    if (!dir.empty()) {
        in_stage("write", [&] {
            fs::create_directories(dir);
            write_ranking_csv(dir / "ranking.csv", sel.ranking, prepared.feature_names);
            write_trace_csv(dir / "trace.csv", sel.fit.trace);
            write_report_json(dir / "report.json", v.report);
            write_report_csv(dir / "report.csv", v.report);
        });
    }
    return v;
}

/// Runs stage2-only, stage1+2 and full with shared data, noise, init and
/// folds. Pass `write = false` to skip all file output.
inline std::vector<VariantOutcome> run_ablation(const RunConfig& cfg, const Dataset& prepared, bool write = true) {
    std::vector<VariantOutcome> out;
    for (const auto& v : ablation_variants()) {
        RunConfig c = cfg;
        c.skip_stage1 = v.skip_stage1;
        c.skip_stage3 = v.skip_stage3;
        out.push_back(run_variant(c, prepared, v.name, write ? fs::path(cfg.out) / v.name : fs::path()));
    }
    return out;
}

inline std::vector<VariantOutcome> cmd_ablate(const RunConfig& cfg) {
    cfg.validate();
    const Dataset prepared = prepare_dataset(cfg, load_for(cfg));
    auto outcomes = run_ablation(cfg, prepared);
    in_stage("write", [&] {
        nlohmann::json j = nlohmann::json::array();
        std::ofstream csv(fs::path(cfg.out) / "ablation.csv", std::ios::binary);
        csv << "variant,metric,mean,std\n";
        for (const auto& o : outcomes) {
            j.push_back({{"variant", o.name}, {"mean", to_json(o.report.overall.mean)},
                         {"std", to_json(o.report.overall.stddev)}});
            const auto m = o.report.overall.mean.as_array(), s = o.report.overall.stddev.as_array();
            for (std::size_t i = 0; i < 5; ++i)
                csv << o.name << ',' << Metrics::names[i] << ',' << format_double(m[i]) << ',' << format_double(s[i])
                    << '\n';
        }
        write_json_file(fs::path(cfg.out) / "ablation.json", j);
        write_resolved_config(cfg, prepared, cfg.out);
    });
    return outcomes;
}

enum class SweepParam { alpha, beta, gamma };

inline SweepParam parse_sweep_param(std::string_view s) {
    if (s == "alpha") return SweepParam::alpha;
    if (s == "beta") return SweepParam::beta;
    if (s == "gamma") return SweepParam::gamma;
    throw ConfigError("unknown sweep parameter '" + std::string(s) + "' (expected alpha, beta or gamma)");
}

inline std::string to_string(SweepParam p) {
    return p == SweepParam::alpha ? "alpha" : p == SweepParam::beta ? "beta" : "gamma";
}

struct SweepRow {
    double value;
    MetricSummary summary;
};

/// One select+evaluate per grid value; writes sweep.csv and per-value subdirectories.
inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, SweepParam param, const std::vector<double>& grid) {
    cfg.validate();
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    for (double v : grid)
        if (!(v > 0.0)) throw ConfigError("sweep grid values must be positive");
    const Dataset prepared = prepare_dataset(cfg, load_for(cfg));
    std::vector<SweepRow> rows;
    for (double v : grid) {
        RunConfig c = cfg;
        (param == SweepParam::alpha ? c.hp.alpha : param == SweepParam::beta ? c.hp.beta : c.hp.gamma) = v;
        const auto dir = fs::path(cfg.out) / (to_string(param) + "=" + format_double(v));
        auto o = run_variant(c, prepared, to_string(param), dir);
        rows.push_back({v, o.report.overall});
    }
    in_stage("write", [&] {
        std::ofstream csv(fs::path(cfg.out) / "sweep.csv", std::ios::binary);
        csv << to_string(param);
        for (auto n : Metrics::names) csv << ',' << n;
        for (auto n : Metrics::names) csv << ',' << n << "_std";
        csv << '\n';
        for (const auto& r : rows) {
            csv << format_double(r.value);
            for (double m : r.summary.mean.as_array()) csv << ',' << format_double(m);
            for (double s : r.summary.stddev.as_array()) csv << ',' << format_double(s);
            csv << '\n';
        }
        nlohmann::json j = to_json(cfg);
        j["sweep_param"] = to_string(param);
        j["sweep_grid"] = grid;
        write_json_file(fs::path(cfg.out) / "config.json", j);
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Synthetic planted-feature data
// ---------------------------------------------------------------------------

struct SynthOptions {
    std::size_t n = 500;
    std::size_t d = 100;
    std::size_t q = 8;
    std::size_t informative = 10;
    double noise = 0.2;
    std::uint64_t seed = 0;
};

/// Gaussian features; the first `informative` columns drive the label
/// logits through a fixed random coefficient matrix with |N(0,1)| entries
/// (positive relations, matching the nonnegative factor model), the rest
/// are independent noise. A label is on when its logit exceeds 0.5; a row
/// without any label gets its argmax label. Candidates add per-entry noise.
inline Dataset make_synthetic(const SynthOptions& o) {
    require(o.n >= 2 && o.d >= 1 && o.q >= 1, "synth: need n >= 2, d >= 1, q >= 1");
    require(o.informative >= 1 && o.informative <= o.d, "synth: informative must be in [1, d]");
    require(o.noise >= 0.0 && o.noise <= 1.0, "synth: noise must be in [0,1]");
    const auto n = static_cast<Eigen::Index>(o.n), d = static_cast<Eigen::Index>(o.d),
               q = static_cast<Eigen::Index>(o.q), inf = static_cast<Eigen::Index>(o.informative);
    Rng rng(derive_seed(o.seed, Stream::synth));
    Matrix coef(inf, q);
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index i = 0; i < inf; ++i) coef(i, j) = std::abs(rng.normal());
    Dataset ds;
    ds.features.resize(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) ds.features(i, j) = rng.normal();
    const Matrix logits = ds.features.leftCols(inf) * coef / std::sqrt(static_cast<double>(inf));
    Matrix truth = (logits.array() > 0.5).cast<double>();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (truth.row(i).any()) continue;
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        truth(i, best) = 1.0;
    }
    ds.true_labels = truth;
    ds.candidate_labels = truth;
    for (Eigen::Index j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
    for (Eigen::Index j = 0; j < q; ++j) ds.label_names.push_back("l" + std::to_string(j));
    for (std::size_t j = 0; j < o.informative; ++j) ds.planted_features.push_back(j);
    return inject_candidate_noise(ds, o.noise, derive_seed(o.seed, Stream::noise));
}

inline Dataset cmd_synth(const SynthOptions& o, const fs::path& out) {
    Dataset ds = make_synthetic(o);
    write_csv_pair(ds, out,
                   {{"informative", o.informative}, {"noise", o.noise}, {"seed", o.seed}, {"generator", "planted-linear"}});
    return ds;
}

}  // namespace pmlfs
