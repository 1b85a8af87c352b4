// pmlfs: feature selection for partial multi-label data.
//
//   pmlfs synth    --out DIR [--n --d --q --informative --noise --seed]
//   pmlfs select   --data PATH [options] --out DIR
//   pmlfs evaluate --data PATH [--ranking FILE] [options] --out DIR
//   pmlfs ablate   --data PATH [options] --out DIR
//   pmlfs sweep    --data PATH --param alpha|beta|gamma --grid v1,v2,... --out DIR

#include "pmlfs/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace pmlfs;

std::vector<double> parse_list(const std::string& text) {
    // "a,b,c" or "lo:hi:count" (inclusive, evenly spaced).
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ':')) {
            double v;
            if (!parse_double(tok, v)) throw ConfigError("bad range '" + text + "'");
            parts.push_back(v);
        }
        if (parts.size() != 3 || parts[2] < 1) throw ConfigError("range must be lo:hi:count");
        const auto count = static_cast<int>(parts[2]);
        for (int i = 0; i < count; ++i)
            out.push_back(count == 1 ? parts[0] : parts[0] + (parts[1] - parts[0]) * i / (count - 1));
        return out;
    }
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        double v;
        if (!parse_double(tok, v)) throw ConfigError("bad number '" + tok + "' in list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

struct Flags {
    std::string config, data, format, noise, noise_model, alpha, beta, gamma, latent_k, max_iters, tol, bins,
        bin_strategy, percents, folds, lambda, update_mode, normalization, out, ranking, labels, seed;
    bool skip1 = false, skip3 = false, drop_empty = false, exclude_diag = false;
};

void add_run_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "Start from a saved config.json");
    app->add_option("--data", f.data, "Dataset: sidecar JSON / directory (csv-pair) or .arff file");
    app->add_option("--format", f.format, "csv-pair (default) or arff");
    app->add_option("--labels", f.labels, "ARFF: number of trailing label attributes");
    app->add_flag("--drop-empty", f.drop_empty, "Drop rows with an empty label set");
    app->add_option("--noise", f.noise, "Regenerate candidates from ground truth at this rate");
    app->add_option("--noise-model", f.noise_model, "per-entry (default) or per-sample");
    app->add_option("--seed", f.seed, "64-bit run seed");
    app->add_option("--alpha", f.alpha, "Weight of ||X - UV||^2");
    app->add_option("--beta", f.beta, "Weight of the label-graph Laplacian term");
    app->add_option("--gamma", f.gamma, "Weight of the l2,1 sparsity term");
    app->add_option("--latent-k", f.latent_k, "Latent rank k (0 = min(n,d)/4)");
    app->add_option("--max-iters", f.max_iters, "Maximum optimizer sweeps");
    app->add_option("--tol", f.tol, "Relative objective change tolerance");
    app->add_option("--update-mode", f.update_mode, "corrected-split (default) or paper-faithful");
    app->add_option("--bins", f.bins, "Bins for MI over reconstructed labels");
    app->add_option("--bin-strategy", f.bin_strategy, "quantile (default) or equal-width");
    app->add_option("--normalization", f.normalization, "Label confidence normalization: row-max, global-max, none");
    app->add_flag("--exclude-diagonal", f.exclude_diag, "Drop self-information from label reconstruction");
    app->add_option("--percents", f.percents, "Feature fractions, 'a,b,c' or 'lo:hi:count'");
    app->add_option("--folds", f.folds, "Cross-validation folds");
    app->add_option("--lambda", f.lambda, "Ridge penalty of the evaluation classifier");
    app->add_flag("--skip-stage1", f.skip1, "Use binary candidates instead of reconstructed labels");
    app->add_flag("--skip-stage3", f.skip3, "Rank by the fitted W without weight reconstruction");
    app->add_option("--out", f.out, "Output directory");
}

template <typename T>
T parse_num(const std::string& s, const char* flag) {
    if constexpr (std::is_floating_point_v<T>) {
        double v;
        if (!parse_double(s, v)) throw ConfigError(std::string("bad value for ") + flag + ": " + s);
        return v;
    } else {
        T v{};
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw ConfigError(std::string("bad value for ") + flag + ": " + s);
        return v;
    }
}

RunConfig resolve(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : read_run_config(f.config);
    if (!f.data.empty()) c.data = f.data;
    if (!f.format.empty()) c.format = parse_data_format(f.format);
    if (!f.labels.empty()) c.arff_label_count = parse_num<std::size_t>(f.labels, "--labels");
    if (f.drop_empty) c.drop_empty_label_rows = true;
    if (!f.noise.empty()) c.noise = parse_num<double>(f.noise, "--noise");
    if (!f.noise_model.empty()) c.noise_model = parse_noise_model(f.noise_model);
    if (!f.seed.empty()) c.seed = parse_num<std::uint64_t>(f.seed, "--seed");
    if (!f.alpha.empty()) c.hp.alpha = parse_num<double>(f.alpha, "--alpha");
    if (!f.beta.empty()) c.hp.beta = parse_num<double>(f.beta, "--beta");
    if (!f.gamma.empty()) c.hp.gamma = parse_num<double>(f.gamma, "--gamma");
    if (!f.latent_k.empty()) c.hp.k = parse_num<Eigen::Index>(f.latent_k, "--latent-k");
    if (!f.max_iters.empty()) c.hp.max_iters = parse_num<int>(f.max_iters, "--max-iters");
    if (!f.tol.empty()) c.hp.tol = parse_num<double>(f.tol, "--tol");
    if (!f.update_mode.empty()) c.hp.update_mode = parse_update_mode(f.update_mode);
    if (!f.bins.empty()) c.bins = parse_num<int>(f.bins, "--bins");
    if (!f.bin_strategy.empty()) c.bin_strategy = parse_bin_strategy(f.bin_strategy);
    if (!f.normalization.empty()) c.label_normalization = parse_label_normalization(f.normalization);
    if (f.exclude_diag) c.include_diagonal = false;
    if (!f.percents.empty()) c.percents = parse_list(f.percents);
    if (!f.folds.empty()) c.folds = parse_num<std::size_t>(f.folds, "--folds");
    if (!f.lambda.empty()) c.lambda = parse_num<double>(f.lambda, "--lambda");
    if (f.skip1) c.skip_stage1 = true;
    if (f.skip3) c.skip_stage3 = true;
    if (!f.out.empty()) c.out = f.out;
    if (!f.ranking.empty()) c.ranking = f.ranking;
    return c;
}

// Exit status 0 only if every declared output exists and parses.
void verify_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("missing output " + p.string());
    [[maybe_unused]] const auto j = nlohmann::json::parse(in);
}

void verify_csv(const fs::path& p, std::size_t min_rows) {
    std::ifstream in(p);
    if (!in) throw Error("missing output " + p.string());
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    if (rows < min_rows + 1) throw Error("output " + p.string() + " has too few rows");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature selection for partial multi-label data"};
    app.require_subcommand(1);

    Flags f;
    auto* select = app.add_subcommand("select", "Rank features with the three-stage pipeline");
    auto* evaluate = app.add_subcommand("evaluate", "Cross-validate a ranking with the ridge classifier");
    auto* ablate = app.add_subcommand("ablate", "Compare stage2-only, stage1+2 and full pipelines");
    auto* sweep = app.add_subcommand("sweep", "Sweep alpha, beta or gamma over a grid");
    for (auto* sc : {select, evaluate, ablate, sweep}) add_run_flags(sc, f);
    evaluate->add_option("--ranking", f.ranking, "Ranking CSV (default <out>/ranking.csv)");
    std::string sweep_param, sweep_grid;
    sweep->add_option("--param", sweep_param, "alpha, beta or gamma")->required();
    sweep->add_option("--grid", sweep_grid, "Values, 'a,b,c' or 'lo:hi:count'")->required();

    auto* synth = app.add_subcommand("synth", "Generate a planted-feature synthetic dataset");
    SynthOptions so;
    std::string synth_out = "synthetic";
    synth->add_option("--n", so.n, "Samples")->capture_default_str();
    synth->add_option("--d", so.d, "Features")->capture_default_str();
    synth->add_option("--q", so.q, "Labels")->capture_default_str();
    synth->add_option("--informative", so.informative, "Planted features (the first columns)")->capture_default_str();
    synth->add_option("--noise", so.noise, "Candidate noise rate")->capture_default_str();
    synth->add_option("--seed", so.seed, "64-bit seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto ds = cmd_synth(so, synth_out);
            verify_json(fs::path(synth_out) / "dataset.json");
            (void)load_dataset(synth_out, DataFormat::csv_pair);
            std::cout << "wrote " << ds.n() << "x" << ds.d() << " features, " << ds.q() << " labels to " << synth_out
                      << '\n';
            return 0;
        }
        const RunConfig cfg = resolve(f);
        const fs::path out(cfg.out);
        if (select->parsed()) {
            const auto r = cmd_select(cfg);
            (void)read_ranking_csv(out / "ranking.csv");
            verify_csv(out / "trace.csv", 1);
            verify_json(out / "config.json");
            std::cout << "ranked " << r.ranking.order.size() << " features in " << (r.fit.trace.size() - 1)
                      << " iterations; top:";
            for (auto j : r.ranking.top(10)) std::cout << ' ' << r.data.feature_names[j];
            std::cout << '\n';
        } else if (evaluate->parsed()) {
            const auto rep = cmd_evaluate(cfg);
            verify_json(out / "report.json");
            verify_csv(out / "report.csv", 1);
            const auto m = rep.overall.mean.as_array(), s = rep.overall.stddev.as_array();
            for (std::size_t i = 0; i < 5; ++i)
                std::cout << Metrics::names[i] << ": " << m[i] << " +- " << s[i] << '\n';
        } else if (ablate->parsed()) {
            const auto outcomes = cmd_ablate(cfg);
            verify_csv(out / "ablation.csv", 15);
            verify_json(out / "ablation.json");
            for (const auto& o : outcomes) {
                std::cout << o.name;
                for (double v : o.report.overall.mean.as_array()) std::cout << ' ' << v;
                std::cout << '\n';
            }
        } else if (sweep->parsed()) {
            const auto rows = cmd_sweep(cfg, parse_sweep_param(sweep_param), parse_list(sweep_grid));
            verify_csv(out / "sweep.csv", rows.size());
            verify_json(out / "config.json");
            std::cout << "swept " << rows.size() << " values of " << sweep_param << " -> " << (out / "sweep.csv").string()
                      << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
