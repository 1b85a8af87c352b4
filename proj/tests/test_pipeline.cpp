#include "pmlfs/pipeline.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

using namespace pmlfs;
using testutil::read_text;
using testutil::temp_dir;

namespace {

SynthOptions small_synth(std::uint64_t seed = 1) {
    SynthOptions o;
    o.n = 60;
    o.d = 12;
    o.q = 4;
    o.informative = 3;
    o.seed = seed;
    return o;
}

RunConfig small_config(const fs::path& data, const fs::path& out) {
    RunConfig c;
    c.data = data.string();
    c.out = out.string();
    c.seed = 7;
    c.hp.max_iters = 40;
    c.folds = 3;
    c.percents = {0.25, 0.5};
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PMLFS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
    RunConfig c;
    c.data = "somewhere";
    c.noise = 0.3;
    c.noise_model = NoiseModel::per_sample;
    c.seed = 0xFFFFFFFFFFFFFFFFull;
    c.hp.alpha = 0.001;
    c.hp.k = 4;
    c.hp.update_mode = UpdateMode::paper_faithful;
    c.bins = 7;
    c.bin_strategy = BinStrategy::equal_width;
    c.label_normalization = LabelNormalization::none;
    c.include_diagonal = false;
    c.percents = {0.1, 0.3};
    c.skip_stage3 = true;
    const auto j = to_json(c);
    EXPECT_EQ(to_json(run_config_from_json(j)), j);
    RunConfig plain;
    EXPECT_EQ(to_json(run_config_from_json(to_json(plain))), to_json(plain));
}

TEST(RunConfig, Validation) {
    RunConfig c;
    EXPECT_THROW(c.validate(), ConfigError);
    c.data = "/definitely/not/here";
    EXPECT_THROW(c.validate(), ConfigError);
    const auto dir = temp_dir("cfg_valid");
    c.data = dir.string();
    c.percents = {1.5};
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW((void)run_config_from_json(nlohmann::json{{"update_mode", "bogus"}}), ConfigError);
}

TEST(Synth, NoNoiseMeansCandidatesEqualTruth) {
    auto o = small_synth();
    o.noise = 0.0;
    const auto ds = make_synthetic(o);
    EXPECT_TRUE((ds.candidate_labels.array() == ds.true_labels->array()).all());
    EXPECT_EQ(ds.planted_features, (IndexVector{0, 1, 2}));
}

TEST(Synth, AllInformative) {
    auto o = small_synth();
    o.informative = o.d;
    EXPECT_EQ(make_synthetic(o).planted_features.size(), o.d);
    o.informative = o.d + 1;
    EXPECT_THROW((void)make_synthetic(o), ContractError);
}

TEST(Synth, FilesIdenticalAcrossRuns) {
    SynthOptions o;  // 500 x 100 x 8, 10 informative
    o.seed = 42;
    const auto a = temp_dir("synth_a"), b = temp_dir("synth_b");
    const auto ds = cmd_synth(o, a);
    (void)cmd_synth(o, b);
    EXPECT_EQ(ds.n(), 500);
    for (const char* f : {"features.csv", "labels.csv", "candidates.csv", "dataset.json"})
        EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
    const auto meta = nlohmann::json::parse(read_text(a / "dataset.json"));
    EXPECT_EQ(meta["planted"].size(), 10u);
    const auto back = load_dataset(a, DataFormat::csv_pair);
    EXPECT_TRUE((back.candidate_labels.array() == ds.candidate_labels.array()).all());
}

TEST(Select, VariantsAndDeterminism) {
    const auto base = temp_dir("select");
    (void)cmd_synth(small_synth(), base / "data");
    auto cfg = small_config(base / "data", base / "full");
    const auto full = cmd_select(cfg, std::cerr);
    const auto again = cmd_select(cfg, std::cerr);
    EXPECT_EQ(full.ranking.order, again.ranking.order);
    EXPECT_EQ(full.ranking.scores, again.ranking.scores);
    for (const char* f : {"ranking.csv", "trace.csv", "config.json"}) EXPECT_TRUE(fs::exists(base / "full" / f)) << f;

    // The resolved config reproduces the run.
    const auto resolved = read_run_config(base / "full" / "config.json");
    EXPECT_EQ(resolved.hp.k, HyperParams{}.rank_for(60, 12));
    EXPECT_EQ(select_features(resolved, prepare_dataset(resolved, load_for(resolved))).ranking.order, full.ranking.order);

    // Stage 2 alone fits against the binary candidates and ranks the raw W.
    auto s2 = cfg;
    s2.skip_stage1 = s2.skip_stage3 = true;
    const auto r2 = select_features(s2, prepare_dataset(s2, load_for(s2)));
    EXPECT_TRUE((r2.labels.values.array() == r2.data.candidate_labels.array()).all());
    EXPECT_TRUE((r2.weights.array() == r2.fit.state.W.array()).all());

    auto s12 = cfg;
    s12.skip_stage3 = true;
    const auto r12 = select_features(s12, prepare_dataset(s12, load_for(s12)));
    EXPECT_TRUE((r12.weights.array() == r12.fit.state.W.array()).all());
    EXPECT_LE(r12.labels.values.maxCoeff(), 1.0);
    const auto rf = select_features(cfg, prepare_dataset(cfg, load_for(cfg)));
    EXPECT_LT((rf.weights - rf.fit.state.W * rf.zp.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Select, StageErrorNamesStage) {
    const auto base = temp_dir("select_err");
    (void)cmd_synth(small_synth(), base / "data");
    auto cfg = small_config(base / "data", base / "out");
    cfg.hp.k = 100;
    try {
        (void)cmd_select(cfg, std::cerr);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_FALSE(e.stage().empty());
    }
}

TEST(Evaluate, WritesReportAndIsRepeatable) {
    const auto base = temp_dir("evaluate");
    (void)cmd_synth(small_synth(), base / "data");
    auto cfg = small_config(base / "data", base / "out");
    (void)cmd_select(cfg, std::cerr);
    const auto rep = cmd_evaluate(cfg);
    EXPECT_EQ(rep.entries.size(), 3u * 2u);
    const auto csv1 = read_text(base / "out" / "report.csv");
    const auto json1 = read_text(base / "out" / "report.json");
    (void)cmd_evaluate(cfg);
    EXPECT_EQ(read_text(base / "out" / "report.csv"), csv1);
    EXPECT_EQ(read_text(base / "out" / "report.json"), json1);

    cfg.folds = 2;
    cfg.percents = {0.5};
    EXPECT_EQ(cmd_evaluate(cfg).entries.size(), 2u);
}

TEST(Evaluate, DefaultPercentsGiveTwentyPoints) {
    const auto base = temp_dir("evaluate20");
    auto o = small_synth();
    o.d = 100;
    o.informative = 10;
    (void)cmd_synth(o, base / "data");
    auto cfg = small_config(base / "data", base / "out");
    cfg.percents = default_percents();
    cfg.hp.max_iters = 5;
    (void)cmd_select(cfg, std::cerr);
    const auto rep = cmd_evaluate(cfg);
    EXPECT_EQ(rep.entries.size(), 3u * 20u);
    std::set<std::size_t> counts;
    for (const auto& e : rep.entries) counts.insert(e.features);
    EXPECT_EQ(counts.size(), 20u);
}

TEST(Evaluate, DimensionMismatchIsConfigError) {
    const auto base = temp_dir("evaluate_dim");
    (void)cmd_synth(small_synth(), base / "data");
    auto other = small_synth();
    other.d = 10;
    (void)cmd_synth(other, base / "data10");
    auto cfg = small_config(base / "data10", base / "out");
    (void)cmd_select(cfg, std::cerr);
    cfg.data = (base / "data").string();
    EXPECT_THROW((void)cmd_evaluate(cfg), ConfigError);
}

TEST(Ablate, ShapeAndSharedFolds) {
    const auto base = temp_dir("ablate");
    (void)cmd_synth(small_synth(), base / "data");
    const auto cfg = small_config(base / "data", base / "out");
    const auto outcomes = cmd_ablate(cfg);
    ASSERT_EQ(outcomes.size(), 3u);
    EXPECT_EQ(outcomes[0].name, "stage2-only");
    EXPECT_EQ(outcomes[1].name, "stage1+2");
    EXPECT_EQ(outcomes[2].name, "full");
    for (const auto& o : outcomes)
        for (std::size_t f = 0; f < outcomes[0].report.folds.size(); ++f)
            EXPECT_EQ(o.report.folds[f].test_indices, outcomes[0].report.folds[f].test_indices);
    const auto csv = read_text(base / "out" / "ablation.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 5);
    EXPECT_EQ(nlohmann::json::parse(read_text(base / "out" / "ablation.json")).size(), 3u);
    for (const char* v : {"stage2-only", "stage1+2", "full"}) EXPECT_TRUE(fs::exists(base / "out" / v / "report.csv"));
}

TEST(Sweep, SevenPointGrid) {
    const auto base = temp_dir("sweep");
    (void)cmd_synth(small_synth(), base / "data");
    auto cfg = small_config(base / "data", base / "out");
    cfg.hp.max_iters = 10;
    const std::vector<double> grid{0.001, 0.01, 0.1, 1, 10, 100, 1000};
    const auto rows = cmd_sweep(cfg, SweepParam::gamma, grid);
    EXPECT_EQ(rows.size(), 7u);
    const auto csv = read_text(base / "out" / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
    EXPECT_EQ(csv.rfind("gamma,ranking_loss", 0), 0u);
    EXPECT_TRUE(fs::exists(base / "out" / "gamma=1000" / "ranking.csv"));
    EXPECT_THROW((void)cmd_sweep(cfg, SweepParam::gamma, {}), ConfigError);
    EXPECT_THROW((void)cmd_sweep(cfg, SweepParam::gamma, {-1.0}), ConfigError);
}

TEST(Sweep, SingletonEqualsSelectEvaluate) {
    const auto base = temp_dir("sweep1");
    (void)cmd_synth(small_synth(), base / "data");
    auto cfg = small_config(base / "data", base / "sweep");
    cfg.hp.beta = 0.1;
    const auto rows = cmd_sweep(cfg, SweepParam::beta, {0.1});
    auto direct = cfg;
    direct.out = (base / "direct").string();
    (void)cmd_select(direct, std::cerr);
    (void)cmd_evaluate(direct);
    EXPECT_EQ(read_text(base / "sweep" / "beta=0.1" / "ranking.csv"), read_text(base / "direct" / "ranking.csv"));
    EXPECT_EQ(read_text(base / "sweep" / "beta=0.1" / "report.csv"), read_text(base / "direct" / "report.csv"));
    EXPECT_EQ(rows[0].summary.mean.as_array(), cmd_evaluate(direct).overall.mean.as_array());
}

TEST(Noise, AppliedOnlyWhenRequested) {
    const auto base = temp_dir("pipeline_noise");
    auto o = small_synth();
    o.noise = 0.0;
    (void)cmd_synth(o, base / "data");
    auto cfg = small_config(base / "data", base / "out");
    const auto raw = load_for(cfg);
    EXPECT_TRUE((prepare_dataset(cfg, raw).candidate_labels.array() == raw.true_labels->array()).all());
    cfg.noise = 0.5;
    const auto noisy = prepare_dataset(cfg, raw);
    EXPECT_GT(noisy.candidate_labels.sum(), raw.true_labels->sum());
    EXPECT_TRUE((noisy.candidate_labels.array() >= raw.true_labels->array()).all());
}

TEST(Cli, ExitCodes) {
    const auto base = temp_dir("cli");
    const std::string data = (base / "data").string(), out = (base / "out").string();
    EXPECT_EQ(run_cli("synth --n 40 --d 8 --q 3 --informative 2 --seed 3 --out " + data), 0);
    EXPECT_EQ(run_cli("select --data " + data + " --max-iters 20 --out " + out), 0);
    EXPECT_EQ(run_cli("evaluate --data " + data + " --folds 3 --percents 0.25,0.5 --out " + out), 0);
    EXPECT_TRUE(fs::exists(base / "out" / "report.json"));
    EXPECT_EQ(run_cli("evaluate --data " + data + " --folds 3 --percents 0.01:0.2:20 --out " + out), 0);
    EXPECT_NE(run_cli("select --data " + (base / "missing").string() + " --out " + out), 0);
    EXPECT_NE(run_cli("select --data " + data + " --update-mode nonsense --out " + out), 0);
    EXPECT_NE(run_cli("sweep --data " + data + " --param delta --grid 1 --out " + out), 0);
    EXPECT_NE(run_cli("bogus"), 0);
}
