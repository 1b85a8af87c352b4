#include "pmlfs/dataset.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace pmlfs;
using testutil::temp_dir;
using testutil::write_text;

namespace {

void write_pair(const std::filesystem::path& dir, const std::string& features, const std::string& labels,
                const std::string& sidecar) {
    write_text(dir / "features.csv", features);
    write_text(dir / "labels.csv", labels);
    write_text(dir / "dataset.json", sidecar);
}

Dataset small_truth_dataset(Rng& rng, Eigen::Index n, Eigen::Index d, Eigen::Index q, double p) {
    Dataset ds;
    ds.features = testutil::random_uniform(rng, n, d, -3.0, 5.0);
    Matrix t = testutil::random_binary(rng, n, q, p);
    for (Eigen::Index i = 0; i < n; ++i) t(i, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(q)))) = 1.0;
    ds.true_labels = t;
    ds.candidate_labels = t;
    for (Eigen::Index j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
    for (Eigen::Index j = 0; j < q; ++j) ds.label_names.push_back("y" + std::to_string(j));
    return ds;
}

std::string birds_like_arff(Rng& rng, int n, int d, int q) {
    std::string s = "% synthetic file shaped like the Birds benchmark\n@relation 'birds'\n\n";
    for (int j = 0; j < d; ++j) s += "@attribute audio_" + std::to_string(j) + " numeric\n";
    for (int j = 0; j < q; ++j) s += "@attribute species_" + std::to_string(j) + " {0,1}\n";
    s += "\n@data\n";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) s += format_double(rng.uniform(-1, 1)) + ",";
        const int hot = static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
        for (int j = 0; j < q; ++j) s += std::string(j == hot || rng.bernoulli(0.1) ? "1" : "0") + (j + 1 < q ? "," : "\n");
    }
    return s;
}

}  // namespace

TEST(LoadDataset, CsvPairMinimal) {
    auto dir = temp_dir("csv_min");
    write_pair(dir, "f\n0.5\n", "a\n1\n", R"({"n":1,"d":1,"q":1,"labels_are_truth":false})");
    const auto ds = load_dataset(dir, DataFormat::csv_pair);
    EXPECT_EQ(ds.n(), 1);
    EXPECT_EQ(ds.d(), 1);
    EXPECT_EQ(ds.q(), 1);
    EXPECT_FALSE(ds.true_labels.has_value());
    EXPECT_EQ(ds.feature_names, std::vector<std::string>{"f"});
}

TEST(LoadDataset, NonBinaryLabelNamesCell) {
    auto dir = temp_dir("csv_nonbinary");
    write_pair(dir, "f\n1\n2\n", "a,b\n1,0\n0,2\n", R"({"labels_are_truth":true})");
    try {
        (void)load_dataset(dir / "dataset.json", DataFormat::csv_pair);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
    }
}

TEST(LoadDataset, EmptyLabelRowListsIndex) {
    auto dir = temp_dir("csv_empty_row");
    write_pair(dir, "f\n1\n2\n3\n", "a,b\n1,0\n0,0\n0,1\n", R"({"labels_are_truth":false})");
    try {
        (void)load_dataset(dir, DataFormat::csv_pair);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    }
    LoadOptions opt;
    opt.drop_empty_label_rows = true;
    EXPECT_EQ(load_dataset(dir, DataFormat::csv_pair, opt).n(), 2);
}

TEST(LoadDataset, MalformedCsvReportsLine) {
    auto dir = temp_dir("csv_malformed");
    write_pair(dir, "f,g\n1,2\n3\n", "a\n1\n1\n", R"({})");
    try {
        (void)load_dataset(dir, DataFormat::csv_pair);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    write_pair(dir, "f\n1\nabc\n", "a\n1\n1\n", R"({})");
    try {
        (void)load_dataset(dir, DataFormat::csv_pair);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(LoadDataset, SidecarDimensionMismatch) {
    auto dir = temp_dir("csv_dims");
    write_pair(dir, "f\n1\n", "a\n1\n", R"({"n":2})");
    EXPECT_THROW((void)load_dataset(dir, DataFormat::csv_pair), ValidationError);
}

TEST(LoadDataset, RoundTripIsBitExact) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        Dataset ds = small_truth_dataset(rng, 13, 4, 3, 0.3);
        ds.features(0, 0) = 0.1 + 0.2;  // not representable in short decimal
        ds.features(1, 1) = -1e-310;    // subnormal
        ds = inject_candidate_noise(ds, 0.3, seed);
        auto dir = temp_dir("roundtrip" + std::to_string(seed));
        write_csv_pair(ds, dir);
        const auto back = load_dataset(dir, DataFormat::csv_pair);
        ASSERT_TRUE(back.true_labels.has_value());
        EXPECT_TRUE((back.features.array() == ds.features.array()).all());
        EXPECT_TRUE((back.candidate_labels.array() == ds.candidate_labels.array()).all());
        EXPECT_TRUE((back.true_labels->array() == ds.true_labels->array()).all());
        EXPECT_EQ(back.feature_names, ds.feature_names);
        EXPECT_EQ(back.label_names, ds.label_names);
    }
}

TEST(LoadDataset, ArffBirdsShape) {
    Rng rng(645);
    auto dir = temp_dir("arff_birds");
    write_text(dir / "birds.arff", birds_like_arff(rng, 645, 260, 19));
    const auto ds = load_dataset(dir / "birds.arff", DataFormat::arff);
    EXPECT_EQ(ds.n(), 645);
    EXPECT_EQ(ds.d(), 260);
    EXPECT_EQ(ds.q(), 19);
    EXPECT_EQ(ds.label_names.front(), "species_0");
    EXPECT_EQ(ds.feature_names.back(), "audio_259");
    ASSERT_TRUE(ds.true_labels.has_value());
}

TEST(LoadDataset, ArffMekaHeaderAndSparseRows) {
    auto dir = temp_dir("arff_meka");
    write_text(dir / "m.arff",
               "@relation 'toy: -C 2'\n"
               "@attribute l0 {0,1}\n@attribute l1 {0,1}\n"
               "@attribute 'feat one' numeric\n@attribute f2 real\n"
               "@data\n"
               "{0 1, 2 0.5}\n"
               "0,1,1.5,2\n"
               "{1 1, 3 -4}\n");
    const auto ds = load_dataset(dir / "m.arff", DataFormat::arff);
    ASSERT_EQ(ds.q(), 2);
    ASSERT_EQ(ds.d(), 2);
    EXPECT_EQ(ds.feature_names[0], "feat one");
    EXPECT_DOUBLE_EQ(ds.features(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(ds.features(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(ds.features(2, 1), -4.0);
    EXPECT_EQ(ds.candidate_labels(0, 0), 1.0);
    EXPECT_EQ(ds.candidate_labels(1, 1), 1.0);
}

TEST(LoadDataset, ArffErrors) {
    auto dir = temp_dir("arff_err");
    write_text(dir / "a.arff", "@relation r\n@attribute f numeric\n@attribute l {0,1}\n@data\n1,2\n");
    EXPECT_THROW((void)load_dataset(dir / "a.arff", DataFormat::arff), ValidationError);
    write_text(dir / "b.arff", "@relation r\n@attribute f numeric\n@attribute l {0,1}\n@data\n1\n");
    try {
        (void)load_dataset(dir / "b.arff", DataFormat::arff);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 5u);
    }
    write_text(dir / "c.arff", "@relation r\n@attribute f numeric\n@attribute l {0,1}\n@data\n?,1\n");
    EXPECT_THROW((void)load_dataset(dir / "c.arff", DataFormat::arff), ParseError);
}

TEST(Noise, ZeroRateKeepsTruth) {
    Rng rng(3);
    const auto ds = small_truth_dataset(rng, 30, 2, 5, 0.3);
    const auto noisy = inject_candidate_noise(ds, 0.0, 99);
    EXPECT_TRUE((noisy.candidate_labels.array() == ds.true_labels->array()).all());
}

TEST(Noise, FullRateMakesAllCandidates) {
    Rng rng(4);
    const auto ds = small_truth_dataset(rng, 30, 2, 5, 0.3);
    const auto noisy = inject_candidate_noise(ds, 1.0, 99);
    EXPECT_TRUE((noisy.candidate_labels.array() == 1.0).all());
    EXPECT_TRUE((noisy.true_labels->array() == ds.true_labels->array()).all());
}

TEST(Noise, BinomialCountAndDeterminism) {
    // 100 x 10 matrix with every entry negative apart from column 0: 900
    // negatives... use 100 x 11 with column 0 positive to get exactly 1000.
    Dataset ds;
    ds.features = Matrix::Ones(100, 1);
    Matrix t = Matrix::Zero(100, 11);
    t.col(0).setOnes();
    ds.true_labels = t;
    ds.candidate_labels = t;
    ds.feature_names = {"f"};
    for (int j = 0; j < 11; ++j) ds.label_names.push_back("l" + std::to_string(j));
    const auto a = inject_candidate_noise(ds, 0.2, 20240601);
    const auto b = inject_candidate_noise(ds, 0.2, 20240601);
    const double flipped = a.candidate_labels.sum() - t.sum();
    // Binomial(1000, 0.2): mean 200, sd 12.6; [150, 250] is about +-4 sd.
    EXPECT_GE(flipped, 150);
    EXPECT_LE(flipped, 250);
    EXPECT_TRUE((a.candidate_labels.array() == b.candidate_labels.array()).all());
    const auto c = inject_candidate_noise(ds, 0.2, 20240602);
    EXPECT_FALSE((a.candidate_labels.array() == c.candidate_labels.array()).all());
}

TEST(Noise, NeverRemovesTruePositives) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto ds = small_truth_dataset(rng, 20, 1, 6, 0.25);
        const double rate = rng.uniform();
        for (auto model : {NoiseModel::per_entry, NoiseModel::per_sample}) {
            const auto noisy = inject_candidate_noise(ds, rate, seed * 7 + 1, model);
            EXPECT_TRUE((noisy.candidate_labels.array() >= ds.true_labels->array()).all());
            EXPECT_NO_THROW(validate(noisy));
        }
    }
}

TEST(Noise, PerSampleFlipsRoundedCount) {
    Rng rng(11);
    const auto ds = small_truth_dataset(rng, 40, 1, 10, 0.2);
    const auto noisy = inject_candidate_noise(ds, 0.5, 5, NoiseModel::per_sample);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        const double neg = ds.q() - ds.true_labels->row(i).sum();
        const double added = noisy.candidate_labels.row(i).sum() - ds.true_labels->row(i).sum();
        EXPECT_EQ(added, std::llround(0.5 * neg));
    }
}

TEST(Noise, RequiresTruth) {
    Dataset ds;
    ds.features = Matrix::Ones(1, 1);
    ds.candidate_labels = Matrix::Ones(1, 1);
    EXPECT_THROW((void)inject_candidate_noise(ds, 0.1, 1), ContractError);
}

TEST(Normalize, Examples) {
    Dataset ds;
    ds.features.resize(3, 3);
    ds.features << 2, 5, 0, 4, 5, 0.25, 6, 5, 1;
    ds.candidate_labels = Matrix::Ones(3, 1);
    const auto n = normalize_features(ds);
    EXPECT_EQ(n.features(0, 0), 0.0);
    EXPECT_EQ(n.features(1, 0), 0.5);
    EXPECT_EQ(n.features(2, 0), 1.0);
    EXPECT_TRUE((n.features.col(1).array() == 0.0).all());
    EXPECT_TRUE((n.features.col(2).array() == ds.features.col(2).array()).all());
}

TEST(Normalize, Idempotent) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Matrix x = testutil::random_uniform(rng, 15, 6, -10, 10);
        x.col(3).setConstant(2.5);
        const Matrix once = minmax_scale(x);
        EXPECT_TRUE((minmax_scale(once).array() == once.array()).all());
        EXPECT_GE(once.minCoeff(), 0.0);
        EXPECT_LE(once.maxCoeff(), 1.0);
    }
}

TEST(KFold, LeaveOneOutShape) {
    const auto folds = kfold_split(10, 10, 1);
    ASSERT_EQ(folds.size(), 10u);
    for (const auto& f : folds) {
        EXPECT_EQ(f.test_indices.size(), 1u);
        EXPECT_EQ(f.train_indices.size(), 9u);
    }
}

TEST(KFold, RemainderDistribution) {
    const auto folds = kfold_split(11, 10, 1);
    std::multiset<std::size_t> sizes;
    for (const auto& f : folds) sizes.insert(f.test_indices.size());
    EXPECT_EQ(sizes.count(1), 9u);
    EXPECT_EQ(sizes.count(2), 1u);
}

TEST(KFold, DeterministicUnderSeed) {
    const auto a = kfold_split(645, 10, 42), b = kfold_split(645, 10, 42), c = kfold_split(645, 10, 43);
    bool differs = false;
    for (std::size_t f = 0; f < 10; ++f) {
        EXPECT_EQ(a[f].test_indices, b[f].test_indices);
        EXPECT_EQ(a[f].train_indices, b[f].train_indices);
        differs |= a[f].test_indices != c[f].test_indices;
    }
    EXPECT_TRUE(differs);
}

TEST(KFold, PartitionProperty) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const std::size_t n = 2 + rng.below(200);
        const std::size_t k = 2 + rng.below(std::min<std::size_t>(n - 1, 12));
        const auto folds = kfold_split(n, k, seed);
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& f : folds) {
            lo = std::min(lo, f.test_indices.size());
            hi = std::max(hi, f.test_indices.size());
            EXPECT_EQ(f.test_indices.size() + f.train_indices.size(), n);
            std::set<std::size_t> train(f.train_indices.begin(), f.train_indices.end());
            for (auto i : f.test_indices) {
                ++seen[i];
                EXPECT_EQ(train.count(i), 0u);
            }
        }
        EXPECT_LE(hi - lo, 1u);
        for (auto s : seen) EXPECT_EQ(s, 1);
    }
}

TEST(KFold, Contract) {
    EXPECT_THROW((void)kfold_split(5, 6, 0), ContractError);
    EXPECT_THROW((void)kfold_split(5, 1, 0), ContractError);
}
