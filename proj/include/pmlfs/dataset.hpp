#pragma once

// Multi-label datasets: loading (CSV pair + JSON sidecar, MULAN/MEKA-style
// ARFF), candidate-label noise, feature scaling and k-fold splits.

#include "pmlfs/common.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pmlfs {

/// Features plus the observed (candidate) label matrix. `true_labels` is
/// only used for evaluation and noise synthesis.
struct Dataset {
    Matrix features;                     // n x d
    std::optional<Matrix> true_labels;   // n x q over {0,1}
    Matrix candidate_labels;             // n x q over {0,1}
    std::vector<std::string> feature_names;
    std::vector<std::string> label_names;
    std::vector<std::size_t> planted_features;  // synthetic data only

    [[nodiscard]] Eigen::Index n() const { return features.rows(); }
    [[nodiscard]] Eigen::Index d() const { return features.cols(); }
    [[nodiscard]] Eigen::Index q() const { return candidate_labels.cols(); }
};

struct FoldSplit {
    IndexVector train_indices;
    IndexVector test_indices;
};

enum class DataFormat { csv_pair, arff };
enum class NoiseModel { per_entry, per_sample };

struct LoadOptions {
    /// ARFF only: number of label attributes at the end of the attribute
    /// list (MULAN convention). 0 means detect from the relation header
    /// (MEKA "-C") or from the trailing {0,1} attributes.
    std::size_t arff_label_count = 0;
    /// Drop rows whose label set is empty instead of rejecting the file.
    bool drop_empty_label_rows = false;
};

inline DataFormat parse_data_format(std::string_view s) {
    if (s == "csv" || s == "csv-pair") return DataFormat::csv_pair;
    if (s == "arff" || s == "arff-like") return DataFormat::arff;
    throw ConfigError("unknown data format '" + std::string(s) + "' (expected csv-pair or arff)");
}

inline std::string to_string(DataFormat f) { return f == DataFormat::csv_pair ? "csv-pair" : "arff"; }

inline NoiseModel parse_noise_model(std::string_view s) {
    if (s == "per-entry") return NoiseModel::per_entry;
    if (s == "per-sample") return NoiseModel::per_sample;
    throw ConfigError("unknown noise model '" + std::string(s) + "'");
}

inline std::string to_string(NoiseModel m) { return m == NoiseModel::per_entry ? "per-entry" : "per-sample"; }

namespace detail {

inline bool is_binary(double v) { return v == 0.0 || v == 1.0; }

inline void check_binary(const Matrix& m, const std::vector<std::string>& names, const char* what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!is_binary(m(i, j)))
                throw ValidationError(std::string(what) + ": non-binary value " + format_double(m(i, j)) +
                                      " at row " + std::to_string(i) + ", label '" +
                                      (static_cast<std::size_t>(j) < names.size() ? names[j] : std::to_string(j)) +
                                      "'");
}

inline std::vector<std::size_t> empty_rows(const Matrix& labels) {
    std::vector<std::size_t> rows;
    for (Eigen::Index i = 0; i < labels.rows(); ++i)
        if ((labels.row(i).array() == 0.0).all()) rows.push_back(static_cast<std::size_t>(i));
    return rows;
}

inline std::string join_indices(const std::vector<std::size_t>& v, std::size_t limit = 20) {
    std::string s;
    for (std::size_t i = 0; i < v.size() && i < limit; ++i) {
        if (i) s += ", ";
        s += std::to_string(v[i]);
    }
    if (v.size() > limit) s += ", ... (" + std::to_string(v.size()) + " total)";
    return s;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

/// Splits on commas outside double quotes; fields are trimmed.
inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            cur += c;
        } else if (c == ',' && !quoted) {
            out.push_back(unquote(trim(cur)));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(unquote(trim(cur)));
    return out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s)
        if (c != '"') q += c;
    return q + "\"";
}

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

inline CsvTable read_csv_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(path.filename().string() + ": expected " + std::to_string(t.header.size()) +
                                 " fields, got " + std::to_string(fields.size()),
                             lineno);
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j)
            if (!parse_double(fields[j], row[j]))
                throw ParseError(path.filename().string() + ": cannot parse '" + fields[j] + "' in column '" +
                                     t.header[j] + "'",
                                 lineno);
        rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ParseError(path.filename().string() + ": missing header row", lineno);
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

inline void write_csv_matrix(const std::filesystem::path& path, const std::vector<std::string>& header,
                             const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << csv_field(header[j]);
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

inline Matrix select_rows(const Matrix& m, const IndexVector& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline Matrix select_cols(const Matrix& m, const IndexVector& cols) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
    return out;
}

}  // namespace detail

using detail::select_cols;
using detail::select_rows;

/// Checks every Dataset invariant; throws ValidationError on the first violation.
inline void validate(const Dataset& ds) {
    if (ds.n() < 1 || ds.d() < 1 || ds.q() < 1)
        throw ValidationError("dataset must have n, d, q >= 1 (got n=" + std::to_string(ds.n()) +
                              ", d=" + std::to_string(ds.d()) + ", q=" + std::to_string(ds.q()) + ")");
    if (ds.candidate_labels.rows() != ds.n())
        throw ValidationError("label rows (" + std::to_string(ds.candidate_labels.rows()) +
                              ") != feature rows (" + std::to_string(ds.n()) + ")");
    if (!ds.features.allFinite()) throw ValidationError("features contain NaN or Inf");
    if (ds.feature_names.size() != static_cast<std::size_t>(ds.d()) ||
        ds.label_names.size() != static_cast<std::size_t>(ds.q()))
        throw ValidationError("name lists do not match matrix dimensions");
    detail::check_binary(ds.candidate_labels, ds.label_names, "candidate labels");
    if (const auto empty = detail::empty_rows(ds.candidate_labels); !empty.empty())
        throw ValidationError("rows with no candidate label: " + detail::join_indices(empty));
    if (ds.true_labels) {
        const Matrix& t = *ds.true_labels;
        if (t.rows() != ds.n() || t.cols() != ds.q())
            throw ValidationError("true label matrix is " + shape_str(t.rows(), t.cols()) + ", expected " +
                                  shape_str(ds.n(), ds.q()));
        detail::check_binary(t, ds.label_names, "true labels");
        if ((t.array() > ds.candidate_labels.array()).any())
            throw ValidationError("candidate labels must contain every true label");
    }
}

namespace detail {

inline Dataset drop_rows(Dataset ds, const std::vector<std::size_t>& drop) {
    std::vector<bool> gone(static_cast<std::size_t>(ds.n()), false);
    for (auto r : drop) gone[r] = true;
    IndexVector keep;
    for (std::size_t i = 0; i < gone.size(); ++i)
        if (!gone[i]) keep.push_back(i);
    ds.features = select_rows(ds.features, keep);
    ds.candidate_labels = select_rows(ds.candidate_labels, keep);
    if (ds.true_labels) ds.true_labels = select_rows(*ds.true_labels, keep);
    return ds;
}

inline Dataset finish_load(Dataset ds, const LoadOptions& opt) {
    if (opt.drop_empty_label_rows) {
        // Binarity first so a bad cell is reported as such.
        check_binary(ds.candidate_labels, ds.label_names, "labels");
        if (auto empty = empty_rows(ds.candidate_labels); !empty.empty()) ds = drop_rows(std::move(ds), empty);
    }
    validate(ds);
    return ds;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) {
    if (std::filesystem::is_directory(p)) return p / "dataset.json";
    return p;
}

inline Dataset load_csv_pair(const std::filesystem::path& path, const LoadOptions& opt) {
    const auto side = sidecar_path(path);
    std::ifstream in(side);
    if (!in) throw ParseError("cannot open sidecar " + side.string(), 0);
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(side.filename().string() + ": " + e.what(), 0);
    }
    const auto dir = side.parent_path();
    const auto features_file = dir / meta.value("features", std::string("features.csv"));
    const auto labels_file = dir / meta.value("labels", std::string("labels.csv"));
    const bool labels_are_truth = meta.value("labels_are_truth", false);

    auto feats = read_csv_matrix(features_file);
    auto labels = read_csv_matrix(labels_file);

    Dataset ds;
    ds.features = std::move(feats.values);
    ds.feature_names = std::move(feats.header);
    ds.label_names = std::move(labels.header);
    if (labels.values.rows() != ds.features.rows())
        throw ValidationError("labels.csv has " + std::to_string(labels.values.rows()) + " rows, features.csv has " +
                              std::to_string(ds.features.rows()));
    check_binary(labels.values, ds.label_names, "labels");
    if (labels_are_truth) {
        ds.true_labels = labels.values;
        if (meta.contains("candidates")) {
            auto cand = read_csv_matrix(dir / meta["candidates"].get<std::string>());
            if (cand.header != ds.label_names) throw ValidationError("candidate label header differs from labels header");
            ds.candidate_labels = std::move(cand.values);
        } else {
            ds.candidate_labels = labels.values;
        }
    } else {
        ds.candidate_labels = std::move(labels.values);
    }
    if (meta.contains("planted")) ds.planted_features = meta["planted"].get<std::vector<std::size_t>>();

    for (const char* key : {"n", "d", "q"}) {
        if (!meta.contains(key)) continue;
        const auto want = meta[key].get<long long>();
        const long long got = key[0] == 'n' ? ds.n() : key[0] == 'd' ? ds.d() : ds.q();
        if (want != got)
            throw ValidationError(std::string("sidecar declares ") + key + "=" + std::to_string(want) +
                                  " but files give " + std::to_string(got));
    }
    return finish_load(std::move(ds), opt);
}

struct ArffAttribute {
    std::string name;
    bool nominal = false;
    std::vector<std::string> values;  // nominal domain
};

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Reads "name rest" where name may be quoted.
inline std::pair<std::string, std::string> take_token(std::string_view s) {
    std::string str = trim(s);
    if (str.empty()) return {};
    if (str[0] == '\'' || str[0] == '"') {
        const char q = str[0];
        auto end = str.find(q, 1);
        if (end == std::string::npos) return {str.substr(1), {}};
        return {str.substr(1, end - 1), trim(std::string_view(str).substr(end + 1))};
    }
    auto end = str.find_first_of(" \t");
    if (end == std::string::npos) return {str, {}};
    return {str.substr(0, end), trim(std::string_view(str).substr(end))};
}

inline Dataset load_arff(const std::filesystem::path& path, const LoadOptions& opt) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::vector<ArffAttribute> attrs;
    long meka_c = 0;
    bool in_data = false;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines;
    std::string raw;
    std::size_t lineno = 0;

    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '%') continue;
        if (!in_data) {
            const std::string low = lower(line);
            if (low.rfind("@relation", 0) == 0) {
                const auto pos = line.find("-C");
                if (pos != std::string::npos) {
                    std::string rest = line.substr(pos + 2);
                    auto b = rest.find_first_not_of(" \t");
                    if (b != std::string::npos) {
                        rest = rest.substr(b);
                        auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), meka_c);
                        if (ec != std::errc()) throw ParseError("bad -C option in @relation", lineno);
                    }
                }
            } else if (low.rfind("@attribute", 0) == 0) {
                auto [name, type] = take_token(std::string_view(line).substr(10));
                if (name.empty()) throw ParseError("attribute without a name", lineno);
                ArffAttribute a;
                a.name = name;
                if (!type.empty() && type[0] == '{') {
                    const auto close = type.find('}');
                    if (close == std::string::npos) throw ParseError("unterminated nominal domain", lineno);
                    a.nominal = true;
                    a.values = split_csv(std::string_view(type).substr(1, close - 1));
                } else {
                    const auto t = lower(type);
                    if (t != "numeric" && t != "real" && t != "integer")
                        throw ParseError("unsupported attribute type '" + type + "' for '" + name + "'", lineno);
                }
                attrs.push_back(std::move(a));
            } else if (low.rfind("@data", 0) == 0) {
                in_data = true;
            } else {
                throw ParseError("unexpected header line '" + line + "'", lineno);
            }
            continue;
        }

        std::vector<double> row(attrs.size(), 0.0);
        auto parse_value = [&](std::size_t idx, const std::string& tok) {
            if (tok == "?") throw ParseError("missing value for '" + attrs[idx].name + "'", lineno);
            if (!parse_double(tok, row[idx]))
                throw ParseError("cannot parse '" + tok + "' for attribute '" + attrs[idx].name + "'", lineno);
        };
        if (line[0] == '{') {
            const auto close = line.find('}');
            if (close == std::string::npos) throw ParseError("unterminated sparse row", lineno);
            const std::string body = line.substr(1, close - 1);
            if (!trim(body).empty()) {
                for (const auto& pair : split_csv(body)) {
                    auto [idx_s, val] = take_token(pair);
                    std::size_t idx = 0;
                    auto [p, ec] = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), idx);
                    if (ec != std::errc() || p != idx_s.data() + idx_s.size() || idx >= attrs.size())
                        throw ParseError("bad sparse index '" + idx_s + "'", lineno);
                    parse_value(idx, val);
                }
            }
        } else {
            const auto fields = split_csv(line);
            if (fields.size() != attrs.size())
                throw ParseError("expected " + std::to_string(attrs.size()) + " values, got " +
                                     std::to_string(fields.size()),
                                 lineno);
            for (std::size_t j = 0; j < fields.size(); ++j) parse_value(j, fields[j]);
        }
        rows.push_back(std::move(row));
        row_lines.push_back(lineno);
    }
    if (!in_data) throw ParseError("no @data section", lineno);

    // Decide which attributes are labels.
    std::size_t first_label = 0, label_count = 0;
    if (opt.arff_label_count > 0) {
        label_count = opt.arff_label_count;
        if (label_count >= attrs.size()) throw ParseError("label count leaves no feature attributes", 0);
        first_label = attrs.size() - label_count;
    } else if (meka_c > 0) {
        label_count = static_cast<std::size_t>(meka_c);
        first_label = 0;
    } else if (meka_c < 0) {
        label_count = static_cast<std::size_t>(-meka_c);
        if (label_count > attrs.size()) throw ParseError("-C exceeds attribute count", 0);
        first_label = attrs.size() - label_count;
    } else {
        std::size_t j = attrs.size();
        auto is01 = [](const ArffAttribute& a) {
            return a.nominal && a.values.size() == 2 &&
                   ((a.values[0] == "0" && a.values[1] == "1") || (a.values[0] == "1" && a.values[1] == "0"));
        };
        while (j > 0 && is01(attrs[j - 1])) --j;
        first_label = j;
        label_count = attrs.size() - j;
    }
    if (label_count == 0 || label_count >= attrs.size())
        throw ParseError("cannot identify label attributes (pass a label count)", 0);

    Dataset ds;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto q = static_cast<Eigen::Index>(label_count);
    const auto d = static_cast<Eigen::Index>(attrs.size() - label_count);
    ds.features.resize(n, d);
    Matrix labels(n, q);
    IndexVector feature_attr;
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        if (a >= first_label && a < first_label + label_count) {
            ds.label_names.push_back(attrs[a].name);
        } else {
            if (attrs[a].nominal)
                throw ParseError("nominal feature attribute '" + attrs[a].name + "' is not supported", 0);
            ds.feature_names.push_back(attrs[a].name);
            feature_attr.push_back(a);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < d; ++j) ds.features(i, j) = r[feature_attr[static_cast<std::size_t>(j)]];
        for (Eigen::Index j = 0; j < q; ++j) {
            const double v = r[first_label + static_cast<std::size_t>(j)];
            if (!is_binary(v))
                throw ValidationError("line " + std::to_string(row_lines[static_cast<std::size_t>(i)]) +
                                      ": non-binary value " + format_double(v) + " at row " + std::to_string(i) +
                                      ", label '" + ds.label_names[static_cast<std::size_t>(j)] + "'");
            labels(i, j) = v;
        }
    }
    // Benchmark label files carry ground truth.
    ds.true_labels = labels;
    ds.candidate_labels = std::move(labels);
    return finish_load(std::move(ds), opt);
}

}  // namespace detail

/// Loads a dataset. For csv-pair `path` is the JSON sidecar or the directory
/// holding `dataset.json`; for arff it is the .arff file.
inline Dataset load_dataset(const std::filesystem::path& path, DataFormat format, const LoadOptions& opt = {}) {
    return format == DataFormat::csv_pair ? detail::load_csv_pair(path, opt) : detail::load_arff(path, opt);
}

/// Writes features.csv, labels.csv (truth when present, else candidates),
/// candidates.csv (when truth is present) and dataset.json into `dir`.
inline void write_csv_pair(const Dataset& ds, const std::filesystem::path& dir, nlohmann::json extra = {}) {
    std::filesystem::create_directories(dir);
    detail::write_csv_matrix(dir / "features.csv", ds.feature_names, ds.features);
    nlohmann::json meta = {{"n", ds.n()}, {"d", ds.d()}, {"q", ds.q()},
                           {"labels_are_truth", ds.true_labels.has_value()},
                           {"features", "features.csv"}, {"labels", "labels.csv"}};
    if (ds.true_labels) {
        detail::write_csv_matrix(dir / "labels.csv", ds.label_names, *ds.true_labels);
        detail::write_csv_matrix(dir / "candidates.csv", ds.label_names, ds.candidate_labels);
        meta["candidates"] = "candidates.csv";
    } else {
        detail::write_csv_matrix(dir / "labels.csv", ds.label_names, ds.candidate_labels);
    }
    if (!ds.planted_features.empty()) meta["planted"] = ds.planted_features;
    if (extra.is_object())
        for (auto& [k, v] : extra.items()) meta[k] = v;
    std::ofstream out(dir / "dataset.json", std::ios::binary);
    out << meta.dump(2) << '\n';
    if (!out) throw Error("cannot write " + (dir / "dataset.json").string());
}

/// Rebuilds candidate labels from the ground truth by turning negatives into
/// candidates. per_entry flips each negative independently with probability
/// `rate`; per_sample flips round(rate * #negatives) per row, chosen uniformly.
inline Dataset inject_candidate_noise(const Dataset& ds, double rate, std::uint64_t seed,
                                      NoiseModel model = NoiseModel::per_entry) {
    require(ds.true_labels.has_value(), "inject_candidate_noise: dataset has no ground-truth labels");
    require(rate >= 0.0 && rate <= 1.0, "inject_candidate_noise: rate must be in [0,1]");
    Dataset out = ds;
    const Matrix& truth = *ds.true_labels;
    Matrix cand = truth;
    Rng rng(seed);
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        if (model == NoiseModel::per_entry) {
            for (Eigen::Index j = 0; j < truth.cols(); ++j)
                if (truth(i, j) == 0.0 && rng.bernoulli(rate)) cand(i, j) = 1.0;
        } else {
            std::vector<Eigen::Index> neg;
            for (Eigen::Index j = 0; j < truth.cols(); ++j)
                if (truth(i, j) == 0.0) neg.push_back(j);
            const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(neg.size())));
            for (std::size_t f = 0; f < flips; ++f) {
                const auto pick = f + static_cast<std::size_t>(rng.below(neg.size() - f));
                std::swap(neg[f], neg[pick]);
                cand(i, neg[f]) = 1.0;
            }
        }
    }
    out.candidate_labels = std::move(cand);
    if (const auto empty = detail::empty_rows(out.candidate_labels); !empty.empty())
        throw ValidationError("rows with no candidate label after noise: " + detail::join_indices(empty));
    return out;
}

/// Min-max scales a matrix column-wise to [0,1]; constant columns become 0.
inline Matrix minmax_scale(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double lo = x.col(j).minCoeff();
        const double hi = x.col(j).maxCoeff();
        if (!(hi > lo)) {
            out.col(j).setZero();
            continue;
        }
        const double span = hi - lo;
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = (x(i, j) - lo) / span;
    }
    return out;
}

inline Dataset normalize_features(const Dataset& ds) {
    Dataset out = ds;
    out.features = minmax_scale(ds.features);
    return out;
}

/// Shuffled k-fold partition of 0..n. The first n % k folds get one extra
/// test index. Index lists are sorted.
inline std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    require(k >= 2, "kfold_split: k must be >= 2");
    require(k <= n, "kfold_split: k (" + std::to_string(k) + ") exceeds n (" + std::to_string(n) + ")");
    IndexVector perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(perm);

    std::vector<std::size_t> fold_of(n);
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t s = 0; s < size; ++s) fold_of[perm[pos++]] = f;
    }
    std::vector<FoldSplit> folds(k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].test_indices : folds[f].train_indices).push_back(i);
    return folds;
}

}  // namespace pmlfs
