#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tsdiag/common.hpp"

namespace tsdiag {

enum class ClassLabel { Negative = 0, Positive = 1 };

inline const char* to_string(ClassLabel c) {
    return c == ClassLabel::Positive ? "Positive" : "Negative";
}

/// Immutable training set: continuous features plus a binary class vector.
struct Dataset {
    Eigen::MatrixXd features;          // N x D
    std::vector<ClassLabel> labels;    // N
    std::vector<std::string> feature_names;
    std::string id;
    std::string positive_value = "Positive";   // original label strings from ingestion
    std::string negative_value = "Negative";

    std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t dimensions() const { return static_cast<std::size_t>(features.cols()); }

    std::size_t count(ClassLabel c) const {
        std::size_t n = 0;
        for (auto l : labels)
            if (l == c) ++n;
        return n;
    }

    std::vector<std::size_t> indices_of(ClassLabel c) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) idx.push_back(i);
        return idx;
    }

    /// Rows of the feature matrix selected by index, labels carried along.
    Dataset subset(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
        out.labels.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.features.row(static_cast<Eigen::Index>(i)) =
                features.row(static_cast<Eigen::Index>(idx[i]));
            out.labels.push_back(labels[idx[i]]);
        }
        out.feature_names = feature_names;
        out.id = id;
        out.positive_value = positive_value;
        out.negative_value = negative_value;
        return out;
    }

    /// Feature rows of one class as a matrix.
    Eigen::MatrixXd class_matrix(ClassLabel c) const {
        const auto idx = indices_of(c);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), features.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            m.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(idx[i]));
        return m;
    }
};

struct DatasetSummary {
    std::size_t dimensions = 0;
    std::size_t duplicate_instances = 0;
    std::size_t total_instances = 0;
    std::size_t positive_count = 0;
    std::size_t negative_count = 0;
    double imbalance_ratio = 0.0;       // majority / minority, >= 1
    ClassLabel majority = ClassLabel::Negative;
};

/// Per-instance subclass membership. Labels look like N-01, P-02; the prefix
/// always matches the instance's class.
struct SubclassAssignment {
    std::vector<std::string> subclass_ids;               // length N
    std::vector<std::string> subclass_order;             // N-xx first, then P-xx
    std::map<std::string, std::size_t> per_subclass_counts;

    std::size_t index_of(const std::string& subclass) const {
        for (std::size_t i = 0; i < subclass_order.size(); ++i)
            if (subclass_order[i] == subclass) return i;
        throw ValidationError("unknown subclass label: " + subclass);
    }
};

struct CsvLoadResult {
    Dataset data;
    std::size_t dropped_rows = 0;   // rows with missing or unparseable feature cells
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        // unquote and trim surrounding spaces
        std::size_t b = f.find_first_not_of(" \t");
        std::size_t e = f.find_last_not_of(" \t");
        f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
        if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
    }
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

/// Read a CSV training set. The label column is selected by name, every other
/// column must be numeric; rows with missing or unparseable feature cells are
/// dropped and counted. Labels are mapped so that `positive_value` becomes the
/// Positive class. Lines starting with '#' are comments; columns listed in
/// `ignore_columns` (such as a provenance column from a previous treat run)
/// are skipped.
inline CsvLoadResult load_csv(const std::string& path, const std::string& label_column,
                              const std::string& positive_value,
                              const std::vector<std::string>& ignore_columns = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);

    std::string line;
    do {
        if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
    } while (line.empty() || line[0] == '#');
    const auto header = detail::split_csv_line(line);

    auto ignored = [&](const std::string& name) {
        for (const auto& col : ignore_columns)
            if (col == name) return true;
        return false;
    };

    std::ptrdiff_t label_idx = -1;
    std::vector<bool> use_column(header.size(), true);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            if (label_idx >= 0)
                throw ValidationError("ambiguous label column (appears twice): " + label_column);
            label_idx = static_cast<std::ptrdiff_t>(i);
            use_column[i] = false;
        } else if (ignored(header[i])) {
            use_column[i] = false;
        }
    }
    if (label_idx < 0) throw ValidationError("label column not found: " + label_column);

    std::vector<std::string> feature_names;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (use_column[i]) feature_names.push_back(header[i]);
    if (feature_names.empty()) throw ValidationError("no feature columns in " + path);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::set<std::string> all_label_values;
    std::vector<std::size_t> parse_ok_per_column(feature_names.size(), 0);
    std::size_t dropped = 0;

    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ValidationError("row with wrong number of fields in " + path);
        all_label_values.insert(fields[static_cast<std::size_t>(label_idx)]);

        std::vector<double> row;
        row.reserve(feature_names.size());
        bool ok = true;
        std::size_t col = 0;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!use_column[i]) continue;
            double v;
            if (detail::parse_double(fields[i], v)) {
                ++parse_ok_per_column[col];
                row.push_back(v);
            } else {
                ok = false;
                row.push_back(0.0);
            }
            ++col;
        }
        if (ok) {
            rows.push_back(std::move(row));
            raw_labels.push_back(fields[static_cast<std::size_t>(label_idx)]);
        } else {
            ++dropped;
        }
    }

    for (std::size_t c = 0; c < feature_names.size(); ++c) {
        if (parse_ok_per_column[c] == 0)
            throw ValidationError("column '" + feature_names[c] +
                                  "' has no numeric values; categorical features are not supported");
    }
    if (rows.empty()) throw ValidationError("no usable rows in " + path);
    if (all_label_values.size() != 2)
        throw ValidationError("label column must have exactly 2 distinct values, found " +
                              std::to_string(all_label_values.size()));
    if (!all_label_values.count(positive_value))
        throw ValidationError("positive value '" + positive_value + "' not present in label column");

    CsvLoadResult result;
    result.dropped_rows = dropped;
    Dataset& d = result.data;
    d.feature_names = feature_names;
    d.id = path;
    d.positive_value = positive_value;
    for (const auto& v : all_label_values)
        if (v != positive_value) d.negative_value = v;
    d.features.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(feature_names.size()));
    d.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < feature_names.size(); ++j)
            d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        d.labels.push_back(raw_labels[i] == positive_value ? ClassLabel::Positive
                                                           : ClassLabel::Negative);
    }
    return result;
}

inline DatasetSummary summarize(const Dataset& d) {
    DatasetSummary s;
    s.dimensions = d.dimensions();
    s.total_instances = d.size();
    s.positive_count = d.count(ClassLabel::Positive);
    s.negative_count = d.count(ClassLabel::Negative);
    if (s.positive_count == 0 || s.negative_count == 0)
        throw ValidationError("summarize: both classes must be non-empty");

    // duplicates: rows identical in features and label beyond their first occurrence
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::string key(reinterpret_cast<const char*>(d.features.row(static_cast<Eigen::Index>(i)).eval().data()),
                        d.dimensions() * sizeof(double));
        key += static_cast<char>(d.labels[i]);
        if (!seen.insert(key).second) ++s.duplicate_instances;
    }

    const double p = static_cast<double>(s.positive_count);
    const double n = static_cast<double>(s.negative_count);
    s.majority = n >= p ? ClassLabel::Negative : ClassLabel::Positive;
    s.imbalance_ratio = std::max(p, n) / std::min(p, n);
    return s;
}

struct StandardizeParams {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;   // sample standard deviation (n-1); 0 marks a constant feature
};

inline StandardizeParams standardize_params(const Eigen::MatrixXd& X) {
    StandardizeParams p;
    const auto n = X.rows();
    p.mean = X.colwise().mean();
    p.std.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (n < 2) {
            p.std(j) = 0.0;
            continue;
        }
        const double ss = (X.col(j).array() - p.mean(j)).square().sum();
        p.std(j) = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return p;
}

inline Eigen::MatrixXd apply_standardize(const Eigen::MatrixXd& X, const StandardizeParams& p) {
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (p.std(j) > 0.0)
            out.col(j) = (X.col(j).array() - p.mean(j)) / p.std(j);
        else
            out.col(j).setZero();
    }
    return out;
}

/// Center each feature and scale to unit sample standard deviation; constant
/// features become all-zeros.
inline Dataset standardize(const Dataset& d) {
    Dataset out = d;
    out.features = apply_standardize(d.features, standardize_params(d.features));
    return out;
}

/// Class-stratified train/test split; per-class test sizes are
/// round(fraction * class size), clamped so neither side loses a class.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double test_fraction,
                                                    std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test_fraction must be in (0,1)");
    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (ClassLabel c : {ClassLabel::Negative, ClassLabel::Positive}) {
        auto idx = d.indices_of(c);
        if (idx.size() < 2)
            throw ValidationError("stratified_split: each class needs at least 2 instances");
        rng.shuffle(idx);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(idx.size())));
        n_test = std::min(std::max<std::size_t>(n_test, 1), idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_test ? test_idx : train_idx).push_back(idx[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {d.subset(train_idx), d.subset(test_idx)};
}

}  // namespace tsdiag
