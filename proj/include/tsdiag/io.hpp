#pragma once

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tsdiag/classifiers.hpp"
#include "tsdiag/common.hpp"
#include "tsdiag/diagnosis.hpp"
#include "tsdiag/gmm.hpp"
#include "tsdiag/stats.hpp"

namespace tsdiag {

using json = nlohmann::json;

namespace detail {

inline void dump_json_impl(const json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * depth), ' ');
    const std::string pad_in(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.cbegin(); it != j.cend(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in + json(it.key()).dump() + ": ";
                dump_json_impl(it.value(), out, indent, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump_json_impl(v, out, indent, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case json::value_t::number_float:
            out += format_value(j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

}  // namespace detail

/// Serialize with sorted object keys (nlohmann's default ordering) and floats
/// fixed at 12 significant digits, so identical inputs give identical bytes.
inline std::string dump_json(const json& j, int indent = 2) {
    std::string out;
    detail::dump_json_impl(j, out, indent, 0);
    out += "\n";
    return out;
}

inline json to_json(const MixtureModel& m) {
    json weights = json::array(), means = json::array(), covs = json::array();
    for (const auto& c : m.components) {
        weights.push_back(c.weight);
        json mean = json::array();
        for (Eigen::Index i = 0; i < c.mean.size(); ++i) mean.push_back(c.mean(i));
        means.push_back(mean);
        json cov = json::array();
        for (Eigen::Index i = 0; i < c.covariance.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index jx = 0; jx < c.covariance.cols(); ++jx)
                row.push_back(c.covariance(i, jx));
            cov.push_back(row);
        }
        covs.push_back(cov);
    }
    return json{{"model", to_string(m.model)}, {"K", m.K()},        {"weights", weights},
                {"means", means},              {"covariances", covs}, {"loglik", m.log_likelihood},
                {"bic", m.bic}};
}

inline json to_json(const DatasetSummary& s) {
    return json{{"dimensions", s.dimensions},
                {"duplicate_instances", s.duplicate_instances},
                {"total_instances", s.total_instances},
                {"positive_count", s.positive_count},
                {"negative_count", s.negative_count},
                {"imbalance_ratio", s.imbalance_ratio},
                {"majority_class", to_string(s.majority)}};
}

inline json opt_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

inline json to_json(const MetricSet& m) {
    json out;
    for (const auto& [name, field] : metric_fields()) out[name] = opt_json(m.*field);
    return out;
}

inline json to_json(const IROMatrix& iro) {
    json out;
    out["subclasses"] = iro.subclass_order;
    out["counts"] = iro.diagonal;
    json ir = json::array(), sep = json::array();
    for (std::size_t i = 0; i < iro.subclass_order.size(); ++i)
        for (std::size_t j = i + 1; j < iro.subclass_order.size(); ++j) {
            ir.push_back(json{{"a", iro.subclass_order[i]},
                              {"b", iro.subclass_order[j]},
                              {"value", iro.upper_ir[i][j]}});
            sep.push_back(json{{"a", iro.subclass_order[i]},
                               {"b", iro.subclass_order[j]},
                               {"j_star", opt_json(iro.lower_j[j][i])}});
        }
    out["ir"] = ir;
    out["separation"] = sep;
    return out;
}

inline json to_json(const NoiseReport& n) {
    json out;
    out["subclasses"] = n.subclass_order;
    out["matrix"] = n.noise_matrix;
    out["per_class"] = json{{"Negative", {{"noise", n.negative.noise}, {"valid", n.negative.valid}}},
                            {"Positive", {{"noise", n.positive.noise}, {"valid", n.positive.valid}}}};
    json rows = json::array();
    for (const auto& r : n.per_subclass)
        rows.push_back(json{{"subclass", r.subclass},
                            {"instances", r.instances},
                            {"valid", r.valid},
                            {"noise", r.noise},
                            {"noise_overlap", r.noise_overlap},
                            {"noise_label", r.noise_label}});
    out["per_subclass"] = rows;
    out["nr"] = opt_json(n.nr);
    out["nor"] = opt_json(n.nor);
    out["nlr"] = opt_json(n.nlr);
    return out;
}

inline json to_json(const AndersonTable& t) {
    return json{{"df_between", t.df_between}, {"df_within", t.df_within},
                {"ss_between", t.ss_between}, {"ss_within", t.ss_within},
                {"ms_between", t.ms_between}, {"ms_within", t.ms_within},
                {"f", t.f},                   {"n_perm", t.n_perm},
                {"p_value", t.p_value}};
}

inline json to_json(const DiagnosticReport& r) {
    json out;
    out["summary"] = to_json(r.summary);

    auto class_json = [&](const ClassDetection& det) {
        return json{{"instances", det.instances},
                    {"covariance_model", det.model_name},
                    {"num_subclasses", det.k_subclasses},
                    {"bic", det.bic},
                    {"loglik", det.log_likelihood},
                    {"skipped_fits", det.fit_failures}};
    };
    json counts;
    for (const auto& [label, count] : r.assignment.per_subclass_counts) counts[label] = count;
    out["subclasses"] = json{{"Negative", class_json(r.negative)},
                             {"Positive", class_json(r.positive)},
                             {"counts", counts},
                             {"order", r.assignment.subclass_order}};
    out["iro"] = to_json(r.iro);
    out["noise"] = to_json(r.noise);

    json disp = json::array();
    for (const auto& d : r.dispersion) {
        json e{{"subclass", d.subclass},
               {"euclidean", {{"mean", d.euclidean.mean}, {"std", d.euclidean.std}}},
               {"manhattan", {{"mean", d.manhattan.mean}, {"std", d.manhattan.std}}}};
        e["mahalanobis"] = d.mahalanobis ? json{{"mean", d.mahalanobis->mean},
                                                {"std", d.mahalanobis->std}}
                                         : json(nullptr);
        disp.push_back(e);
    }
    out["dispersion"] = json{
        {"per_subclass", disp},
        {"anderson",
         {{"Negative", r.anderson_negative ? to_json(*r.anderson_negative) : json(nullptr)},
          {"Positive", r.anderson_positive ? to_json(*r.anderson_positive) : json(nullptr)}}}};
    out["ddp"] = json{{"ir_level", to_string(r.ddp.ir_level)},
                      {"disjunct_level", to_string(r.ddp.disjunct_level)},
                      {"overlap_level", to_string(r.ddp.overlap_level)}};
    out["warnings"] = r.warnings;
    return out;
}

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline std::string pad_right(std::string s, std::size_t width) {
    while (s.size() < width) s += ' ';
    return s;
}

}  // namespace detail

/// Human-readable report mirroring the five diagnostic outputs plus the DDP.
inline std::string render_report_text(const DiagnosticReport& r) {
    using detail::fixed;
    using detail::pad_right;
    std::ostringstream os;
    const auto& order = r.assignment.subclass_order;
    const std::size_t m = order.size();

    const double pos_pct = 100.0 * static_cast<double>(r.summary.positive_count) /
                           static_cast<double>(r.summary.total_instances);

    os << "== Output 1: Basic description ==\n";
    os << pad_right("Dimensions", 26) << r.summary.dimensions << "\n";
    os << pad_right("Duplicate instances", 26) << r.summary.duplicate_instances << "\n";
    os << pad_right("Total instances", 26) << r.summary.total_instances << "\n";
    os << pad_right("Instances Positive class", 26) << r.summary.positive_count << " ("
       << fixed(pos_pct, 1) << "%)\n";
    os << pad_right("Instances Negative class", 26) << r.summary.negative_count << " ("
       << fixed(100.0 - pos_pct, 1) << "%)\n";
    os << pad_right("IR", 26) << fixed(r.summary.imbalance_ratio, 1) << " ("
       << to_string(r.summary.majority) << " majority)\n\n";

    os << "== Output 2: Subclass detection ==\n";
    for (const auto* det : {&r.positive, &r.negative}) {
        os << (det == &r.positive ? "Positive class" : "Negative class") << "\n";
        os << "  " << pad_right("Instances", 18) << det->instances << "\n";
        os << "  " << pad_right("Covariance model", 18) << det->model_name << "\n";
        os << "  " << pad_right("Num. subclasses", 18) << det->k_subclasses << "\n";
    }
    os << "\n";

    os << "== Output 3: IRO matrix ==\n";
    os << "(diagonal: instances, upper: IR, lower: J*)\n";
    os << pad_right("", 8);
    for (const auto& s : order) os << pad_right(s, 9);
    os << "\n";
    for (std::size_t i = 0; i < m; ++i) {
        os << pad_right(order[i], 8);
        for (std::size_t j = 0; j < m; ++j) {
            std::string cell;
            if (i == j)
                cell = std::to_string(r.iro.diagonal[i]);
            else if (i < j)
                cell = fixed(r.iro.upper_ir[i][j], 1);
            else
                cell = r.iro.lower_j[i][j] ? fixed(*r.iro.lower_j[i][j], 2) : std::string("?");
            os << pad_right(cell, 9);
        }
        os << "\n";
    }
    os << "\n";

    os << "== Output 4: Noise analysis ==\n";
    os << pad_right("Class", 10) << pad_right("Noise", 8) << "Valid\n";
    os << pad_right("Negative", 10) << pad_right(std::to_string(r.noise.negative.noise), 8)
       << r.noise.negative.valid << "\n";
    os << pad_right("Positive", 10) << pad_right(std::to_string(r.noise.positive.noise), 8)
       << r.noise.positive.valid << "\n\n";
    os << pad_right("Subclass", 10) << pad_right("Instances", 11) << pad_right("Valid", 7)
       << pad_right("Noise", 7) << pad_right("Noise overlap", 15) << "Noise label\n";
    for (const auto& row : r.noise.per_subclass) {
        os << pad_right(row.subclass, 10) << pad_right(std::to_string(row.instances), 11)
           << pad_right(std::to_string(row.valid), 7) << pad_right(std::to_string(row.noise), 7)
           << pad_right(std::to_string(row.noise_overlap), 15) << row.noise_label << "\n";
    }
    os << "\nNoise matrix (rows: actual subclass, columns: estimated by " << "k-NN)\n";
    os << pad_right("", 8);
    for (const auto& s : order) os << pad_right(s, 7);
    os << "\n";
    for (std::size_t i = 0; i < m; ++i) {
        os << pad_right(order[i], 8);
        for (std::size_t j = 0; j < m; ++j)
            os << pad_right(std::to_string(r.noise.noise_matrix[i][j]), 7);
        os << "\n";
    }
    auto ratio_line = [&](const char* name, const std::optional<double>& v) {
        os << pad_right(name, 5) << "= " << (v ? fixed(*v, 2) : std::string("Undefined")) << "\n";
    };
    os << "\n";
    ratio_line("NR", r.noise.nr);
    ratio_line("NOR", r.noise.nor);
    ratio_line("NLR", r.noise.nlr);
    os << "\n";

    os << "== Output 5: Dispersion ==\n";
    os << "Distances to the subclass median (mean / std)\n";
    os << pad_right("Subclass", 10) << pad_right("Euclidean", 16) << pad_right("Manhattan", 16)
       << "Mahalanobis\n";
    for (const auto& d : r.dispersion) {
        os << pad_right(d.subclass, 10)
           << pad_right(fixed(d.euclidean.mean, 2) + " / " + fixed(d.euclidean.std, 2), 16)
           << pad_right(fixed(d.manhattan.mean, 2) + " / " + fixed(d.manhattan.std, 2), 16);
        if (d.mahalanobis)
            os << fixed(d.mahalanobis->mean, 2) << " / " << fixed(d.mahalanobis->std, 2);
        else
            os << "unavailable";
        os << "\n";
    }
    auto anderson_block = [&](const char* cls, const std::optional<AndersonTable>& t) {
        os << "\nAnderson's permutation test (" << cls << " class)\n";
        if (!t) {
            os << "  skipped: fewer than 2 subclasses\n";
            return;
        }
        os << pad_right("", 11) << pad_right("Df", 6) << pad_right("Sum Sq", 9)
           << pad_right("Mean Sq", 9) << pad_right("F", 8) << pad_right("N.Perm", 8)
           << "p-value\n";
        os << pad_right("Subclass", 11) << pad_right(std::to_string(t->df_between), 6)
           << pad_right(fixed(t->ss_between, 1), 9) << pad_right(fixed(t->ms_between, 2), 9)
           << pad_right(fixed(t->f, 1), 8) << pad_right(std::to_string(t->n_perm), 8)
           << fixed(t->p_value, 3) << "\n";
        os << pad_right("Residuals", 11) << pad_right(std::to_string(t->df_within), 6)
           << pad_right(fixed(t->ss_within, 1), 9) << pad_right(fixed(t->ms_within, 2), 9)
           << "\n";
    };
    anderson_block("Negative", r.anderson_negative);
    anderson_block("Positive", r.anderson_positive);
    os << "\n";

    os << "== DDP: criticality profile ==\n";
    os << pad_right("IR", 10) << to_string(r.ddp.ir_level) << "\n";
    os << pad_right("Disjuncts", 10) << to_string(r.ddp.disjunct_level) << "\n";
    os << pad_right("Overlap", 10) << to_string(r.ddp.overlap_level) << "\n";

    if (!r.warnings.empty()) {
        os << "\nWarnings:\n";
        for (const auto& w : r.warnings) os << "  - " << w << "\n";
    }
    return os.str();
}

/// IRO matrix as CSV: diagonal counts, IR above, J* below (NA = unknown).
inline std::string iro_to_csv(const IROMatrix& iro) {
    std::ostringstream os;
    os << "subclass";
    for (const auto& s : iro.subclass_order) os << "," << s;
    os << "\n";
    const std::size_t m = iro.subclass_order.size();
    for (std::size_t i = 0; i < m; ++i) {
        os << iro.subclass_order[i];
        for (std::size_t j = 0; j < m; ++j) {
            os << ",";
            if (i == j)
                os << iro.diagonal[i];
            else if (i < j)
                os << format_value(iro.upper_ir[i][j]);
            else if (iro.lower_j[i][j])
                os << format_value(*iro.lower_j[i][j]);
            else
                os << "NA";
        }
        os << "\n";
    }
    return os.str();
}

inline std::string noise_to_csv(const NoiseReport& n) {
    std::ostringstream os;
    os << "subclass";
    for (const auto& s : n.subclass_order) os << "," << s;
    os << "\n";
    for (std::size_t i = 0; i < n.subclass_order.size(); ++i) {
        os << n.subclass_order[i];
        for (std::size_t j = 0; j < n.subclass_order.size(); ++j)
            os << "," << n.noise_matrix[i][j];
        os << "\n";
    }
    return os.str();
}

inline std::string subclasses_to_csv(const Dataset& d, const SubclassAssignment& assign) {
    std::ostringstream os;
    os << "row,class,subclass\n";
    for (std::size_t i = 0; i < d.size(); ++i)
        os << i << "," << to_string(d.labels[i]) << "," << assign.subclass_ids[i] << "\n";
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << content;
}

/// Results CSV rows; lines starting with # are provenance comments.
inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows,
                              const std::vector<std::string>& header_comments, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw ValidationError("cannot write file: " + path);
    if (!append) {
        for (const auto& c : header_comments) out << "# " << c << "\n";
        out << "dataset,classifier,treatment,fold,metric,value\n";
    }
    for (const auto& r : rows)
        out << r.dataset << "," << r.classifier << "," << r.treatment << "," << r.fold << ","
            << r.metric << "," << r.value << "\n";
}

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open results file: " + path);
    std::vector<ResultRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;   // column header
            continue;
        }
        std::vector<std::string> f;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                f.push_back(cur);
                cur.clear();
            } else if (ch != '\r') {
                cur += ch;
            }
        }
        f.push_back(cur);
        if (f.size() != 6) throw ValidationError("malformed results row in " + path);
        ResultRow r;
        r.dataset = f[0];
        r.classifier = f[1];
        r.treatment = f[2];
        r.fold = static_cast<std::size_t>(std::stoul(f[3]));
        r.metric = f[4];
        r.value = f[5];
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace tsdiag
