#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tsdiag/classifiers.hpp"
#include "tsdiag/dataset.hpp"
#include "tsdiag/diagnosis.hpp"
#include "tsdiag/io.hpp"
#include "tsdiag/stats.hpp"
#include "tsdiag/treatments.hpp"

namespace tsdiag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitEarlyDiagnosis = 2;   // Algorithm's S1-only branch

struct DiagnoseConfig {
    std::string input;
    std::string label_col;
    std::string positive;
    std::string out_dir = ".";
    DiagnoseParams params;
};

struct TreatConfig {
    std::string input;
    std::string label_col;
    std::string positive;
    std::string out_dir = ".";
    TreatmentSpec spec;
    bool standardize_distances = true;   // kept for config echo; treatments standardize internally
};

struct EvaluateConfig {
    std::vector<std::string> inputs;
    std::string label_col;
    std::string positive;
    std::string out_file = "results.csv";
    std::vector<std::string> classifier_names = {"GNB", "LDA", "QDA", "KNN"};
    std::size_t knn_k = 3;
    std::string treatments_file;   // JSON list of TreatmentSpec; empty = Raw only
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    bool standardize = true;
    double threshold = 0.5;
    unsigned threads = 1;
};

struct StatsConfig {
    std::string results_file;
    std::string metric = "g_mean";
    double alpha = 0.05;
    std::string out_dir = ".";
    std::string ddp_file;   // optional: dataset,ir_level,disjunct_level,overlap_level
};

inline TreatmentSpec treatment_from_json(const json& j) {
    TreatmentSpec spec;
    spec.name = j.at("name").get<std::string>();
    if (j.contains("params"))
        for (auto it = j["params"].cbegin(); it != j["params"].cend(); ++it)
            spec.params[it.key()] = it.value().get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    return spec;
}

inline json treatment_to_json(const TreatmentSpec& spec) {
    json params = json::object();
    for (const auto& [k, v] : spec.params) params[k] = v;
    return json{{"name", spec.name}, {"params", params}, {"seed", spec.seed}};
}

namespace detail {

inline json diagnose_config_json(const DiagnoseConfig& c) {
    return json{{"command", "diagnose"},
                {"input", c.input},
                {"label_col", c.label_col},
                {"positive", c.positive},
                {"k", c.params.k},
                {"c_min", c.params.c_min},
                {"g_max", c.params.g_max},
                {"sp_th", c.params.sp_th},
                {"alpha", c.params.alpha},
                {"dist", std::string(to_string(c.params.dist))},
                {"standardize", c.params.standardize},
                {"n_perm", c.params.n_perm},
                {"seed", c.params.seed},
                {"threads", c.params.threads}};
}

inline std::string single_line(const json& j) { return j.dump(); }

}  // namespace detail

/// diagnose: full report files on success (exit 0); subclass membership only
/// when a subclass falls under C.min (exit 2).
inline int cmd_diagnose(const DiagnoseConfig& config, std::ostream& err = std::cerr) {
    try {
        const auto loaded = load_csv(config.input, config.label_col, config.positive, {"provenance"});
        const Dataset& d = loaded.data;
        const auto outcome = diagnose(d, config.params);

        namespace fs = std::filesystem;
        fs::create_directories(config.out_dir);
        const auto path = [&](const char* name) {
            return (fs::path(config.out_dir) / name).string();
        };
        const json config_echo = detail::diagnose_config_json(config);

        write_file(path("subclasses.csv"),
                   "# config: " + detail::single_line(config_echo) + "\n" +
                       subclasses_to_csv(d, outcome.assignment));
        if (outcome.early_exit()) {
            err << "diagnose: a detected subclass has fewer than C.min members; "
                   "subclass membership written for outlier analysis\n";
            return kExitEarlyDiagnosis;
        }

        const DiagnosticReport& rep = *outcome.report;
        json out = to_json(rep);
        out["config"] = config_echo;
        out["dropped_rows"] = loaded.dropped_rows;
        write_file(path("report.json"), dump_json(out));

        std::string text = "Diagnostic report for " + config.input + "\n";
        text += "config: " + detail::single_line(config_echo) + "\n";
        if (loaded.dropped_rows > 0)
            text += "rows dropped at ingestion: " + std::to_string(loaded.dropped_rows) + "\n";
        text += "\n" + render_report_text(rep);
        write_file(path("report.txt"), text);
        write_file(path("iro.csv"),
                   "# config: " + detail::single_line(config_echo) + "\n" + iro_to_csv(rep.iro));
        write_file(path("noise.csv"), "# config: " + detail::single_line(config_echo) + "\n" +
                                          noise_to_csv(rep.noise));
        return kExitOk;
    } catch (const std::exception& e) {
        err << "diagnose: " << e.what() << "\n";
        return kExitError;
    }
}

/// treat: apply one treatment, write the resampled CSV (input schema plus a
/// provenance column) and the row-level provenance CSV.
inline int cmd_treat(const TreatConfig& config, std::ostream& err = std::cerr) {
    try {
        const auto loaded = load_csv(config.input, config.label_col, config.positive, {"provenance"});
        const Dataset& d = loaded.data;
        const ResampledDataset res = apply_treatment(d, config.spec);

        namespace fs = std::filesystem;
        fs::create_directories(config.out_dir);
        const json config_echo = json{{"command", "treat"},
                                      {"input", config.input},
                                      {"label_col", config.label_col},
                                      {"positive", config.positive},
                                      {"treatment", treatment_to_json(config.spec)}};

        std::ostringstream treated;
        treated << "# config: " << detail::single_line(config_echo) << "\n";
        for (const auto& name : d.feature_names) treated << name << ",";
        treated << config.label_col << ",provenance\n";
        for (std::size_t i = 0; i < res.data.size(); ++i) {
            for (Eigen::Index j = 0; j < res.data.features.cols(); ++j)
                treated << format_value(res.data.features(static_cast<Eigen::Index>(i), j)) << ",";
            treated << (res.data.labels[i] == ClassLabel::Positive ? d.positive_value
                                                                   : d.negative_value)
                    << ","
                    << (res.provenance[i].kind == ProvenanceKind::Original ? "original"
                                                                           : "synthetic")
                    << "\n";
        }
        write_file((fs::path(config.out_dir) / "treated.csv").string(), treated.str());

        std::ostringstream prov;
        prov << "# config: " << detail::single_line(config_echo) << "\n";
        prov << "kind,input_row,output_row,reason\n";
        for (std::size_t i = 0; i < res.provenance.size(); ++i) {
            const auto& p = res.provenance[i];
            prov << (p.kind == ProvenanceKind::Original ? "original" : "synthetic") << ","
                 << p.source_row << "," << i << ",\n";
        }
        for (const auto& [row, reason] : res.removed)
            prov << "removed," << row << ",," << reason << "\n";
        write_file((fs::path(config.out_dir) / "provenance.csv").string(), prov.str());

        for (const auto& w : res.warnings) err << "treat: warning: " << w << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "treat: " << e.what() << "\n";
        return kExitError;
    }
}

/// evaluate: cross-validated grid over datasets x classifiers x treatments,
/// streamed to a results CSV; reruns skip rows already present.
inline int cmd_evaluate(const EvaluateConfig& config, std::ostream& err = std::cerr) {
    try {
        if (config.inputs.empty()) throw ValidationError("evaluate: no input datasets");

        std::vector<Dataset> datasets;
        for (const auto& path : config.inputs) {
            auto loaded = load_csv(path, config.label_col, config.positive, {"provenance"});
            loaded.data.id = std::filesystem::path(path).stem().string();
            datasets.push_back(std::move(loaded.data));
        }

        std::vector<ClassifierSpec> classifiers;
        for (const auto& name : config.classifier_names) {
            ClassifierSpec spec;
            spec.name = name;
            if (name == "KNN") spec.params["k"] = static_cast<double>(config.knn_k);
            classifiers.push_back(std::move(spec));
        }

        std::vector<TreatmentSpec> treatments;
        if (config.treatments_file.empty()) {
            treatments.push_back({"Raw", {}, 0});
        } else {
            std::ifstream in(config.treatments_file);
            if (!in) throw ValidationError("cannot open treatments file: " + config.treatments_file);
            json list = json::parse(in);
            for (const auto& t : list) treatments.push_back(treatment_from_json(t));
        }

        std::set<std::string> existing;
        bool append = false;
        if (std::filesystem::exists(config.out_file)) {
            for (const auto& r : read_results_csv(config.out_file))
                existing.insert(r.dataset + "|" + r.classifier + "|" + r.treatment + "|" +
                                std::to_string(r.fold));
            append = true;
        }

        EvaluateOptions opts;
        opts.folds = config.folds;
        opts.standardize = config.standardize;
        opts.threshold = config.threshold;
        const auto rows =
            run_grid(datasets, classifiers, treatments, config.seed, opts, existing,
                     config.threads);

        json treatments_echo = json::array();
        for (const auto& t : treatments) treatments_echo.push_back(treatment_to_json(t));
        const json config_echo = json{{"command", "evaluate"},
                                      {"label_col", config.label_col},
                                      {"positive", config.positive},
                                      {"classifiers", config.classifier_names},
                                      {"knn_k", config.knn_k},
                                      {"treatments", treatments_echo},
                                      {"folds", config.folds},
                                      {"seed", config.seed},
                                      {"standardize", config.standardize},
                                      {"threshold", config.threshold}};
        write_results_csv(config.out_file, rows,
                          {"config: " + detail::single_line(config_echo)}, append);
        return kExitOk;
    } catch (const std::exception& e) {
        err << "evaluate: " << e.what() << "\n";
        return kExitError;
    }
}

namespace detail {

struct DdpLabels {
    // dataset -> level per degradation problem
    std::map<std::string, std::string> ir, disjuncts, overlap;
};

inline DdpLabels read_ddp_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open DDP file: " + path);
    DdpLabels labels;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
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
        if (f.size() != 4) throw ValidationError("malformed DDP row in " + path);
        labels.ir[f[0]] = f[1];
        labels.disjuncts[f[0]] = f[2];
        labels.overlap[f[0]] = f[3];
    }
    return labels;
}

}  // namespace detail

/// stats: rank table + Friedman + LSD letters per classifier from a results
/// CSV, the paired AUC-vs-G-mean comparison, and (with DDP labels) the
/// two-test criticality verdicts.
inline int cmd_stats(const StatsConfig& config, std::ostream& err = std::cerr) {
    try {
        const auto rows = read_results_csv(config.results_file);

        // value per (classifier, dataset, treatment): mean over folds
        std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>>
            cell;   // classifier -> dataset -> treatment -> fold values
        std::set<std::string> classifiers, datasets, treatments;
        for (const auto& r : rows) {
            if (r.metric != config.metric || r.value == "NA") continue;
            cell[r.classifier][r.dataset][r.treatment].push_back(std::stod(r.value));
            classifiers.insert(r.classifier);
            datasets.insert(r.dataset);
            treatments.insert(r.treatment);
        }
        if (classifiers.empty())
            throw ValidationError("stats: no usable rows for metric " + config.metric);
        if (treatments.size() < 2 || datasets.size() < 2)
            throw ValidationError("stats: need at least 2 treatments and 2 datasets");

        const std::vector<std::string> treatment_order(treatments.begin(), treatments.end());
        json out;
        out["config"] = json{{"command", "stats"},
                             {"results", config.results_file},
                             {"metric", config.metric},
                             {"alpha", config.alpha},
                             {"ddp", config.ddp_file}};

        std::ostringstream letters_txt;
        letters_txt << "Friedman + LSD letter groups (" << config.metric
                    << ", alpha=" << format_value(config.alpha) << ")\n";
        letters_txt << tsdiag::detail::pad_right("Classifier", 12);
        for (const auto& t : treatment_order) letters_txt << tsdiag::detail::pad_right(t, 9);
        letters_txt << "p-value\n";

        std::ostringstream ranks_csv;
        ranks_csv << "classifier,dataset,treatment,score,rank\n";

        json per_classifier;
        for (const auto& cls : classifiers) {
            std::vector<std::string> kept_datasets;
            std::vector<std::vector<double>> scores;
            std::size_t dropped = 0;
            for (const auto& ds : datasets) {
                std::vector<double> row;
                bool complete = true;
                for (const auto& t : treatment_order) {
                    const auto& folds = cell[cls][ds][t];
                    if (folds.empty()) {
                        complete = false;
                        break;
                    }
                    double mean = 0.0;
                    for (double v : folds) mean += v;
                    row.push_back(mean / static_cast<double>(folds.size()));
                }
                if (complete) {
                    kept_datasets.push_back(ds);
                    scores.push_back(std::move(row));
                } else {
                    ++dropped;
                }
            }
            if (kept_datasets.size() < 2) {
                err << "stats: classifier " << cls << " skipped (fewer than 2 complete datasets)\n";
                continue;
            }
            const RankTable table = rank_scores(kept_datasets, treatment_order, scores, true);
            const TestResult fr = friedman(table);
            const CLDGrouping cld = posthoc_lsd(table, config.alpha);

            for (std::size_t i = 0; i < kept_datasets.size(); ++i)
                for (std::size_t j = 0; j < treatment_order.size(); ++j)
                    ranks_csv << cls << "," << kept_datasets[i] << "," << treatment_order[j] << ","
                              << format_value(table.scores[i][j]) << ","
                              << format_value(table.ranks[i][j]) << "\n";

            json mean_ranks, letters;
            for (std::size_t j = 0; j < treatment_order.size(); ++j) {
                mean_ranks[treatment_order[j]] = cld.mean_ranks[j];
                letters[treatment_order[j]] = cld.letters.at(treatment_order[j]);
            }
            json pairwise = json::array();
            for (std::size_t i = 0; i < treatment_order.size(); ++i)
                for (std::size_t j = i + 1; j < treatment_order.size(); ++j)
                    pairwise.push_back(json{{"a", treatment_order[i]},
                                            {"b", treatment_order[j]},
                                            {"p_value", cld.pairwise_p[i][j]}});
            per_classifier[cls] =
                json{{"friedman",
                      {{"statistic", fr.statistic}, {"p_value", fr.p_value}, {"n", fr.n_effective}}},
                     {"mean_ranks", mean_ranks},
                     {"letters", letters},
                     {"pairwise", pairwise},
                     {"lsd", cld.lsd},
                     {"datasets_used", kept_datasets},
                     {"datasets_dropped", dropped}};

            letters_txt << tsdiag::detail::pad_right(cls, 12);
            for (const auto& t : treatment_order)
                letters_txt << tsdiag::detail::pad_right(cld.letters.at(t), 9);
            char pbuf[24];
            std::snprintf(pbuf, sizeof(pbuf), "%.1e", fr.p_value);
            letters_txt << pbuf << "\n";
        }
        out["friedman_cld"] = per_classifier;

        // paired AUC vs G-mean across trained models (positive = AUC larger)
        {
            std::map<std::string, double> auc_by_key, gmean_by_key;
            for (const auto& r : rows) {
                if (r.value == "NA") continue;
                const std::string key =
                    r.dataset + "|" + r.classifier + "|" + r.treatment + "|" +
                    std::to_string(r.fold);
                if (r.metric == "auc") auc_by_key[key] = std::stod(r.value);
                if (r.metric == "g_mean") gmean_by_key[key] = std::stod(r.value);
            }
            std::vector<double> auc_v, gmean_v;
            for (const auto& [key, a] : auc_by_key) {
                auto it = gmean_by_key.find(key);
                if (it != gmean_by_key.end()) {
                    auc_v.push_back(a);
                    gmean_v.push_back(it->second);
                }
            }
            if (auc_v.size() >= 2) {
                const auto t = wilcoxon_signed_rank(auc_v, gmean_v, Alternative::Greater);
                out["auc_vs_gmean"] = json{{"statistic", t.statistic},
                                           {"p_value", t.p_value},
                                           {"n", t.n_effective},
                                           {"alternative", "greater"}};
            }
        }

        if (!config.ddp_file.empty()) {
            const auto labels = detail::read_ddp_csv(config.ddp_file);
            json ddp_tests;
            const std::vector<std::pair<std::string, const std::map<std::string, std::string>*>>
                problems = {{"ir", &labels.ir},
                            {"disjuncts", &labels.disjuncts},
                            {"overlap", &labels.overlap}};
            for (const auto& cls : classifiers) {
                json per_problem;
                for (const auto& [pname, level_of] : problems) {
                    std::vector<double> low, high;
                    for (const auto& ds : datasets) {
                        auto lv = level_of->find(ds);
                        if (lv == level_of->end()) continue;
                        // stage-2 style: Raw rows when available, else all treatments
                        const auto& by_treatment = cell[cls][ds];
                        std::vector<double> vals;
                        auto raw_it = by_treatment.find("Raw");
                        if (raw_it != by_treatment.end() && !raw_it->second.empty())
                            vals = raw_it->second;
                        else
                            for (const auto& [t, folds] : by_treatment)
                                vals.insert(vals.end(), folds.begin(), folds.end());
                        if (vals.empty()) continue;
                        double mean = 0.0;
                        for (double v : vals) mean += v;
                        mean /= static_cast<double>(vals.size());
                        if (lv->second == "High")
                            high.push_back(mean);
                        else if (lv->second == "Low")
                            low.push_back(mean);
                    }
                    if (low.empty() || high.empty()) {
                        per_problem[pname] = json{{"verdict", nullptr},
                                                  {"reason", "a criticality level has no datasets"}};
                        continue;
                    }
                    const auto a = wilcoxon_rank_sum(low, high, Alternative::TwoSided);
                    const auto b = wilcoxon_rank_sum(low, high, Alternative::Greater);
                    const bool accept = a.p_value < config.alpha && b.p_value < config.alpha;
                    per_problem[pname] = json{{"test_a_p", a.p_value},
                                              {"test_b_p", b.p_value},
                                              {"n_low", low.size()},
                                              {"n_high", high.size()},
                                              {"verdict", accept}};
                }
                ddp_tests[cls] = per_problem;
            }
            out["ddp_tests"] = ddp_tests;
        }

        namespace fs = std::filesystem;
        fs::create_directories(config.out_dir);
        write_file((fs::path(config.out_dir) / "stats.json").string(), dump_json(out));
        write_file((fs::path(config.out_dir) / "letters.txt").string(), letters_txt.str());
        write_file((fs::path(config.out_dir) / "ranks.csv").string(), ranks_csv.str());
        return kExitOk;
    } catch (const std::exception& e) {
        err << "stats: " << e.what() << "\n";
        return kExitError;
    }
}

}  // namespace tsdiag::cli
