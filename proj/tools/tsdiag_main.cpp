// tsdiag command-line interface: diagnose / treat / evaluate / stats.
// A JSON config file can preload any option; explicit flags win.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>

#include "tsdiag/tsdiag.hpp"

namespace {

using tsdiag::json;

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open config file: " << path << "\n";
        std::exit(tsdiag::cli::kExitError);
    }
    return json::parse(in);
}

template <typename T>
void from_config(const json& cfg, const char* key, T& out) {
    if (cfg.contains(key)) out = cfg.at(key).get<T>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-set diagnostics and treatment comparison for binary classification"};
    app.require_subcommand(1);

    std::string config_path;

    // ---- diagnose ----
    auto* diag = app.add_subcommand("diagnose", "Diagnose degradation problems in a CSV");
    diag->add_option("--config", config_path, "JSON config file; explicit flags override it");
    tsdiag::cli::DiagnoseConfig dc;
    std::string diag_dist = "euclidean";
    bool diag_no_std = false;
    long long diag_cmin = 0;
    diag->add_option("--input", dc.input, "input CSV");
    diag->add_option("--label-col", dc.label_col, "label column name");
    diag->add_option("--positive", dc.positive, "label value of the Positive class");
    diag->add_option("--out-dir", dc.out_dir, "output directory")->capture_default_str();
    diag->add_option("--seed", dc.params.seed, "RNG seed")->capture_default_str();
    diag->add_option("--k", dc.params.k, "neighbors for the noise rule")->capture_default_str();
    diag->add_option("--c-min", diag_cmin, "min instances per subclass (0 = D+2)")
        ->capture_default_str();
    diag->add_option("--g-max", dc.params.g_max, "max mixture components")->capture_default_str();
    diag->add_option("--sp-th", dc.params.sp_th, "separation threshold for noise attribution")
        ->capture_default_str();
    diag->add_option("--alpha", dc.params.alpha, "separation index tuning parameter")
        ->capture_default_str();
    diag->add_option("--dist", diag_dist, "dispersion-test distance")->capture_default_str();
    diag->add_option("--n-perm", dc.params.n_perm, "permutations for the dispersion test")
        ->capture_default_str();
    diag->add_flag("--no-standardize", diag_no_std, "work on raw features");
    diag->add_option("--threads", dc.params.threads, "parallelism bound")->capture_default_str();

    // ---- treat ----
    auto* treat = app.add_subcommand("treat", "Apply one resampling/cleaning treatment");
    treat->add_option("--config", config_path, "JSON config file; explicit flags override it");
    tsdiag::cli::TreatConfig tc;
    std::string treat_spec_json;
    treat->add_option("--input", tc.input, "input CSV");
    treat->add_option("--label-col", tc.label_col, "label column name");
    treat->add_option("--positive", tc.positive, "label value of the Positive class");
    treat->add_option("--out-dir", tc.out_dir, "output directory")->capture_default_str();
    treat->add_option("--treatment", tc.spec.name,
                      "treatment name (Raw, Random, SMOTE, B-SMOTE, DBSMOTE, ADASYN, ENN, NCL, OSS)");
    treat->add_option("--params", treat_spec_json, "treatment params as JSON, e.g. "
                                                   "'{\"perc_over\":200,\"perc_under\":150}'");
    treat->add_option("--seed", tc.spec.seed, "RNG seed")->capture_default_str();

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "Cross-validated classifier x treatment grid");
    eval->add_option("--config", config_path, "JSON config file; explicit flags override it");
    tsdiag::cli::EvaluateConfig ec;
    bool eval_no_std = false;
    eval->add_option("--input", ec.inputs, "input CSVs (repeatable)");
    eval->add_option("--label-col", ec.label_col, "label column name");
    eval->add_option("--positive", ec.positive, "label value of the Positive class");
    eval->add_option("--out", ec.out_file, "results CSV (appended on rerun)")
        ->capture_default_str();
    eval->add_option("--classifiers", ec.classifier_names, "classifier names")
        ->capture_default_str();
    eval->add_option("--knn-k", ec.knn_k, "k for the KNN classifier")->capture_default_str();
    eval->add_option("--treatments", ec.treatments_file, "JSON file with treatment specs");
    eval->add_option("--folds", ec.folds, "cross-validation folds")->capture_default_str();
    eval->add_option("--seed", ec.seed, "RNG seed")->capture_default_str();
    eval->add_option("--threshold", ec.threshold, "decision threshold")->capture_default_str();
    eval->add_flag("--no-standardize", eval_no_std, "skip per-fold standardization");
    eval->add_option("--threads", ec.threads, "parallelism bound")->capture_default_str();

    // ---- stats ----
    auto* stats = app.add_subcommand("stats", "Friedman/LSD letters and Wilcoxon tests");
    stats->add_option("--config", config_path, "JSON config file; explicit flags override it");
    tsdiag::cli::StatsConfig sc;
    stats->add_option("--results", sc.results_file, "results CSV from evaluate");
    stats->add_option("--metric", sc.metric, "metric to rank")->capture_default_str();
    stats->add_option("--alpha", sc.alpha, "significance level")->capture_default_str();
    stats->add_option("--out-dir", sc.out_dir, "output directory")->capture_default_str();
    stats->add_option("--ddp", sc.ddp_file,
                      "CSV dataset,ir_level,disjunct_level,overlap_level for Tests A/B");

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config_file(config_path);
        if (diag->parsed()) {
            from_config(cfg, "input", dc.input);
            from_config(cfg, "label_col", dc.label_col);
            from_config(cfg, "positive", dc.positive);
            from_config(cfg, "out_dir", dc.out_dir);
            if (cfg.contains("seed") && diag->count("--seed") == 0)
                dc.params.seed = cfg["seed"].get<std::uint64_t>();
            if (cfg.contains("k") && diag->count("--k") == 0)
                dc.params.k = cfg["k"].get<std::size_t>();
            if (cfg.contains("c_min") && diag->count("--c-min") == 0)
                diag_cmin = cfg["c_min"].get<long long>();
            if (cfg.contains("g_max") && diag->count("--g-max") == 0)
                dc.params.g_max = cfg["g_max"].get<std::size_t>();
            if (cfg.contains("sp_th") && diag->count("--sp-th") == 0)
                dc.params.sp_th = cfg["sp_th"].get<double>();
            if (cfg.contains("alpha") && diag->count("--alpha") == 0)
                dc.params.alpha = cfg["alpha"].get<double>();
            if (cfg.contains("dist") && diag->count("--dist") == 0)
                diag_dist = cfg["dist"].get<std::string>();
            if (cfg.contains("standardize") && diag->count("--no-standardize") == 0)
                diag_no_std = !cfg["standardize"].get<bool>();
            if (dc.input.empty() || dc.label_col.empty() || dc.positive.empty()) {
                std::cerr << "diagnose: --input, --label-col and --positive are required\n";
                return tsdiag::cli::kExitError;
            }
            if (diag_cmin < 0) {
                std::cerr << "diagnose: --c-min must be >= 0\n";
                return tsdiag::cli::kExitError;
            }
            dc.params.c_min = static_cast<std::size_t>(diag_cmin);
            dc.params.dist = tsdiag::parse_distance(diag_dist);
            dc.params.standardize = !diag_no_std;
            return tsdiag::cli::cmd_diagnose(dc);
        }
        if (treat->parsed()) {
            from_config(cfg, "input", tc.input);
            from_config(cfg, "label_col", tc.label_col);
            from_config(cfg, "positive", tc.positive);
            from_config(cfg, "out_dir", tc.out_dir);
            if (cfg.contains("treatment") && treat->count("--treatment") == 0)
                tc.spec = tsdiag::cli::treatment_from_json(cfg["treatment"]);
            if (!treat_spec_json.empty()) {
                const json params = json::parse(treat_spec_json);
                for (auto it = params.cbegin(); it != params.cend(); ++it)
                    tc.spec.params[it.key()] = it.value().get<double>();
            }
            if (tc.input.empty() || tc.label_col.empty() || tc.positive.empty() ||
                tc.spec.name.empty()) {
                std::cerr
                    << "treat: --input, --label-col, --positive and --treatment are required\n";
                return tsdiag::cli::kExitError;
            }
            return tsdiag::cli::cmd_treat(tc);
        }
        if (eval->parsed()) {
            if (cfg.contains("inputs") && ec.inputs.empty())
                ec.inputs = cfg["inputs"].get<std::vector<std::string>>();
            from_config(cfg, "label_col", ec.label_col);
            from_config(cfg, "positive", ec.positive);
            from_config(cfg, "out", ec.out_file);
            from_config(cfg, "treatments", ec.treatments_file);
            if (cfg.contains("folds") && eval->count("--folds") == 0)
                ec.folds = cfg["folds"].get<std::size_t>();
            if (cfg.contains("seed") && eval->count("--seed") == 0)
                ec.seed = cfg["seed"].get<std::uint64_t>();
            ec.standardize = !eval_no_std;
            if (ec.inputs.empty() || ec.label_col.empty() || ec.positive.empty()) {
                std::cerr << "evaluate: --input, --label-col and --positive are required\n";
                return tsdiag::cli::kExitError;
            }
            return tsdiag::cli::cmd_evaluate(ec);
        }
        if (stats->parsed()) {
            from_config(cfg, "results", sc.results_file);
            from_config(cfg, "metric", sc.metric);
            from_config(cfg, "ddp", sc.ddp_file);
            if (cfg.contains("alpha") && stats->count("--alpha") == 0)
                sc.alpha = cfg["alpha"].get<double>();
            if (sc.results_file.empty()) {
                std::cerr << "stats: --results is required\n";
                return tsdiag::cli::kExitError;
            }
            return tsdiag::cli::cmd_stats(sc);
        }
    } catch (const std::exception& e) {
        std::cerr << "tsdiag: " << e.what() << "\n";
        return tsdiag::cli::kExitError;
    }
    return tsdiag::cli::kExitError;
}
