#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tsdiag/cli.hpp"

using namespace tsdiag;
namespace fs = std::filesystem;

namespace {

constexpr auto POS = ClassLabel::Positive;
constexpr auto NEG = ClassLabel::Negative;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_dataset_csv(const Dataset& d, const fs::path& path) {
    std::ofstream out(path);
    for (std::size_t j = 0; j < d.feature_names.size(); ++j) out << d.feature_names[j] << ",";
    out << "label\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (Eigen::Index j = 0; j < d.features.cols(); ++j)
            out << format_value(d.features(static_cast<Eigen::Index>(i), j)) << ",";
        out << (d.labels[i] == POS ? "yes" : "no") << "\n";
    }
    return path.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dataset five_blob_dataset(std::uint64_t seed) {
    return testsup::make_blobs({{0, 0, 1, 60, NEG},
                                {12, 0, 1, 50, NEG},
                                {24, 0, 1, 45, NEG},
                                {6, 14, 1, 45, POS},
                                {18, 14, 1, 40, POS}},
                               seed);
}

}  // namespace

TEST_CASE("cmd_diagnose writes the full report set deterministically", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_diag");
    const auto csv = write_dataset_csv(five_blob_dataset(101), dir / "data.csv");

    cli::DiagnoseConfig cfg;
    cfg.input = csv;
    cfg.label_col = "label";
    cfg.positive = "yes";
    cfg.out_dir = (dir / "out1").string();
    cfg.params.seed = 4;
    std::ostringstream err;
    REQUIRE(cli::cmd_diagnose(cfg, err) == cli::kExitOk);

    for (const char* f : {"report.json", "report.txt", "iro.csv", "noise.csv", "subclasses.csv"})
        CHECK(fs::exists(dir / "out1" / f));

    const json rep = json::parse(slurp(dir / "out1" / "report.json"));
    for (const char* key :
         {"summary", "subclasses", "iro", "noise", "dispersion", "ddp", "warnings", "config"})
        CHECK(rep.contains(key));
    CHECK(rep["subclasses"]["Negative"]["num_subclasses"] == 3);
    CHECK(rep["subclasses"]["Positive"]["num_subclasses"] == 2);
    CHECK(rep["summary"]["total_instances"] == 240);
    CHECK(rep["ddp"]["ir_level"] == "Low");

    // rerun into a second directory: byte-identical artifacts
    cfg.out_dir = (dir / "out2").string();
    REQUIRE(cli::cmd_diagnose(cfg, err) == cli::kExitOk);
    for (const char* f : {"report.json", "report.txt", "iro.csv", "noise.csv", "subclasses.csv"})
        CHECK(slurp(dir / "out1" / f) == slurp(dir / "out2" / f));
}

TEST_CASE("cmd_diagnose early exit returns 2 with membership only", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_early");
    const auto d = testsup::make_blobs({{0, 0, 1, 3, POS}, {20, 0, 1, 40, NEG}}, 7);
    const auto csv = write_dataset_csv(d, dir / "data.csv");

    cli::DiagnoseConfig cfg;
    cfg.input = csv;
    cfg.label_col = "label";
    cfg.positive = "yes";
    cfg.out_dir = (dir / "out").string();
    cfg.params.c_min = 5;
    std::ostringstream err;
    CHECK(cli::cmd_diagnose(cfg, err) == cli::kExitEarlyDiagnosis);
    CHECK(fs::exists(dir / "out" / "subclasses.csv"));
    CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
}

TEST_CASE("cmd_diagnose error exit", "[cli]") {
    cli::DiagnoseConfig cfg;
    cfg.input = "/nonexistent/nope.csv";
    cfg.label_col = "label";
    cfg.positive = "yes";
    std::ostringstream err;
    CHECK(cli::cmd_diagnose(cfg, err) == cli::kExitError);
    CHECK_FALSE(err.str().empty());
}

TEST_CASE("cmd_treat Raw preserves rows and marks provenance", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_treat");
    const auto d = testsup::make_blobs({{0, 0, 1, 20, POS}, {5, 0, 1, 40, NEG}}, 3);
    const auto csv = write_dataset_csv(d, dir / "data.csv");

    cli::TreatConfig cfg;
    cfg.input = csv;
    cfg.label_col = "label";
    cfg.positive = "yes";
    cfg.out_dir = (dir / "raw").string();
    cfg.spec = {"Raw", {}, 0};
    std::ostringstream err;
    REQUIRE(cli::cmd_treat(cfg, err) == cli::kExitOk);

    const auto loaded = load_csv((dir / "raw" / "treated.csv").string(), "label", "yes", {"provenance"});
    const auto original = load_csv(csv, "label", "yes");
    CHECK(loaded.data.size() == d.size());
    // Raw keeps the ingested rows bit-for-bit
    CHECK((loaded.data.features - original.data.features).cwiseAbs().maxCoeff() == 0.0);

    const std::string prov = slurp(dir / "raw" / "provenance.csv");
    CHECK(prov.find("synthetic") == std::string::npos);
    CHECK(prov.find("original") != std::string::npos);
}

TEST_CASE("cmd_treat SMOTE row arithmetic", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_smote");
    const auto d = testsup::make_blobs({{0, 0, 1, 50, POS}, {4, 0, 1, 200, NEG}}, 5);
    const auto csv = write_dataset_csv(d, dir / "data.csv");

    cli::TreatConfig cfg;
    cfg.input = csv;
    cfg.label_col = "label";
    cfg.positive = "yes";
    cfg.out_dir = (dir / "sm").string();
    cfg.spec = {"SMOTE", {{"perc_over", 200}, {"perc_under", 150}, {"k", 3}}, 9};
    std::ostringstream err;
    REQUIRE(cli::cmd_treat(cfg, err) == cli::kExitOk);
    // 50 positives + 100 synthetics + 150 negatives
    const auto loaded = load_csv((dir / "sm" / "treated.csv").string(), "label", "yes", {"provenance"});
    CHECK(loaded.data.size() == 300);
    CHECK(loaded.data.count(POS) == 150);
    CHECK(loaded.data.count(NEG) == 150);
}

TEST_CASE("cmd_evaluate writes a grid CSV and reruns append nothing", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_eval");
    auto d1 = testsup::make_blobs({{0, 0, 1, 20, POS}, {4, 0, 1, 40, NEG}}, 11);
    auto d2 = testsup::make_blobs({{0, 0, 1, 18, POS}, {3, 0, 1, 36, NEG}}, 13);
    const auto c1 = write_dataset_csv(d1, dir / "a.csv");
    const auto c2 = write_dataset_csv(d2, dir / "b.csv");

    cli::EvaluateConfig cfg;
    cfg.inputs = {c1, c2};
    cfg.label_col = "label";
    cfg.positive = "yes";
    cfg.out_file = (dir / "results.csv").string();
    cfg.classifier_names = {"GNB", "KNN"};
    cfg.folds = 3;
    cfg.seed = 21;
    std::ostringstream err;
    REQUIRE(cli::cmd_evaluate(cfg, err) == cli::kExitOk);
    const std::string first = slurp(dir / "results.csv");
    CHECK(first.find("dataset,classifier,treatment,fold,metric,value") != std::string::npos);
    CHECK(first.find("g_mean") != std::string::npos);

    // identical rerun appends nothing
    REQUIRE(cli::cmd_evaluate(cfg, err) == cli::kExitOk);
    CHECK(slurp(dir / "results.csv") == first);

    // fresh-path rerun is byte-identical
    cfg.out_file = (dir / "results2.csv").string();
    REQUIRE(cli::cmd_evaluate(cfg, err) == cli::kExitOk);
    CHECK(slurp(dir / "results2.csv") == first);
}

TEST_CASE("cmd_stats on the hand table and on identical columns", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_stats");

    SECTION("hand 3x4 table reproduces the Friedman oracle") {
        std::ofstream out(dir / "hand.csv");
        out << "dataset,classifier,treatment,fold,metric,value\n";
        const std::vector<std::vector<double>> scores = {
            {0.9, 0.7, 0.8}, {0.6, 0.5, 0.4}, {0.55, 0.65, 0.35}, {0.2, 0.3, 0.25}};
        const std::vector<std::string> treatments = {"Raw", "SMOTE", "ENN"};
        for (std::size_t dsi = 0; dsi < scores.size(); ++dsi)
            for (std::size_t t = 0; t < 3; ++t)
                out << "d" << dsi << ",GNB," << treatments[t] << ",0,g_mean,"
                    << scores[dsi][t] << "\n";
        out.close();

        cli::StatsConfig cfg;
        cfg.results_file = (dir / "hand.csv").string();
        cfg.out_dir = (dir / "hand_out").string();
        std::ostringstream err;
        REQUIRE(cli::cmd_stats(cfg, err) == cli::kExitOk);
        const json stats = json::parse(slurp(dir / "hand_out" / "stats.json"));
        CHECK(stats["friedman_cld"]["GNB"]["friedman"]["statistic"].get<double>() ==
              Catch::Approx(1.5).margin(1e-12));
        CHECK(stats["friedman_cld"]["GNB"]["friedman"]["p_value"].get<double>() ==
              Catch::Approx(std::exp(-0.75)).epsilon(1e-9));
        CHECK(fs::exists(dir / "hand_out" / "letters.txt"));
        CHECK(fs::exists(dir / "hand_out" / "ranks.csv"));
    }

    SECTION("identical columns give p = 1 and a single shared letter") {
        std::ofstream out(dir / "same.csv");
        out << "dataset,classifier,treatment,fold,metric,value\n";
        for (int dsi = 0; dsi < 4; ++dsi)
            for (const char* t : {"Raw", "SMOTE", "ENN"})
                out << "d" << dsi << ",GNB," << t << ",0,g_mean,0.5\n";
        out.close();

        cli::StatsConfig cfg;
        cfg.results_file = (dir / "same.csv").string();
        cfg.out_dir = (dir / "same_out").string();
        std::ostringstream err;
        REQUIRE(cli::cmd_stats(cfg, err) == cli::kExitOk);
        const json stats = json::parse(slurp(dir / "same_out" / "stats.json"));
        CHECK(stats["friedman_cld"]["GNB"]["friedman"]["p_value"] == 1.0);
        for (const char* t : {"Raw", "SMOTE", "ENN"})
            CHECK(stats["friedman_cld"]["GNB"]["letters"][t] == "a");
    }

    SECTION("ddp labels produce A/B verdicts") {
        std::ofstream out(dir / "levels.csv");
        out << "dataset,classifier,treatment,fold,metric,value\n";
        Rng rng(1);
        for (int dsi = 0; dsi < 12; ++dsi) {
            const bool high = dsi < 6;
            for (int fold = 0; fold < 3; ++fold) {
                const double v = (high ? 0.4 : 0.8) + 0.02 * rng.uniform01();
                out << "d" << dsi << ",GNB,Raw," << fold << ",g_mean," << v << "\n";
                out << "d" << dsi << ",GNB,SMOTE," << fold << ",g_mean," << (v + 0.05) << "\n";
            }
        }
        out.close();
        std::ofstream ddp(dir / "ddp.csv");
        ddp << "dataset,ir_level,disjunct_level,overlap_level\n";
        for (int dsi = 0; dsi < 12; ++dsi)
            ddp << "d" << dsi << "," << (dsi < 6 ? "High" : "Low") << ",Low,Low\n";
        ddp.close();

        cli::StatsConfig cfg;
        cfg.results_file = (dir / "levels.csv").string();
        cfg.ddp_file = (dir / "ddp.csv").string();
        cfg.out_dir = (dir / "levels_out").string();
        std::ostringstream err;
        REQUIRE(cli::cmd_stats(cfg, err) == cli::kExitOk);
        const json stats = json::parse(slurp(dir / "levels_out" / "stats.json"));
        REQUIRE(stats.contains("ddp_tests"));
        // the High-IR group clearly underperforms: statement accepted
        CHECK(stats["ddp_tests"]["GNB"]["ir"]["verdict"] == true);
        CHECK(stats["ddp_tests"]["GNB"]["ir"]["test_a_p"].get<double>() < 0.05);
        // disjuncts all Low: no comparison possible
        CHECK(stats["ddp_tests"]["GNB"]["disjuncts"]["verdict"].is_null());
    }
}

TEST_CASE("cmd_stats input validation", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_stats_bad");
    std::ofstream out(dir / "thin.csv");
    out << "dataset,classifier,treatment,fold,metric,value\n";
    out << "d0,GNB,Raw,0,g_mean,0.5\n";
    out.close();
    cli::StatsConfig cfg;
    cfg.results_file = (dir / "thin.csv").string();
    cfg.out_dir = (dir / "out").string();
    std::ostringstream err;
    CHECK(cli::cmd_stats(cfg, err) == cli::kExitError);
    CHECK_FALSE(err.str().empty());
}

TEST_CASE("mixture model serialization shape", "[cli]") {
    Rng rng(404);
    Eigen::MatrixXd X(30, 2);
    for (Eigen::Index i = 0; i < 30; ++i) {
        X(i, 0) = rng.normal() + (i < 15 ? 0.0 : 9.0);
        X(i, 1) = rng.normal();
    }
    const auto m = em_fit(X, 2, CovarianceModel::VVI, 5);
    const json j = to_json(m);
    CHECK(j["model"] == "VVI");
    CHECK(j["K"] == 2);
    CHECK(j["weights"].size() == 2);
    CHECK(j["means"].size() == 2);
    CHECK(j["means"][0].size() == 2);
    CHECK(j["covariances"].size() == 2);
    CHECK(j["covariances"][0].size() == 2);
    CHECK(j["covariances"][0][0].size() == 2);
    CHECK(j["loglik"].get<double>() == m.log_likelihood);
    CHECK(j["bic"].get<double>() == m.bic);
}

TEST_CASE("stats json carries pairwise comparisons", "[cli]") {
    const auto dir = fresh_dir("tsdiag_cli_pairwise");
    std::ofstream out(dir / "r.csv");
    out << "dataset,classifier,treatment,fold,metric,value\n";
    Rng rng(5);
    for (int dsi = 0; dsi < 8; ++dsi)
        for (const char* t : {"Raw", "SMOTE", "ENN"}) {
            const double base = t == std::string("SMOTE") ? 0.8 : 0.5;
            out << "d" << dsi << ",GNB," << t << ",0,g_mean," << base + 0.05 * rng.uniform01()
                << "\n";
        }
    out.close();
    cli::StatsConfig cfg;
    cfg.results_file = (dir / "r.csv").string();
    cfg.out_dir = (dir / "out").string();
    std::ostringstream err;
    REQUIRE(cli::cmd_stats(cfg, err) == cli::kExitOk);
    const json stats = json::parse(slurp(dir / "out" / "stats.json"));
    REQUIRE(stats["friedman_cld"]["GNB"].contains("pairwise"));
    CHECK(stats["friedman_cld"]["GNB"]["pairwise"].size() == 3);   // C(3,2)
    bool found = false;
    for (const auto& pair : stats["friedman_cld"]["GNB"]["pairwise"])
        if ((pair["a"] == "Raw" && pair["b"] == "SMOTE") ||
            (pair["a"] == "SMOTE" && pair["b"] == "Raw")) {
            found = true;
            CHECK(pair["p_value"].get<double>() < 0.05);
        }
    CHECK(found);
}

TEST_CASE("dump_json sorts keys and fixes float digits", "[cli]") {
    json j;
    j["zeta"] = 1.0 / 3.0;
    j["alpha"] = json::array({1.5, json(nullptr)});
    j["mid"] = json{{"b", 2}, {"a", true}};
    const std::string s = dump_json(j);
    CHECK(s.find("\"alpha\"") < s.find("\"mid\""));
    CHECK(s.find("\"mid\"") < s.find("\"zeta\""));
    CHECK(s.find("0.333333333333") != std::string::npos);
    CHECK(s.find("null") != std::string::npos);
    CHECK(dump_json(j) == s);
}
