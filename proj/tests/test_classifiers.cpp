#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>

#include "test_support.hpp"
#include "tsdiag/classifiers.hpp"

using namespace tsdiag;

namespace {

constexpr auto POS = ClassLabel::Positive;
constexpr auto NEG = ClassLabel::Negative;

}  // namespace

TEST_CASE("gnb symmetric classes put the boundary at zero", "[classifiers]") {
    Rng rng(3);
    Dataset d;
    d.features.resize(200, 1);
    for (int i = 0; i < 100; ++i) d.features(i, 0) = 3.0 + rng.normal();
    for (int i = 0; i < 100; ++i) d.features(100 + i, 0) = -3.0 + rng.normal();
    for (int i = 0; i < 100; ++i) d.labels.push_back(POS);
    for (int i = 0; i < 100; ++i) d.labels.push_back(NEG);
    const auto m = fit({"GNB", {}, 0}, d);
    CHECK(m.predict_score(Eigen::VectorXd::Constant(1, 2.0)) > 0.9);
    CHECK(m.predict_score(Eigen::VectorXd::Constant(1, -2.0)) < 0.1);
    // near the midpoint the score crosses one half
    CHECK(m.predict_score(Eigen::VectorXd::Constant(1, 0.4)) > 0.5);
    CHECK(m.predict_score(Eigen::VectorXd::Constant(1, -0.4)) < 0.5);
}

TEST_CASE("lda equals qda when class covariances coincide", "[classifiers]") {
    Rng rng(5);
    Eigen::MatrixXd base(40, 2);
    for (Eigen::Index i = 0; i < 40; ++i) {
        base(i, 0) = rng.normal();
        base(i, 1) = rng.normal();
    }
    Dataset d;
    d.features.resize(80, 2);
    d.features.topRows(40) = base;
    d.features.bottomRows(40) = base.rowwise() + Eigen::RowVector2d(10, 0);
    for (int i = 0; i < 40; ++i) d.labels.push_back(NEG);
    for (int i = 0; i < 40; ++i) d.labels.push_back(POS);

    const auto lda = fit({"LDA", {}, 0}, d);
    const auto qda = fit({"QDA", {}, 0}, d);
    Rng probe(7);
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::VectorXd x(2);
        x << 5.0 + 4.0 * probe.normal(), 4.0 * probe.normal();
        CHECK(lda.predict_score(x) == Catch::Approx(qda.predict_score(x)).margin(1e-10));
    }
}

TEST_CASE("scores are valid probabilities", "[classifiers]") {
    const auto d = testsup::make_blobs({{0, 0, 1, 50, POS}, {4, 0, 1.5, 70, NEG}}, 9);
    Rng probe(11);
    for (const char* name : {"GNB", "LDA", "QDA", "KNN"}) {
        const auto m = fit({name, {}, 0}, d);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd x(2);
            x << 6.0 * probe.normal(), 6.0 * probe.normal();
            const double s = m.predict_score(x);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
            CHECK(std::isfinite(s));
        }
    }
}

TEST_CASE("knn self-prediction on a separated fixture", "[classifiers]") {
    const auto d = testsup::make_blobs({{0, 0, 0.5, 20, POS}, {30, 0, 0.5, 40, NEG}}, 13);
    const auto m = fit({"KNN", {{"k", 1}}, 0}, d);
    // each training positive's nearest training point is itself
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double s = m.predict_score(d.features.row(static_cast<Eigen::Index>(i)).transpose());
        CHECK(s == (d.labels[i] == POS ? 1.0 : 0.0));
    }
}

TEST_CASE("knn with k = N-1 predicts roughly the prior", "[classifiers]") {
    const auto d = testsup::make_blobs({{0, 0, 1, 30, POS}, {2, 0, 1, 70, NEG}}, 17);
    const auto m = fit({"KNN", {{"k", 99}}, 0}, d);
    const double prior = 0.30;
    Rng probe(19);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd x(2);
        x << 4.0 * probe.normal(), 4.0 * probe.normal();
        CHECK(std::fabs(m.predict_score(x) - prior) <= 1.5 / 99.0 + 0.02);
    }
}

TEST_CASE("fit validation", "[classifiers]") {
    Dataset one = testsup::make_1d({0.0, 1.0}, {});
    CHECK_THROWS_AS(fit({"GNB", {}, 0}, one), FitError);
    const auto d = testsup::make_1d({0.0, 1.0}, {4.0, 5.0});
    CHECK_THROWS_AS(fit({"FOREST", {}, 0}, d), ValidationError);
    CHECK_THROWS_AS(fit({"KNN", {{"k", 0}}, 0}, d), ValidationError);
    CHECK_THROWS_AS(fit({"KNN", {{"q", 3}}, 0}, d), ValidationError);
}

TEST_CASE("stratified kfold structure", "[classifiers]") {
    const auto d = testsup::make_blobs({{0, 0, 1, 100, POS}, {5, 0, 1, 400, NEG}}, 21);
    const auto plan = stratified_kfold(d, 10, 5);
    REQUIRE(plan.n_folds == 10);
    std::set<std::size_t> seen;
    for (const auto& [train, test] : plan.folds) {
        std::size_t test_pos = 0;
        for (auto i : test) {
            CHECK_FALSE(seen.count(i));
            seen.insert(i);
            if (d.labels[i] == POS) ++test_pos;
        }
        CHECK(test_pos == 10);
        CHECK(test.size() == 50);
        CHECK(train.size() + test.size() == d.size());
        // disjointness: no train index in this fold's test set
        std::set<std::size_t> test_set(test.begin(), test.end());
        for (auto i : train) CHECK_FALSE(test_set.count(i));
    }
    CHECK(seen.size() == d.size());   // exhaustive

    const auto plan2 = stratified_kfold(d, 10, 5);
    CHECK(plan2.folds == plan.folds);   // seed determinism

    // class smaller than fold count: reduced with a warning
    const auto tiny = testsup::make_blobs({{0, 0, 1, 3, POS}, {5, 0, 1, 30, NEG}}, 23);
    const auto reduced = stratified_kfold(tiny, 10, 1);
    CHECK(reduced.n_folds == 3);
    CHECK_FALSE(reduced.warnings.empty());
}

TEST_CASE("treatments in folds never touch test rows", "[classifiers]") {
    const auto d = testsup::make_blobs({{0, 0, 1, 40, POS}, {2.5, 0, 1, 120, NEG}}, 25);
    const auto plan = stratified_kfold(d, 5, 77);
    for (const auto& [train_idx, test_idx] : plan.folds) {
        const Dataset train = d.subset(train_idx);
        const auto treated =
            apply_treatment(train, {"SMOTE", {{"perc_over", 100}, {"perc_under", 100}}, 3});
        // provenance points into the train subset only; train and test are
        // disjoint, so no test row can reach the treated set
        std::set<std::size_t> test_set(test_idx.begin(), test_idx.end());
        for (const auto& p : treated.provenance) {
            REQUIRE(p.source_row < train_idx.size());
            CHECK_FALSE(test_set.count(train_idx[p.source_row]));
        }
    }
}

TEST_CASE("evaluate with Raw runs plain cross-validation", "[classifiers]") {
    const auto d = testsup::make_blobs({{0, 0, 1, 40, POS}, {4, 0, 1, 120, NEG}}, 29);
    EvaluateOptions opts;
    opts.folds = 5;
    const auto outcomes = evaluate(d, {"GNB", {}, 0}, {"Raw", {}, 0}, 11, opts);
    REQUIRE(outcomes.size() == 5);
    for (const auto& fo : outcomes) {
        REQUIRE(fo.metrics.has_value());
        CHECK(fo.failure.empty());
        CHECK(fo.metrics->auc.has_value());
        CHECK(*fo.metrics->auc > 0.8);   // well-separated fixture
    }
    const auto rerun = evaluate(d, {"GNB", {}, 0}, {"Raw", {}, 0}, 11, opts);
    for (std::size_t f = 0; f < outcomes.size(); ++f)
        CHECK(outcomes[f].metrics->auc == rerun[f].metrics->auc);
}

TEST_CASE("evaluate records failed folds without aborting", "[classifiers]") {
    // three positives drowned in negatives: ENN removes them in every fold,
    // leaving one-class training data
    Dataset d = testsup::make_1d({5.0, 5.5, 6.0},
                                 {4.9, 5.1, 5.2, 5.4, 5.6, 5.7, 5.9, 6.1, 6.2, 4.8, 5.05, 5.45,
                                  5.85, 6.05, 4.95, 5.15, 5.35, 5.55, 5.75, 5.95});
    EvaluateOptions opts;
    opts.folds = 3;
    const auto outcomes = evaluate(d, {"GNB", {}, 0}, {"ENN", {}, 0}, 3, opts);
    REQUIRE(outcomes.size() == 3);
    std::size_t failed = 0;
    for (const auto& fo : outcomes)
        if (!fo.metrics) {
            ++failed;
            CHECK_FALSE(fo.failure.empty());
        }
    CHECK(failed > 0);
}

TEST_CASE("run_grid shape, schema and resume", "[classifiers]") {
    auto d1 = testsup::make_blobs({{0, 0, 1, 30, POS}, {4, 0, 1, 60, NEG}}, 31);
    d1.id = "alpha";
    auto d2 = testsup::make_blobs({{0, 0, 1, 25, POS}, {3, 0, 1, 50, NEG}}, 33);
    d2.id = "beta";
    const std::vector<ClassifierSpec> classifiers = {{"GNB", {}, 0}, {"KNN", {{"k", 3}}, 0}};
    const std::vector<TreatmentSpec> treatments = {
        {"Raw", {}, 0}, {"SMOTE", {{"perc_over", 100}, {"perc_under", 100}}, 0}};
    EvaluateOptions opts;
    opts.folds = 3;
    const auto rows = run_grid({d1, d2}, classifiers, treatments, 99, opts);
    // 2*2*2 cells x 3 folds x 10 metrics = 240 rows when nothing fails
    CHECK(rows.size() <= 240);
    CHECK(rows.size() >= 200);
    for (const auto& r : rows) {
        CHECK((r.dataset == "alpha" || r.dataset == "beta"));
        CHECK((r.classifier == "GNB" || r.classifier == "KNN"));
        CHECK(r.fold < 3);
        CHECK_FALSE(r.metric.empty());
        CHECK_FALSE(r.value.empty());
    }

    // determinism
    const auto rows2 = run_grid({d1, d2}, classifiers, treatments, 99, opts);
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].value == rows2[i].value);
        CHECK(rows[i].metric == rows2[i].metric);
    }

    // threaded execution returns identical rows
    const auto rows_mt = run_grid({d1, d2}, classifiers, treatments, 99, opts, {}, 2);
    REQUIRE(rows_mt.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].value == rows_mt[i].value);

    // resume: every key present -> nothing recomputed
    std::set<std::string> existing;
    for (const auto& r : rows)
        existing.insert(r.dataset + "|" + r.classifier + "|" + r.treatment + "|" +
                        std::to_string(r.fold));
    CHECK(run_grid({d1, d2}, classifiers, treatments, 99, opts, existing).empty());
}

TEST_CASE("metric fields cover the advertised set", "[classifiers]") {
    std::set<std::string> names;
    for (const auto& [name, _] : metric_fields()) names.insert(name);
    CHECK(names == std::set<std::string>{"acc", "sensitivity", "specificity", "precision", "f1",
                                         "g_mean", "auc", "phi", "tpr", "fpr"});
}
