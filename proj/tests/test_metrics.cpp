#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "test_support.hpp"
#include "tsdiag/metrics.hpp"

using namespace tsdiag;

namespace {

ScoredPredictions scored(std::initializer_list<std::pair<double, ClassLabel>> items) {
    ScoredPredictions s;
    for (const auto& [score, label] : items) {
        s.scores.push_back(score);
        s.truth.push_back(label);
    }
    return s;
}

constexpr auto P = ClassLabel::Positive;
constexpr auto N = ClassLabel::Negative;

}  // namespace

TEST_CASE("confusion matrix thresholding", "[metrics]") {
    const auto s = scored({{0.9, P}, {0.4, P}, {0.6, N}, {0.1, N}});
    const auto c = confusion(s, 0.5);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 1);

    const auto perfect = confusion(scored({{0.9, P}, {0.1, N}}), 0.5);
    CHECK(perfect.fn == 0);
    CHECK(perfect.fp == 0);

    const auto zeros = confusion(scored({{0.0, P}, {0.0, N}}), 0.5);
    CHECK(zeros.tp == 0);
    CHECK(zeros.fp == 0);
    CHECK(zeros.fn == 1);
}

TEST_CASE("basic metrics hand fixture", "[metrics]") {
    const ConfusionMatrix c{3, 1, 2, 4};   // tp fn fp tn
    const auto m = basic_metrics(c);
    CHECK(*m.acc == Catch::Approx(0.7).epsilon(1e-12));
    CHECK(*m.sensitivity == Catch::Approx(0.75).epsilon(1e-12));
    CHECK(*m.specificity == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(*m.precision == Catch::Approx(0.6).epsilon(1e-12));
    CHECK(*m.tpr == *m.sensitivity);
    CHECK(*m.fpr == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("undefined metrics are empty not zero", "[metrics]") {
    const ConfusionMatrix no_pred_pos{0, 2, 0, 3};
    CHECK_FALSE(basic_metrics(no_pred_pos).precision.has_value());
    const ConfusionMatrix no_pos{0, 0, 1, 3};
    CHECK_FALSE(basic_metrics(no_pos).sensitivity.has_value());
    CHECK_FALSE(g_mean(no_pos).has_value());
    CHECK_FALSE(phi(no_pos).has_value());
}

TEST_CASE("f1 cases", "[metrics]") {
    CHECK(*f1({50, 0, 0, 50}) == 1.0);
    // tp = 0 with predictions made: precision defined (0), sensitivity 0 -> undefined sum
    CHECK_FALSE(f1({0, 5, 5, 5}).has_value());
    // no positive predictions at all: precision undefined
    CHECK_FALSE(f1({0, 5, 0, 5}).has_value());
    const ConfusionMatrix c{3, 1, 2, 4};
    CHECK(*f1(c) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("g-mean cases", "[metrics]") {
    CHECK(*g_mean({0, 10, 0, 50}) == 0.0);   // Acc+ = 0
    CHECK(*g_mean({10, 0, 0, 50}) == 1.0);
    const ConfusionMatrix c{8, 2, 1, 9};
    CHECK(*g_mean(c) == Catch::Approx(std::sqrt(0.72)).epsilon(1e-12));
}

TEST_CASE("phi cases", "[metrics]") {
    CHECK(*phi({50, 0, 0, 50}) == 1.0);
    CHECK(*phi({25, 25, 25, 25}) == 0.0);
    CHECK(*phi({40, 10, 20, 30}) ==
          Catch::Approx(1000.0 / std::sqrt(6000000.0)).epsilon(1e-12));
}

TEST_CASE("auc hand case and ties", "[metrics]") {
    CHECK(auc(scored({{0.9, P}, {0.8, P}, {0.7, N}, {0.85, N}})) == Catch::Approx(0.75));
    CHECK(auc(scored({{0.9, P}, {0.1, N}})) == 1.0);
    CHECK(auc(scored({{0.5, P}, {0.5, N}, {0.5, P}})) == 0.5);
    CHECK_THROWS_AS(auc(scored({{0.5, P}, {0.6, P}})), ValidationError);
}

TEST_CASE("auc equals trapezoidal ROC integration", "[metrics]") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        ScoredPredictions s;
        const std::size_t n = 5 + rng.uniform_int(40);
        bool has_p = false, has_n = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores force ties
            s.scores.push_back(std::floor(rng.uniform01() * 8.0) / 8.0);
            const bool pos = rng.uniform01() < 0.4;
            s.truth.push_back(pos ? P : N);
            (pos ? has_p : has_n) = true;
        }
        if (!has_p || !has_n) continue;
        CHECK(auc(s) == Catch::Approx(testsup::auc_trapezoid(s.scores, s.truth)).margin(1e-12));
    }
}

TEST_CASE("auc complement symmetry and monotone invariance", "[metrics]") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        ScoredPredictions s;
        const std::size_t n = 4 + rng.uniform_int(30);
        bool has_p = false, has_n = false;
        for (std::size_t i = 0; i < n; ++i) {
            s.scores.push_back(std::floor(rng.uniform01() * 6.0) / 6.0);
            const bool pos = rng.uniform01() < 0.5;
            s.truth.push_back(pos ? P : N);
            (pos ? has_p : has_n) = true;
        }
        if (!has_p || !has_n) continue;
        ScoredPredictions swapped = s;
        for (auto& t : swapped.truth) t = (t == P) ? N : P;
        CHECK(auc(s) + auc(swapped) == 1.0);

        // strictly increasing transform leaves auc unchanged
        ScoredPredictions mono = s;
        for (auto& v : mono.scores) v = std::exp(3.0 * v) + 2.0 * v;
        CHECK(auc(mono) == auc(s));
    }
}

TEST_CASE("g_mean bounded by max per-class accuracy", "[metrics]") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const ConfusionMatrix c{rng.uniform_int(20) + 1, rng.uniform_int(20),
                                rng.uniform_int(20), rng.uniform_int(20) + 1};
        const auto m = basic_metrics(c);
        const auto g = g_mean(c);
        REQUIRE(g.has_value());
        CHECK(*g <= std::max(*m.sensitivity, *m.specificity) + 1e-12);
        const auto f = f1(c);
        if (f && m.precision)
            CHECK(*f <= 2.0 * std::min(*m.precision, *m.sensitivity) + 1e-12);
    }
}

TEST_CASE("compute_metrics assembles the set", "[metrics]") {
    const auto s = scored({{0.9, P}, {0.4, P}, {0.6, N}, {0.1, N}});
    const auto m = compute_metrics(s, 0.5);
    CHECK(*m.acc == 0.5);
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == Catch::Approx(0.75));
    CHECK(m.g_mean.has_value());
}
