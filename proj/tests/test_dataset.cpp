#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "tsdiag/dataset.hpp"

using namespace tsdiag;
namespace fs = std::filesystem;

namespace {

fs::path write_temp_csv(const std::string& name, const std::string& content) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

}  // namespace

TEST_CASE("load_csv parses features and maps labels", "[dataset]") {
    const auto p = write_temp_csv("tsdiag_basic.csv",
                                  "x,cls,y\n1.5,a,2\n2.5,b,3\n3.5,a,4\n");
    const auto res = load_csv(p.string(), "cls", "a");
    REQUIRE(res.data.size() == 3);
    REQUIRE(res.data.dimensions() == 2);
    CHECK(res.data.feature_names == std::vector<std::string>{"x", "y"});
    CHECK(res.data.labels[0] == ClassLabel::Positive);
    CHECK(res.data.labels[1] == ClassLabel::Negative);
    CHECK(res.data.features(1, 0) == 2.5);
    CHECK(res.dropped_rows == 0);
    CHECK(res.data.positive_value == "a");
    CHECK(res.data.negative_value == "b");
}

TEST_CASE("load_csv single numeric column", "[dataset]") {
    const auto p = write_temp_csv("tsdiag_onecol.csv", "v,cls\n1,a\n2,b\n");
    const auto res = load_csv(p.string(), "cls", "a");
    CHECK(res.data.dimensions() == 1);
    CHECK(res.data.size() == 2);
}

TEST_CASE("load_csv drops rows with bad cells and counts them", "[dataset]") {
    const auto p = write_temp_csv("tsdiag_drop.csv",
                                  "x,y,cls\n1,2,a\nbad,3,b\n4,5,b\n");
    const auto res = load_csv(p.string(), "cls", "a");
    CHECK(res.data.size() == 2);
    CHECK(res.dropped_rows == 1);
}

TEST_CASE("load_csv error paths", "[dataset]") {
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "cls", "a"), ValidationError);
    const auto one_class = write_temp_csv("tsdiag_oneclass.csv", "x,cls\n1,a\n2,a\n");
    CHECK_THROWS_AS(load_csv(one_class.string(), "cls", "a"), ValidationError);
    const auto no_col = write_temp_csv("tsdiag_nocol.csv", "x,cls\n1,a\n2,b\n");
    CHECK_THROWS_AS(load_csv(no_col.string(), "missing", "a"), ValidationError);
    const auto dup_col = write_temp_csv("tsdiag_dupcol.csv", "x,cls,cls\n1,a,a\n2,b,b\n");
    CHECK_THROWS_AS(load_csv(dup_col.string(), "cls", "a"), ValidationError);
    const auto categorical =
        write_temp_csv("tsdiag_cat.csv", "x,color,cls\n1,red,a\n2,blue,b\n");
    CHECK_THROWS_AS(load_csv(categorical.string(), "cls", "a"), ValidationError);
    const auto bad_positive = write_temp_csv("tsdiag_badpos.csv", "x,cls\n1,a\n2,b\n");
    CHECK_THROWS_AS(load_csv(bad_positive.string(), "cls", "zz"), ValidationError);
}

TEST_CASE("summarize counts and IR", "[dataset]") {
    auto d = testsup::make_blobs({{0, 0, 1, 100, ClassLabel::Positive},
                                  {5, 5, 1, 100, ClassLabel::Negative}},
                                 7);
    auto s = summarize(d);
    CHECK(s.total_instances == 200);
    CHECK(s.imbalance_ratio == 1.0);

    auto d2 = testsup::make_blobs({{0, 0, 1, 268, ClassLabel::Positive},
                                   {5, 5, 1, 500, ClassLabel::Negative}},
                                  8);
    auto s2 = summarize(d2);
    CHECK(s2.imbalance_ratio == Catch::Approx(500.0 / 268.0).epsilon(1e-12));
    CHECK(s2.imbalance_ratio == Catch::Approx(1.87).margin(0.005));
    CHECK(s2.majority == ClassLabel::Negative);

    // duplicates counted but not removed
    Dataset dup = testsup::make_1d({1.0, 1.0, 2.0}, {3.0});
    CHECK(summarize(dup).duplicate_instances == 1);
    CHECK(dup.size() == 4);

    Dataset one = testsup::make_1d({1.0, 2.0}, {});
    CHECK_THROWS_AS(summarize(one), ValidationError);
}

TEST_CASE("summarize total equals row count and IR permutation-invariant", "[dataset]") {
    tsdiag::Rng rng(42);
    auto d = testsup::make_blobs({{0, 0, 1, 37, ClassLabel::Positive},
                                  {4, 0, 1, 81, ClassLabel::Negative}},
                                 11);
    const auto s = summarize(d);
    CHECK(s.total_instances == d.size());

    std::vector<std::size_t> perm(d.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    const auto s2 = summarize(d.subset(perm));
    CHECK(s2.imbalance_ratio == s.imbalance_ratio);
    CHECK(s2.imbalance_ratio >= 1.0);
}

TEST_CASE("standardize gives zero mean unit sd and is idempotent", "[dataset]") {
    Dataset d;
    d.features.resize(3, 2);
    d.features << 2, 5, 4, 5, 6, 5;
    d.labels = {ClassLabel::Positive, ClassLabel::Negative, ClassLabel::Negative};
    d.feature_names = {"a", "b"};

    const Dataset s = standardize(d);
    CHECK(s.features(0, 0) == Catch::Approx(-1.0).epsilon(1e-12));
    CHECK(s.features(1, 0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(s.features(2, 0) == Catch::Approx(1.0).epsilon(1e-12));
    // constant column becomes zeros
    CHECK(s.features.col(1).cwiseAbs().maxCoeff() == 0.0);

    const Dataset s2 = standardize(s);
    CHECK((s2.features - s.features).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("stratified_split proportions and determinism", "[dataset]") {
    auto d = testsup::make_blobs({{0, 0, 1, 100, ClassLabel::Positive},
                                  {8, 8, 1, 400, ClassLabel::Negative}},
                                 3);
    auto [train, test] = stratified_split(d, 0.3, 99);
    CHECK(test.count(ClassLabel::Positive) == 30);
    CHECK(test.count(ClassLabel::Negative) == 120);
    CHECK(train.size() + test.size() == d.size());

    auto [train2, test2] = stratified_split(d, 0.3, 99);
    CHECK((train2.features - train.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK((test2.features - test.features).cwiseAbs().maxCoeff() == 0.0);

    // disjoint and exhaustive: per-class totals add up
    CHECK(train.count(ClassLabel::Positive) + test.count(ClassLabel::Positive) == 100);
    CHECK(train.count(ClassLabel::Negative) + test.count(ClassLabel::Negative) == 400);

    Dataset tiny = testsup::make_1d({0.0, 1.0}, {5.0, 6.0});
    auto [tr, te] = stratified_split(tiny, 0.5, 1);
    CHECK(tr.count(ClassLabel::Positive) == 1);
    CHECK(te.count(ClassLabel::Positive) == 1);
    CHECK(tr.count(ClassLabel::Negative) == 1);
    CHECK(te.count(ClassLabel::Negative) == 1);

    Dataset too_small = testsup::make_1d({0.0}, {5.0, 6.0});
    CHECK_THROWS_AS(stratified_split(too_small, 0.5, 1), ValidationError);
}
