#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "test_support.hpp"
#include "tsdiag/separation.hpp"
#include "tsdiag/special.hpp"

using namespace tsdiag;

namespace {

GaussianComponent comp1d(double mean, double var) {
    GaussianComponent c;
    c.mean = Eigen::VectorXd::Constant(1, mean);
    c.covariance = Eigen::MatrixXd::Constant(1, 1, var);
    return c;
}

GaussianComponent comp2d(double mx, double my, const Eigen::Matrix2d& cov) {
    GaussianComponent c;
    c.mean = Eigen::Vector2d(mx, my);
    c.covariance = cov;
    return c;
}

GaussianComponent random_spd_component(Rng& rng, int dim) {
    GaussianComponent c;
    c.mean = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) c.mean(i) = 3.0 * rng.normal();
    Eigen::MatrixXd M(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) M(i, j) = rng.normal();
    c.covariance = M.transpose() * M + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
    return c;
}

// (gap - 2q) / (gap + 2q) for unit-variance 1-D components
double j_1d_expected(double gap, double alpha) {
    const double q = normal_quantile(1.0 - alpha / 2.0);
    return (gap - 2.0 * q) / (gap + 2.0 * q);
}

}  // namespace

TEST_CASE("j_index identical components is exactly -1", "[separation]") {
    const auto c = comp1d(3.0, 2.0);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0);
    CHECK(j_index(a, c, c, 0.05) == -1.0);
}

TEST_CASE("j_index 1-D hand evaluation", "[separation]") {
    const auto c1 = comp1d(0.0, 1.0);
    const auto c2 = comp1d(10.0, 1.0);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0);
    CHECK(j_index(a, c1, c2, 0.05) == Catch::Approx(0.436789044054349).margin(1e-9));
    // orientation convention: same value from the other side
    CHECK(j_index(a, c2, c1, 0.05) == j_index(a, c1, c2, 0.05));
}

TEST_CASE("j_index touching components give zero", "[separation]") {
    const double q = normal_quantile(0.975);
    const auto c1 = comp1d(0.0, 1.0);
    const auto c2 = comp1d(2.0 * q, 1.0);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0);
    CHECK(j_index(a, c1, c2, 0.05) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("j_index scale invariance", "[separation]") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c1 = random_spd_component(rng, 3);
        const auto c2 = random_spd_component(rng, 3);
        Eigen::VectorXd a(3);
        for (int i = 0; i < 3; ++i) a(i) = rng.normal();
        if (a.norm() == 0.0) continue;
        const double base = j_index(a, c1, c2, 0.05);
        // power-of-two scalings are exact in floating point
        for (double c : {2.0, 0.5, 1024.0})
            CHECK(j_index((c * a).eval(), c1, c2, 0.05) == base);
        const double arbitrary = 0.1 + 3.0 * rng.uniform01();
        CHECK(j_index((arbitrary * a).eval(), c1, c2, 0.05) ==
              Catch::Approx(base).margin(1e-12));
    }
}

TEST_CASE("j_index validation", "[separation]") {
    const auto c = comp1d(0.0, 1.0);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(j_index(zero, c, c, 0.05), ValidationError);
    Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0);
    CHECK_THROWS_AS(j_index(a, c, c, 0.7), ValidationError);
    auto bad = c;
    bad.covariance(0, 0) = -1.0;
    CHECK_THROWS_AS(j_index(a, c, bad, 0.05), ProjectionError);
}

TEST_CASE("optimal_separation reduces to the 1-D hand case", "[separation]") {
    const auto c1 = comp2d(0, 0, Eigen::Matrix2d::Identity());
    const auto c2 = comp2d(10, 0, Eigen::Matrix2d::Identity());
    const auto r = optimal_separation(c1, c2, 0.05);
    CHECK(r.j_star == Catch::Approx(0.436789044054349).margin(1e-9));
    CHECK(std::fabs(r.direction(0)) == Catch::Approx(1.0).margin(1e-6));
    CHECK(std::fabs(r.direction(1)) == Catch::Approx(0.0).margin(1e-6));
    CHECK(r.direction.norm() == Catch::Approx(1.0).margin(1e-10));
    CHECK(r.converged);
}

TEST_CASE("optimal_separation identical components", "[separation]") {
    const auto c = comp2d(1, 2, Eigen::Matrix2d::Identity());
    const auto r = optimal_separation(c, c, 0.05);
    CHECK(r.j_star == -1.0);
    CHECK(r.converged);
    CHECK(r.direction(0) == 1.0);
}

TEST_CASE("optimal_separation equal means different covariances", "[separation]") {
    Eigen::Matrix2d wide;
    wide << 9, 0, 0, 1;
    const auto c1 = comp2d(0, 0, Eigen::Matrix2d::Identity());
    const auto c2 = comp2d(0, 0, wide);
    const auto r = optimal_separation(c1, c2, 0.05);
    CHECK(r.j_star == -1.0);   // every direction overlaps fully
    CHECK_FALSE(r.converged);
}

TEST_CASE("optimal_separation symmetry", "[separation]") {
    Rng rng(31);
    for (int trial = 0; trial < 15; ++trial) {
        const auto c1 = random_spd_component(rng, 2);
        const auto c2 = random_spd_component(rng, 2);
        const auto ab = optimal_separation(c1, c2, 0.05);
        const auto ba = optimal_separation(c2, c1, 0.05);
        CHECK(std::fabs(ab.j_star - ba.j_star) <= 1e-8);
        CHECK(ab.j_star >= -1.0);
        CHECK(ab.j_star <= 1.0);
    }
}

TEST_CASE("optimal_separation never below its starting directions", "[separation]") {
    Rng rng(71);
    for (int trial = 0; trial < 15; ++trial) {
        const auto c1 = random_spd_component(rng, 3);
        const auto c2 = random_spd_component(rng, 3);
        const Eigen::VectorXd delta = c2.mean - c1.mean;
        if (delta.norm() < 1e-9) continue;
        const auto r = optimal_separation(c1, c2, 0.05);
        const Eigen::VectorXd start_a = delta.normalized();
        const Eigen::VectorXd start_b =
            (c1.covariance + c2.covariance).llt().solve(delta).normalized();
        CHECK(r.j_star >= j_index(start_a, c1, c2, 0.05) - 1e-12);
        CHECK(r.j_star >= j_index(start_b, c1, c2, 0.05) - 1e-12);
    }
}

TEST_CASE("optimal_separation strictly monotone in the 1-D gap", "[separation]") {
    double prev = -2.0;
    for (int i = 0; i < 20; ++i) {
        const double gap = 0.5 + 0.75 * i;
        const auto r = optimal_separation(comp1d(0, 1), comp1d(gap, 1), 0.05);
        CHECK(r.j_star > prev);
        CHECK(r.j_star == Catch::Approx(j_1d_expected(gap, 0.05)).margin(1e-9));
        prev = r.j_star;
    }
}

TEST_CASE("well-separated threshold semantics near gap 6", "[separation]") {
    // 6 sigma apart scores just under 0.21 (0.2097); the 0.21 rule of thumb
    // holds from gap 6.02 upward
    const auto at6 = optimal_separation(comp1d(0, 1), comp1d(6.0, 1), 0.05);
    CHECK(at6.j_star > 0.209);
    CHECK(at6.j_star == Catch::Approx(0.20969).margin(1e-4));
    for (double gap : {6.1, 7.0, 9.0})
        CHECK(optimal_separation(comp1d(0, 1), comp1d(gap, 1), 0.05).j_star > 0.21);
}

TEST_CASE("optimal_separation finds a better-than-naive direction", "[separation]") {
    // anisotropic covariances make the mean direction suboptimal
    Eigen::Matrix2d stretched;
    stretched << 25.0, 0.0, 0.0, 0.25;
    const auto c1 = comp2d(0, 0, stretched);
    const auto c2 = comp2d(4, 4, stretched);
    const auto r = optimal_separation(c1, c2, 0.05);
    Eigen::VectorXd naive = Eigen::Vector2d(1, 1).normalized();
    CHECK(r.j_star >= j_index(naive, c1, c2, 0.05) + 1e-3);
}
