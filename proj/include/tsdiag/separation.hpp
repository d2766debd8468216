#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstddef>

#include "tsdiag/common.hpp"
#include "tsdiag/gmm.hpp"
#include "tsdiag/special.hpp"

namespace tsdiag {

/// Result of the 1-D projection search between two Gaussian components.
struct SeparationResult {
    double j_star = -1.0;          // in [-1, 1]; negative = overlap, 0 = touching
    Eigen::VectorXd direction;     // unit projection vector
    double alpha = 0.05;
    bool converged = false;
    std::size_t iterations = 0;
};

namespace detail {

// Raw index value; assumes validated inputs. The sign of a is chosen so the
// projected means are ordered, making the value symmetric in the components.
inline double j_value(const Eigen::VectorXd& a, const Eigen::VectorXd& mu1,
                      const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                      const Eigen::MatrixXd& s2, double q) {
    const double t = std::fabs(a.dot(mu2 - mu1));
    const double spread = q * (std::sqrt(std::max(0.0, a.dot(s1 * a))) +
                               std::sqrt(std::max(0.0, a.dot(s2 * a))));
    const double den = t + spread;
    if (den <= 0.0) return -1.0;
    return (t - spread) / den;
}

inline void check_spd(const Eigen::MatrixXd& s, const char* which) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw ProjectionError(std::string("projection unavailable: covariance of ") + which +
                              " component is not positive definite");
}

}  // namespace detail

/// Separation index along a fixed direction. -1 marks full overlap, 0 two
/// touching components, positive values a genuine gap.
inline double j_index(const Eigen::VectorXd& a, const GaussianComponent& c1,
                      const GaussianComponent& c2, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw ValidationError("j_index: alpha must be in (0, 0.5)");
    if (a.size() != c1.mean.size() || a.size() != c2.mean.size())
        throw ValidationError("j_index: dimension mismatch");
    if (a.norm() == 0.0) throw ValidationError("j_index: direction must be nonzero");
    detail::check_spd(c1.covariance, "first");
    detail::check_spd(c2.covariance, "second");
    const double q = normal_quantile(1.0 - alpha / 2.0);
    return detail::j_value(a, c1.mean, c1.covariance, c2.mean, c2.covariance, q);
}

/// Maximize the separation index over projection directions. Starts from both
/// (S1+S2)^-1 (mu2-mu1) and (mu2-mu1), refines with Newton steps on numerical
/// derivatives, and falls back to backtracking gradient ascent whenever the
/// Hessian is not negative definite.
inline SeparationResult optimal_separation(const GaussianComponent& c1,
                                           const GaussianComponent& c2, double alpha = 0.05,
                                           std::size_t max_iter = 200) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw ValidationError("optimal_separation: alpha must be in (0, 0.5)");
    if (c1.mean.size() != c2.mean.size())
        throw ValidationError("optimal_separation: dimension mismatch");
    detail::check_spd(c1.covariance, "first");
    detail::check_spd(c2.covariance, "second");

    const Eigen::Index D = c1.mean.size();
    const double q = normal_quantile(1.0 - alpha / 2.0);
    const Eigen::VectorXd delta = c2.mean - c1.mean;

    SeparationResult result;
    result.alpha = alpha;

    auto J = [&](const Eigen::VectorXd& a) {
        return detail::j_value(a, c1.mean, c1.covariance, c2.mean, c2.covariance, q);
    };

    if (delta.norm() == 0.0) {
        // every direction scores -1; report the axis along which the two
        // shapes differ most, or e1 for identical components
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(D);
        dir(0) = 1.0;
        const bool same_cov = (c1.covariance - c2.covariance).cwiseAbs().maxCoeff() <= 1e-12;
        if (!same_cov) {
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(c2.covariance,
                                                                          c1.covariance);
            const auto& vals = ges.eigenvalues();
            Eigen::Index pick = 0;
            double extreme = -1.0;
            for (Eigen::Index i = 0; i < vals.size(); ++i) {
                const double e = std::fabs(std::log(std::max(vals(i), 1e-300)));
                if (e > extreme) {
                    extreme = e;
                    pick = i;
                }
            }
            dir = ges.eigenvectors().col(pick).normalized();
        }
        result.j_star = J(dir);
        result.direction = dir;
        result.converged = same_cov;
        return result;
    }

    const double h = 1e-5;
    auto gradient = [&](const Eigen::VectorXd& a) {
        Eigen::VectorXd g(D);
        Eigen::VectorXd e = a;
        for (Eigen::Index i = 0; i < D; ++i) {
            e(i) = a(i) + h;
            const double up = J(e);
            e(i) = a(i) - h;
            const double dn = J(e);
            e(i) = a(i);
            g(i) = (up - dn) / (2.0 * h);
        }
        return g;
    };
    auto hessian = [&](const Eigen::VectorXd& a, double j0) {
        Eigen::MatrixXd H(D, D);
        Eigen::VectorXd e = a;
        for (Eigen::Index i = 0; i < D; ++i) {
            e(i) = a(i) + h;
            const double up = J(e);
            e(i) = a(i) - h;
            const double dn = J(e);
            e(i) = a(i);
            H(i, i) = (up - 2.0 * j0 + dn) / (h * h);
            for (Eigen::Index j = i + 1; j < D; ++j) {
                Eigen::VectorXd f = a;
                f(i) += h; f(j) += h;
                const double pp = J(f);
                f(j) -= 2.0 * h;
                const double pm = J(f);
                f(i) -= 2.0 * h;
                const double mm = J(f);
                f(j) += 2.0 * h;
                const double mp = J(f);
                H(i, j) = H(j, i) = (pp - pm - mp + mm) / (4.0 * h * h);
            }
        }
        return H;
    };

    Eigen::VectorXd start_a = delta.normalized();
    Eigen::LLT<Eigen::MatrixXd> pooled((c1.covariance + c2.covariance).eval());
    Eigen::VectorXd start_b = pooled.solve(delta);
    if (start_b.norm() > 0.0) start_b.normalize();
    else start_b = start_a;

    Eigen::VectorXd best_dir = start_a;
    double best_j = J(start_a);
    bool best_converged = false;
    std::size_t total_iters = 0;

    for (const Eigen::VectorXd& start : {start_b, start_a}) {
        Eigen::VectorXd a = start;
        double j_cur = J(a);
        bool converged = false;
        std::size_t iters = 0;
        while (iters < max_iter) {
            ++iters;
            const Eigen::VectorXd g = gradient(a);
            if (g.norm() < 1e-8) {
                converged = true;
                break;
            }
            Eigen::VectorXd step;
            bool have_newton = false;
            if (D > 1) {
                const Eigen::MatrixXd H = hessian(a, j_cur);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
                if (es.info() == Eigen::Success && es.eigenvalues().maxCoeff() < -1e-12) {
                    step = -H.ldlt().solve(g);
                    have_newton = step.allFinite();
                }
            }
            double improved = -1.0;
            Eigen::VectorXd next;
            for (int attempt = 0; attempt < (have_newton ? 2 : 1) && improved < 0.0; ++attempt) {
                Eigen::VectorXd dir = (attempt == 0 && have_newton) ? step : g;
                double t = 1.0;
                for (int bs = 0; bs < 50; ++bs) {
                    Eigen::VectorXd cand = a + t * dir;
                    if (cand.norm() > 0.0) {
                        cand.normalize();
                        const double jc = J(cand);
                        if (jc > j_cur) {
                            improved = jc - j_cur;
                            next = cand;
                            break;
                        }
                    }
                    t *= 0.5;
                }
            }
            if (improved < 0.0) {
                converged = true;   // no ascent direction improves: stationary
                break;
            }
            a = next;
            j_cur += improved;
            if (improved < 1e-12) {
                converged = true;
                break;
            }
        }
        total_iters += iters;
        if (j_cur > best_j || (j_cur == best_j && converged && !best_converged)) {
            best_j = j_cur;
            best_dir = a;
            best_converged = converged;
        }
    }

    result.j_star = best_j;
    result.direction = best_dir;
    result.converged = best_converged;
    result.iterations = total_iters;
    return result;
}

}  // namespace tsdiag
