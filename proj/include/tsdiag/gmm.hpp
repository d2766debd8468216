#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tsdiag/common.hpp"

namespace tsdiag {

/// Covariance-family names in volume/shape/orientation code form
/// (E = equal across components, V = variable, I = identity/axis-aligned).
enum class CovarianceModel {
    EII, VII, EEI, VEI, EVI, VVI, EEE, VVV,   // supported by the EM fitter
    EVE, VEE, VVE, EEV, VEV, EVV              // extended set: recognized, not fitted
};

inline const char* to_string(CovarianceModel m) {
    switch (m) {
        case CovarianceModel::EII: return "EII";
        case CovarianceModel::VII: return "VII";
        case CovarianceModel::EEI: return "EEI";
        case CovarianceModel::VEI: return "VEI";
        case CovarianceModel::EVI: return "EVI";
        case CovarianceModel::VVI: return "VVI";
        case CovarianceModel::EEE: return "EEE";
        case CovarianceModel::VVV: return "VVV";
        case CovarianceModel::EVE: return "EVE";
        case CovarianceModel::VEE: return "VEE";
        case CovarianceModel::VVE: return "VVE";
        case CovarianceModel::EEV: return "EEV";
        case CovarianceModel::VEV: return "VEV";
        case CovarianceModel::EVV: return "EVV";
    }
    return "?";
}

inline CovarianceModel parse_covariance_model(const std::string& name) {
    static const std::array<CovarianceModel, 14> all = {
        CovarianceModel::EII, CovarianceModel::VII, CovarianceModel::EEI, CovarianceModel::VEI,
        CovarianceModel::EVI, CovarianceModel::VVI, CovarianceModel::EEE, CovarianceModel::VVV,
        CovarianceModel::EVE, CovarianceModel::VEE, CovarianceModel::VVE, CovarianceModel::EEV,
        CovarianceModel::VEV, CovarianceModel::EVV};
    for (auto m : all)
        if (name == to_string(m)) return m;
    throw ValidationError("unknown covariance model name: " + name);
}

/// The eight families with closed-form (or short fixed-point) M-steps.
inline const std::vector<CovarianceModel>& required_covariance_models() {
    static const std::vector<CovarianceModel> models = {
        CovarianceModel::EII, CovarianceModel::VII, CovarianceModel::EEI, CovarianceModel::VEI,
        CovarianceModel::EVI, CovarianceModel::VVI, CovarianceModel::EEE, CovarianceModel::VVV};
    return models;
}

inline bool em_supports(CovarianceModel m) {
    for (auto r : required_covariance_models())
        if (r == m) return true;
    return false;
}

namespace detail {

enum class Contour { Spherical, Diagonal, Full };

struct FamilyTraits {
    bool volume_variable;
    bool shape_variable;
    bool orientation_variable;
    Contour contour;
};

inline FamilyTraits family_traits(CovarianceModel m) {
    switch (m) {
        case CovarianceModel::EII: return {false, false, false, Contour::Spherical};
        case CovarianceModel::VII: return {true, false, false, Contour::Spherical};
        case CovarianceModel::EEI: return {false, false, false, Contour::Diagonal};
        case CovarianceModel::VEI: return {true, false, false, Contour::Diagonal};
        case CovarianceModel::EVI: return {false, true, false, Contour::Diagonal};
        case CovarianceModel::VVI: return {true, true, false, Contour::Diagonal};
        case CovarianceModel::EEE: return {false, false, false, Contour::Full};
        case CovarianceModel::EVE: return {false, true, false, Contour::Full};
        case CovarianceModel::VEE: return {true, false, false, Contour::Full};
        case CovarianceModel::VVE: return {true, true, false, Contour::Full};
        case CovarianceModel::EEV: return {false, false, true, Contour::Full};
        case CovarianceModel::VEV: return {true, false, true, Contour::Full};
        case CovarianceModel::EVV: return {false, true, true, Contour::Full};
        case CovarianceModel::VVV: return {true, true, true, Contour::Full};
    }
    throw ValidationError("unhandled covariance model");
}

}  // namespace detail

/// Number of free parameters: (K-1) mixing weights, K*D means, plus the
/// volume/shape/orientation scalars of the covariance family.
inline std::size_t count_free_params(CovarianceModel m, std::size_t D, std::size_t K) {
    if (D < 1 || K < 1) throw ValidationError("count_free_params: D and K must be >= 1");
    const auto t = detail::family_traits(m);
    const std::size_t volume = t.volume_variable ? K : 1;
    std::size_t shape = 0;
    if (t.contour != detail::Contour::Spherical)
        shape = (t.shape_variable ? K : 1) * (D - 1);
    std::size_t orientation = 0;
    if (t.contour == detail::Contour::Full)
        orientation = (t.orientation_variable ? K : 1) * (D * (D - 1) / 2);
    return (K - 1) + K * D + volume + shape + orientation;
}

struct GaussianComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

struct MixtureModel {
    std::vector<GaussianComponent> components;
    CovarianceModel model = CovarianceModel::EII;
    double log_likelihood = 0.0;
    double bic = 0.0;
    Eigen::MatrixXd responsibilities;       // N x K posteriors
    std::vector<double> loglik_history;     // one entry per E-step
    std::size_t iterations = 0;
    bool converged = false;

    std::size_t K() const { return components.size(); }
    std::size_t dimension() const {
        return components.empty() ? 0 : static_cast<std::size_t>(components[0].mean.size());
    }

    /// argmax responsibility per row; distance ties resolve to the lower index.
    std::vector<std::size_t> hard_assignment() const {
        std::vector<std::size_t> a(static_cast<std::size_t>(responsibilities.rows()), 0);
        for (Eigen::Index i = 0; i < responsibilities.rows(); ++i) {
            Eigen::Index best = 0;
            for (Eigen::Index k = 1; k < responsibilities.cols(); ++k)
                if (responsibilities(i, k) > responsibilities(i, best)) best = k;
            a[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
        }
        return a;
    }

    std::vector<std::size_t> hard_counts() const {
        std::vector<std::size_t> counts(K(), 0);
        for (auto k : hard_assignment()) ++counts[k];
        return counts;
    }
};

namespace detail {

inline double log_gaussian_normalizer(const Eigen::LLT<Eigen::MatrixXd>& llt, std::size_t D) {
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixL().rows(); ++i)
        logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (static_cast<double>(D) * std::log(2.0 * M_PI) + logdet);
}

}  // namespace detail

/// log p(x | mixture), evaluated with Cholesky factors; throws on dimension
/// mismatch or a covariance that is not positive definite.
inline double log_density(const Eigen::VectorXd& x, const MixtureModel& m) {
    if (m.components.empty()) throw ValidationError("log_density: empty mixture");
    if (static_cast<std::size_t>(x.size()) != m.dimension())
        throw ValidationError("log_density: dimension mismatch");
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(m.components.size());
    for (const auto& c : m.components) {
        Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
        if (llt.info() != Eigen::Success)
            throw ValidationError("log_density: covariance not positive definite");
        const Eigen::VectorXd y = llt.matrixL().solve(x - c.mean);
        const double t = std::log(c.weight) +
                         detail::log_gaussian_normalizer(llt, m.dimension()) -
                         0.5 * y.squaredNorm();
        terms.push_back(t);
        max_term = std::max(max_term, t);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - max_term);
    return max_term + std::log(s);
}

/// BIC in the maximization convention: log-likelihood minus half the free
/// parameter count times log N.
inline double bic(const MixtureModel& m, std::size_t N) {
    const std::size_t eta = count_free_params(m.model, m.dimension(), m.K());
    return m.log_likelihood - 0.5 * static_cast<double>(eta) * std::log(static_cast<double>(N));
}

namespace detail {

// Constrained covariance M-step. W[k] are responsibility-weighted scatter
// matrices about the component means, nk the responsibility masses. Writes
// into `sigma` (resized by the caller) and returns false on degeneracy.
inline bool family_covariances(CovarianceModel model, const std::vector<Eigen::MatrixXd>& W,
                               const std::vector<double>& nk, double n_total, double ridge,
                               std::vector<Eigen::MatrixXd>& sigma) {
    const std::size_t K = W.size();
    const Eigen::Index D = W[0].rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(D, D);

    auto det_normalized = [&](Eigen::VectorXd v) -> std::optional<Eigen::VectorXd> {
        double log_mean = 0.0;
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            if (!(v(j) > 0.0)) return std::nullopt;
            log_mean += std::log(v(j));
        }
        log_mean /= static_cast<double>(v.size());
        return (v.array() / std::exp(log_mean)).matrix().eval();
    };

    switch (model) {
        case CovarianceModel::EII: {
            double tr = 0.0;
            for (const auto& w : W) tr += w.trace();
            const double lam = tr / (n_total * static_cast<double>(D));
            for (auto& s : sigma) s = lam * I;
            break;
        }
        case CovarianceModel::VII: {
            for (std::size_t k = 0; k < K; ++k) {
                const double lam = W[k].trace() / (nk[k] * static_cast<double>(D));
                sigma[k] = lam * I;
            }
            break;
        }
        case CovarianceModel::EEI: {
            Eigen::VectorXd diag = Eigen::VectorXd::Zero(D);
            for (const auto& w : W) diag += w.diagonal();
            diag /= n_total;
            for (auto& s : sigma) s = diag.asDiagonal();
            break;
        }
        case CovarianceModel::VVI: {
            for (std::size_t k = 0; k < K; ++k)
                sigma[k] = (W[k].diagonal() / nk[k]).asDiagonal();
            break;
        }
        case CovarianceModel::EVI: {
            // shared volume, per-component |B_k| = 1 diagonal shapes
            std::vector<Eigen::VectorXd> bk(K);
            double lam_num = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                Eigen::VectorXd dk = W[k].diagonal();
                for (Eigen::Index j = 0; j < D; ++j) dk(j) = std::max(dk(j), nk[k] * ridge);
                auto norm = det_normalized(dk);
                if (!norm) return false;
                bk[k] = *norm;
                lam_num += (dk.array() / bk[k].array()).sum();
            }
            const double lam = lam_num / (n_total * static_cast<double>(D));
            for (std::size_t k = 0; k < K; ++k) sigma[k] = (lam * bk[k]).asDiagonal();
            break;
        }
        case CovarianceModel::VEI: {
            // per-component volume, shared diagonal shape; short fixed point
            std::vector<Eigen::VectorXd> dk(K);
            for (std::size_t k = 0; k < K; ++k) {
                dk[k] = W[k].diagonal();
                for (Eigen::Index j = 0; j < D; ++j) dk[k](j) = std::max(dk[k](j), nk[k] * ridge);
            }
            Eigen::VectorXd b_raw = Eigen::VectorXd::Zero(D);
            for (const auto& v : dk) b_raw += v;
            auto b = det_normalized(b_raw);
            if (!b) return false;
            std::vector<double> lam(K, 1.0);
            for (int it = 0; it < 50; ++it) {
                double change = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    const double next =
                        (dk[k].array() / b->array()).sum() / (static_cast<double>(D) * nk[k]);
                    change = std::max(change, std::fabs(next - lam[k]) / std::max(1e-300, next));
                    lam[k] = next;
                }
                b_raw.setZero();
                for (std::size_t k = 0; k < K; ++k) b_raw += dk[k] / lam[k];
                auto nb = det_normalized(b_raw);
                if (!nb) return false;
                *b = *nb;
                if (change < 1e-12) break;
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (!(lam[k] > 0.0) || !std::isfinite(lam[k])) return false;
                sigma[k] = (lam[k] * (*b)).asDiagonal();
            }
            break;
        }
        case CovarianceModel::EEE: {
            Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(D, D);
            for (const auto& w : W) sum += w;
            sum /= n_total;
            for (auto& s : sigma) s = sum;
            break;
        }
        case CovarianceModel::VVV: {
            for (std::size_t k = 0; k < K; ++k) sigma[k] = W[k] / nk[k];
            break;
        }
        default:
            return false;   // extended families are not fitted
    }

    for (auto& s : sigma) {
        s += ridge * I;
        s = 0.5 * (s + s.transpose()).eval();
        if (!s.allFinite()) return false;
    }
    return true;
}

// Reused buffers keep the EM inner loop allocation-free across iterations.
struct EmWorkspace {
    Eigen::MatrixXd centered;   // N x D
    Eigen::MatrixXd scaled;     // N x D
    Eigen::MatrixXd log_r;      // N x K
    Eigen::VectorXd row_max;    // N
    Eigen::VectorXd lse;        // N
    Eigen::MatrixXd inv;        // D x D
    Eigen::LLT<Eigen::MatrixXd> llt;
    std::vector<Eigen::MatrixXd> sigma;   // K of D x D
};

// Posterior responsibilities and log-likelihood; resp is written into
// ws.log_r. Returns false on a non-SPD covariance or numeric blowup.
inline bool e_step(const Eigen::MatrixXd& X, const std::vector<GaussianComponent>& comps,
                   EmWorkspace& ws, double& loglik) {
    const Eigen::Index N = X.rows();
    const Eigen::Index K = static_cast<Eigen::Index>(comps.size());
    const std::size_t D = static_cast<std::size_t>(X.cols());
    ws.log_r.resize(N, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto& c = comps[static_cast<std::size_t>(k)];
        ws.llt.compute(c.covariance);
        if (ws.llt.info() != Eigen::Success) return false;
        const double norm = log_gaussian_normalizer(ws.llt, D) + std::log(c.weight);
        ws.inv = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(D),
                                           static_cast<Eigen::Index>(D));
        ws.llt.solveInPlace(ws.inv);
        ws.centered = X.rowwise() - c.mean.transpose();
        ws.scaled.noalias() = ws.centered * ws.inv;
        ws.log_r.col(k) =
            (-0.5 * ws.scaled.cwiseProduct(ws.centered).rowwise().sum().array() + norm)
                .matrix();
    }
    ws.row_max = ws.log_r.rowwise().maxCoeff();
    ws.lse = (ws.row_max.array() +
              (ws.log_r.colwise() - ws.row_max).array().exp().rowwise().sum().log())
                 .matrix();
    ws.log_r = (ws.log_r.colwise() - ws.lse).array().exp().matrix();
    loglik = ws.lse.sum();
    return ws.log_r.allFinite() && std::isfinite(loglik);
}

inline std::vector<std::size_t> kmeanspp_centers(const Eigen::MatrixXd& X, std::size_t K,
                                                 Rng& rng) {
    const std::size_t N = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> centers;
    centers.push_back(rng.uniform_int(N));
    Eigen::VectorXd d2 =
        (X.rowwise() - X.row(static_cast<Eigen::Index>(centers[0]))).rowwise().squaredNorm();
    while (centers.size() < K) {
        const double total = d2.sum();
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_int(N);
        } else {
            const double r = rng.uniform01() * total;
            double acc = 0.0;
            pick = N - 1;
            for (std::size_t i = 0; i < N; ++i) {
                acc += d2(static_cast<Eigen::Index>(i));
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
        const Eigen::VectorXd nd =
            (X.rowwise() - X.row(static_cast<Eigen::Index>(pick))).rowwise().squaredNorm();
        d2 = d2.cwiseMin(nd);
    }
    return centers;
}

}  // namespace detail

struct EmOptions {
    double tol = 1e-8;            // relative log-likelihood change
    std::size_t max_iter = 500;
    std::size_t restarts = 5;     // k-means++ initializations
    double ridge_scale = 1e-6;    // times mean diagonal of the sample covariance
};

/// Fit a K-component mixture with the covariance family held to `model` at
/// every M-step. Deterministic under `seed`. Throws FitError when every
/// restart collapses (vanishing weight or non-SPD covariance).
inline MixtureModel em_fit(const Eigen::MatrixXd& X, std::size_t K, CovarianceModel model,
                           std::uint64_t seed, const EmOptions& opts = {}) {
    const std::size_t N = static_cast<std::size_t>(X.rows());
    const std::size_t D = static_cast<std::size_t>(X.cols());
    if (K < 1) throw ValidationError("em_fit: K must be >= 1");
    if (N < K) throw ValidationError("em_fit: need at least K rows");
    if (!em_supports(model))
        throw FitError(std::string("em_fit: family ") + to_string(model) +
                       " requires an iterative orientation M-step and is not supported");

    // ridge keeps small-subclass covariances invertible
    const Eigen::VectorXd mean = X.colwise().mean();
    double mean_var = 0.0;
    if (N > 1)
        mean_var = (X.rowwise() - mean.transpose()).squaredNorm() /
                   (static_cast<double>(N - 1) * static_cast<double>(D));
    double ridge = opts.ridge_scale * mean_var;
    if (!(ridge > 0.0)) ridge = 1e-10;

    Rng rng(seed);
    std::optional<MixtureModel> best;
    std::string last_failure = "no restarts run";

    for (std::size_t restart = 0; restart < opts.restarts; ++restart) {
        const auto centers = detail::kmeanspp_centers(X, K, rng);
        Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                                     static_cast<Eigen::Index>(K));
        for (std::size_t i = 0; i < N; ++i) {
            std::size_t nearest = 0;
            double bestd = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                const double d = (X.row(static_cast<Eigen::Index>(i)) -
                                  X.row(static_cast<Eigen::Index>(centers[k])))
                                     .squaredNorm();
                if (d < bestd) {
                    bestd = d;
                    nearest = k;
                }
            }
            resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(nearest)) = 1.0;
        }

        MixtureModel fit;
        fit.model = model;
        fit.components.assign(K, {});
        bool failed = false;
        double prev_ll = -std::numeric_limits<double>::infinity();
        std::vector<double> history;
        detail::EmWorkspace ws;
        std::vector<double> nk(K);
        std::vector<Eigen::MatrixXd> W(K);

        for (std::size_t iter = 0; iter < opts.max_iter && !failed; ++iter) {
            // M-step from current responsibilities
            for (std::size_t k = 0; k < K; ++k) {
                const auto col = resp.col(static_cast<Eigen::Index>(k));
                nk[k] = col.sum();
                if (nk[k] < 1e-10) {
                    failed = true;
                    last_failure = "component weight collapsed";
                    break;
                }
                const Eigen::VectorXd mu = (X.transpose() * col) / nk[k];
                ws.centered = X.rowwise() - mu.transpose();
                ws.scaled = ws.centered.array().colwise() * col.array();
                W[k].noalias() = ws.scaled.transpose() * ws.centered;
                fit.components[k].mean = mu;
                fit.components[k].weight = nk[k] / static_cast<double>(N);
            }
            if (failed) break;
            ws.sigma.resize(K);
            if (!detail::family_covariances(model, W, nk, static_cast<double>(N), ridge,
                                            ws.sigma)) {
                failed = true;
                last_failure = "degenerate covariance in M-step";
                break;
            }
            for (std::size_t k = 0; k < K; ++k) fit.components[k].covariance = ws.sigma[k];

            // E-step
            double loglik = 0.0;
            if (!detail::e_step(X, fit.components, ws, loglik)) {
                failed = true;
                last_failure = "covariance not positive definite";
                break;
            }
            std::swap(resp, ws.log_r);
            history.push_back(loglik);
            fit.iterations = iter + 1;
            const double rel = std::fabs(loglik - prev_ll) / std::max(1.0, std::fabs(prev_ll));
            if (iter > 0 && rel < opts.tol) {
                fit.converged = true;
                prev_ll = loglik;
                break;
            }
            prev_ll = loglik;
        }

        if (failed || history.empty()) continue;
        fit.log_likelihood = history.back();
        fit.loglik_history = std::move(history);
        fit.responsibilities = std::move(resp);
        fit.bic = bic(fit, N);
        if (!best || fit.log_likelihood > best->log_likelihood) best = std::move(fit);
    }

    if (!best) throw FitError("em_fit: all restarts failed (" + last_failure + ")");
    return *best;
}

struct SelectionResult {
    MixtureModel model;
    bool meets_min_count = true;       // every component kept >= C_min hard-assigned rows
    std::vector<std::string> failures; // (K, family) cells that could not be fitted
};

struct SelectOptions {
    EmOptions em;
    unsigned threads = 1;
};

/// Grid search over component counts 1..G_max and covariance families,
/// keeping the BIC maximum among fits whose components all hold at least
/// `min_count` hard-assigned instances. Ties break toward fewer free
/// parameters, then smaller K, then the lexicographically smaller family
/// name. When no fit satisfies `min_count`, the unconstrained BIC maximum is
/// returned with meets_min_count = false so callers can route to the
/// outlier-analysis exit.
inline SelectionResult select_model(const Eigen::MatrixXd& X, std::size_t G_max,
                                    const std::vector<CovarianceModel>& models,
                                    std::size_t min_count, std::uint64_t seed,
                                    const SelectOptions& opts = {}) {
    if (X.rows() < 1) throw ValidationError("select_model: empty data");
    if (G_max < 1) throw ValidationError("select_model: G_max must be >= 1");
    if (models.empty()) throw ValidationError("select_model: no models requested");

    struct Cell {
        std::size_t K;
        CovarianceModel model;
        std::optional<MixtureModel> fit;
        std::string failure;
    };
    std::vector<Cell> cells;
    for (std::size_t K = 1; K <= G_max && K <= static_cast<std::size_t>(X.rows()); ++K)
        for (auto m : models) cells.push_back({K, m, std::nullopt, ""});

    parallel_for(cells.size(), opts.threads, [&](std::size_t i) {
        auto& cell = cells[i];
        const std::uint64_t cell_seed =
            derive_seed(seed, std::string(to_string(cell.model)) + "/K=" + std::to_string(cell.K));
        try {
            cell.fit = em_fit(X, cell.K, cell.model, cell_seed, opts.em);
        } catch (const std::exception& e) {
            cell.failure = std::string("K=") + std::to_string(cell.K) + " " +
                           to_string(cell.model) + ": " + e.what();
        }
    });

    const std::size_t D = static_cast<std::size_t>(X.cols());
    auto better = [&](const Cell& a, const Cell& b) {
        // true when a should replace b
        if (a.fit->bic != b.fit->bic) return a.fit->bic > b.fit->bic;
        const auto ea = count_free_params(a.model, D, a.K);
        const auto eb = count_free_params(b.model, D, b.K);
        if (ea != eb) return ea < eb;
        if (a.K != b.K) return a.K < b.K;
        return std::string(to_string(a.model)) < to_string(b.model);
    };

    SelectionResult result;
    const Cell* best_ok = nullptr;
    const Cell* best_any = nullptr;
    for (const auto& cell : cells) {
        if (!cell.fit) {
            result.failures.push_back(cell.failure);
            continue;
        }
        if (!best_any || better(cell, *best_any)) best_any = &cell;
        bool passes = true;
        for (auto c : cell.fit->hard_counts())
            if (c < min_count) passes = false;
        if (passes && (!best_ok || better(cell, *best_ok))) best_ok = &cell;
    }

    if (!best_any) throw FitError("select_model: all fits failed");
    if (best_ok) {
        result.model = best_ok->fit.value();
        result.meets_min_count = true;
    } else {
        result.model = best_any->fit.value();
        result.meets_min_count = false;
    }
    return result;
}

}  // namespace tsdiag
