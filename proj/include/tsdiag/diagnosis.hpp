#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsdiag/common.hpp"
#include "tsdiag/dataset.hpp"
#include "tsdiag/gmm.hpp"
#include "tsdiag/neighbors.hpp"
#include "tsdiag/separation.hpp"

namespace tsdiag {

enum class Level { Low, High, Unknown };

inline const char* to_string(Level l) {
    switch (l) {
        case Level::Low: return "Low";
        case Level::High: return "High";
        case Level::Unknown: return "Unknown";
    }
    return "?";
}

enum class DistanceKind { Euclidean, Manhattan, Mahalanobis };

inline const char* to_string(DistanceKind d) {
    switch (d) {
        case DistanceKind::Euclidean: return "euclidean";
        case DistanceKind::Manhattan: return "manhattan";
        case DistanceKind::Mahalanobis: return "mahalanobis";
    }
    return "?";
}

inline DistanceKind parse_distance(const std::string& name) {
    if (name == "euclidean") return DistanceKind::Euclidean;
    if (name == "manhattan") return DistanceKind::Manhattan;
    if (name == "mahalanobis") return DistanceKind::Mahalanobis;
    throw ValidationError("unknown distance: " + name);
}

/// Square subclass matrix: counts on the diagonal, between-subclass IR above,
/// separation index J* (or Unknown) below.
struct IROMatrix {
    std::vector<std::string> subclass_order;
    std::vector<std::size_t> diagonal;
    std::vector<std::vector<double>> upper_ir;                 // used for i < j
    std::vector<std::vector<std::optional<double>>> lower_j;   // used for i > j
    std::vector<std::string> warnings;

    std::optional<double> j_between(std::size_t a, std::size_t b) const {
        if (a == b) return std::nullopt;
        return lower_j[std::max(a, b)][std::min(a, b)];
    }
    double ir_between(std::size_t a, std::size_t b) const {
        return upper_ir[std::min(a, b)][std::max(a, b)];
    }
};

struct SubclassNoiseRow {
    std::string subclass;
    std::size_t instances = 0, valid = 0, noise = 0, noise_overlap = 0, noise_label = 0;
};

struct ClassNoise {
    std::size_t noise = 0, valid = 0;
};

struct NoiseReport {
    std::vector<std::string> subclass_order;
    std::vector<std::vector<std::size_t>> noise_matrix;   // rows actual, cols 3-NN estimated
    ClassNoise negative, positive;
    std::vector<SubclassNoiseRow> per_subclass;
    std::optional<double> nr, nor, nlr;   // valid-to-noise ratios; empty = Undefined
    std::vector<std::string> warnings;
};

struct DispersionEntry {
    double mean = 0.0;
    double std = 0.0;
};

struct SubclassDispersion {
    std::string subclass;
    DispersionEntry euclidean, manhattan;
    std::optional<DispersionEntry> mahalanobis;   // empty if the covariance is unusable
};

/// One-way ANOVA on distances to subclass medians with a permutation p-value.
struct AndersonTable {
    std::size_t df_between = 0, df_within = 0;
    double ss_between = 0.0, ss_within = 0.0;
    double ms_between = 0.0, ms_within = 0.0;
    double f = 0.0;
    std::size_t n_perm = 0;
    double p_value = 1.0;
};

struct DDPProfile {
    Level ir_level = Level::Low;
    Level disjunct_level = Level::Low;
    Level overlap_level = Level::Low;
};

struct ClassDetection {
    std::string model_name;
    std::size_t k_subclasses = 0;
    double bic = 0.0;
    double log_likelihood = 0.0;
    std::size_t instances = 0;
    std::vector<std::string> fit_failures;
};

struct DiagnosticReport {
    DatasetSummary summary;
    ClassDetection negative, positive;
    SubclassAssignment assignment;
    std::map<std::string, GaussianComponent> components;
    IROMatrix iro;
    NoiseReport noise;
    std::vector<SubclassDispersion> dispersion;
    std::optional<AndersonTable> anderson_negative, anderson_positive;
    DDPProfile ddp;
    std::vector<std::string> warnings;
};

/// Either the full report (S2) or, when a detected subclass falls under
/// C.min, only the subclass membership (S1) for outlier analysis.
struct DiagnosisOutcome {
    SubclassAssignment assignment;
    ClassDetection negative, positive;
    std::optional<DiagnosticReport> report;
    bool early_exit() const { return !report.has_value(); }
};

namespace detail {

inline Eigen::VectorXd coordinate_median(const Eigen::MatrixXd& X) {
    Eigen::VectorXd med(X.cols());
    std::vector<double> col(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) col[static_cast<std::size_t>(i)] = X(i, j);
        std::sort(col.begin(), col.end());
        const std::size_t n = col.size();
        med(j) = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    }
    return med;
}

inline DispersionEntry mean_std(const std::vector<double>& v) {
    DispersionEntry e;
    const double n = static_cast<double>(v.size());
    for (double x : v) e.mean += x;
    e.mean /= n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - e.mean) * (x - e.mean);
        e.std = std::sqrt(ss / (n - 1.0));
    }
    return e;
}

}  // namespace detail

/// Pairwise IR (upper) and optimal separation (lower) between all detected
/// subclasses; projection failures become Unknown entries.
inline IROMatrix build_iro(const SubclassAssignment& assign,
                           const std::map<std::string, GaussianComponent>& components,
                           double alpha) {
    const std::size_t m = assign.subclass_order.size();
    if (m < 2) throw ValidationError("build_iro: need at least 2 subclasses");

    IROMatrix iro;
    iro.subclass_order = assign.subclass_order;
    for (const auto& s : iro.subclass_order) iro.diagonal.push_back(assign.per_subclass_counts.at(s));
    iro.upper_ir.assign(m, std::vector<double>(m, 0.0));
    iro.lower_j.assign(m, std::vector<std::optional<double>>(m, std::nullopt));

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double a = static_cast<double>(iro.diagonal[i]);
            const double b = static_cast<double>(iro.diagonal[j]);
            iro.upper_ir[i][j] = std::max(a, b) / std::min(a, b);
            try {
                const auto sep = optimal_separation(components.at(iro.subclass_order[i]),
                                                    components.at(iro.subclass_order[j]), alpha);
                iro.lower_j[j][i] = sep.j_star;
            } catch (const ProjectionError& e) {
                iro.warnings.push_back("separation " + iro.subclass_order[i] + "/" +
                                       iro.subclass_order[j] + ": " + e.what());
            }
        }
    }
    return iro;
}

/// k-NN noise analysis: neighbors vote by subclass, an instance whose winning
/// subclass sits in the opposite class is noise, attributed to labeling when
/// the pair is well separated (J* >= sp_th) and to overlap otherwise.
inline NoiseReport detect_noise(const Dataset& S, const SubclassAssignment& assign,
                                std::size_t k, const IROMatrix& iro, double sp_th) {
    if (k < 1) throw ValidationError("detect_noise: k must be >= 1");
    if (k >= S.size()) throw ValidationError("detect_noise: k must be smaller than N");

    const std::size_t m = assign.subclass_order.size();
    std::map<std::string, std::size_t> subclass_index;
    for (std::size_t i = 0; i < m; ++i) subclass_index[assign.subclass_order[i]] = i;

    NoiseReport rep;
    rep.subclass_order = assign.subclass_order;
    rep.noise_matrix.assign(m, std::vector<std::size_t>(m, 0));
    rep.per_subclass.resize(m);
    for (std::size_t i = 0; i < m; ++i) rep.per_subclass[i].subclass = assign.subclass_order[i];

    auto class_of_subclass = [&](std::size_t idx) {
        return assign.subclass_order[idx][0] == 'P' ? ClassLabel::Positive : ClassLabel::Negative;
    };

    std::size_t total_noise = 0, total_overlap = 0, total_label = 0;
    bool unknown_warned = false;
    for (std::size_t i = 0; i < S.size(); ++i) {
        const auto nn = knn::nearest_to_row(S.features, i, k);
        std::vector<std::size_t> votes(m, 0);
        for (std::size_t j : nn) ++votes[subclass_index.at(assign.subclass_ids[j])];
        std::size_t winner = subclass_index.at(assign.subclass_ids[nn.front()]);
        for (std::size_t s = 0; s < m; ++s)
            if (votes[s] > votes[winner]) winner = s;

        const std::size_t actual = subclass_index.at(assign.subclass_ids[i]);
        ++rep.noise_matrix[actual][winner];
        auto& row = rep.per_subclass[actual];
        ++row.instances;
        if (class_of_subclass(winner) == S.labels[i]) {
            ++row.valid;
            continue;
        }
        ++row.noise;
        ++total_noise;
        const auto j = iro.j_between(actual, winner);
        if (j && *j >= sp_th) {
            ++row.noise_label;
            ++total_label;
        } else {
            if (!j && !unknown_warned) {
                rep.warnings.push_back(
                    "separation unknown for a noisy pair; counted as overlap noise");
                unknown_warned = true;
            }
            ++row.noise_overlap;
            ++total_overlap;
        }
    }

    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = rep.per_subclass[i];
        auto& cls = class_of_subclass(i) == ClassLabel::Positive ? rep.positive : rep.negative;
        cls.noise += row.noise;
        cls.valid += row.valid;
    }
    const std::size_t total_valid = S.size() - total_noise;
    if (total_noise > 0) rep.nr = static_cast<double>(total_valid) / total_noise;
    if (total_overlap > 0) rep.nor = static_cast<double>(total_valid) / total_overlap;
    if (total_label > 0) rep.nlr = static_cast<double>(total_valid) / total_label;
    return rep;
}

/// Mean and standard deviation of distances to the subclass coordinate-wise
/// median, for Euclidean, Manhattan and (covariance-permitting) Mahalanobis.
inline std::vector<SubclassDispersion> dispersion_stats(const Dataset& S,
                                                        const SubclassAssignment& assign) {
    std::vector<SubclassDispersion> out;
    for (const auto& label : assign.subclass_order) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < S.size(); ++i)
            if (assign.subclass_ids[i] == label) rows.push_back(i);
        if (rows.size() < 2)
            throw ValidationError("dispersion_stats: subclass " + label +
                                  " has fewer than 2 instances");

        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), S.features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            X.row(static_cast<Eigen::Index>(i)) = S.features.row(static_cast<Eigen::Index>(rows[i]));
        const Eigen::VectorXd med = detail::coordinate_median(X);

        SubclassDispersion d;
        d.subclass = label;
        std::vector<double> de, dm;
        de.reserve(rows.size());
        dm.reserve(rows.size());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const Eigen::VectorXd diff = X.row(i).transpose() - med;
            de.push_back(diff.norm());
            dm.push_back(diff.lpNorm<1>());
        }
        d.euclidean = detail::mean_std(de);
        d.manhattan = detail::mean_std(dm);

        // Mahalanobis against the subclass's regularized sample covariance
        const Eigen::VectorXd mu = X.colwise().mean();
        const Eigen::MatrixXd centered = X.rowwise() - mu.transpose();
        Eigen::MatrixXd cov =
            centered.transpose() * centered / static_cast<double>(rows.size() - 1);
        const double ridge = std::max(1e-10, 1e-6 * cov.diagonal().mean());
        cov += ridge * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
            std::vector<double> dma;
            dma.reserve(rows.size());
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const Eigen::VectorXd y = llt.matrixL().solve(X.row(i).transpose() - med);
                dma.push_back(y.norm());
            }
            d.mahalanobis = detail::mean_std(dma);
        }
        out.push_back(std::move(d));
    }
    return out;
}

namespace detail {

inline double anova_f(const std::vector<double>& values, const std::vector<std::size_t>& group,
                      std::size_t g, double& ssb, double& ssw) {
    std::vector<double> sum(g, 0.0);
    std::vector<std::size_t> cnt(g, 0);
    double grand = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum[group[i]] += values[i];
        ++cnt[group[i]];
        grand += values[i];
    }
    grand /= static_cast<double>(values.size());
    ssb = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
        const double mean = sum[j] / static_cast<double>(cnt[j]);
        ssb += static_cast<double>(cnt[j]) * (mean - grand) * (mean - grand);
    }
    ssw = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double mean = sum[group[i]] / static_cast<double>(cnt[group[i]]);
        ssw += (values[i] - mean) * (values[i] - mean);
    }
    const double df_b = static_cast<double>(g - 1);
    const double df_w = static_cast<double>(values.size() - g);
    if (ssw <= 0.0) return ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return (ssb / df_b) / (ssw / df_w);
}

}  // namespace detail

/// Permutation test for homogeneity of subclass dispersions within one class:
/// one-way ANOVA F on distances to subclass medians, p-value from seeded
/// label permutations.
inline AndersonTable permdisp_class(const Dataset& S, const SubclassAssignment& assign,
                                    ClassLabel cls, std::size_t n_perm, std::uint64_t seed,
                                    DistanceKind dist = DistanceKind::Euclidean) {
    if (n_perm < 99) throw ValidationError("permdisp: n_perm must be >= 99");

    const char prefix = cls == ClassLabel::Positive ? 'P' : 'N';
    std::vector<std::string> groups;
    for (const auto& s : assign.subclass_order)
        if (s[0] == prefix) groups.push_back(s);
    if (groups.size() < 2)
        throw ValidationError("permdisp: class needs at least 2 subclasses");

    std::vector<double> values;
    std::vector<std::size_t> group_of;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < S.size(); ++i)
            if (assign.subclass_ids[i] == groups[g]) rows.push_back(i);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), S.features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            X.row(static_cast<Eigen::Index>(i)) = S.features.row(static_cast<Eigen::Index>(rows[i]));
        const Eigen::VectorXd med = detail::coordinate_median(X);

        std::optional<Eigen::LLT<Eigen::MatrixXd>> llt;
        if (dist == DistanceKind::Mahalanobis) {
            const Eigen::VectorXd mu = X.colwise().mean();
            const Eigen::MatrixXd centered = X.rowwise() - mu.transpose();
            Eigen::MatrixXd cov = centered.transpose() * centered /
                                  std::max(1.0, static_cast<double>(rows.size() - 1));
            cov += std::max(1e-10, 1e-6 * cov.diagonal().mean()) *
                   Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
            llt.emplace(cov);
            if (llt->info() != Eigen::Success)
                throw ValidationError("permdisp: singular subclass covariance");
        }
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const Eigen::VectorXd diff = X.row(i).transpose() - med;
            double v;
            switch (dist) {
                case DistanceKind::Manhattan: v = diff.lpNorm<1>(); break;
                case DistanceKind::Mahalanobis: v = llt->matrixL().solve(diff).norm(); break;
                default: v = diff.norm();
            }
            values.push_back(v);
            group_of.push_back(g);
        }
    }

    AndersonTable t;
    t.df_between = groups.size() - 1;
    t.df_within = values.size() - groups.size();
    t.n_perm = n_perm;
    t.f = detail::anova_f(values, group_of, groups.size(), t.ss_between, t.ss_within);
    t.ms_between = t.ss_between / static_cast<double>(t.df_between);
    t.ms_within = t.df_within > 0 ? t.ss_within / static_cast<double>(t.df_within) : 0.0;

    Rng rng(seed);
    std::size_t at_least = 0;
    std::vector<std::size_t> perm = group_of;
    for (std::size_t p = 0; p < n_perm; ++p) {
        rng.shuffle(perm);
        double sb, sw;
        const double fp = detail::anova_f(values, perm, groups.size(), sb, sw);
        if (fp >= t.f) ++at_least;
    }
    t.p_value = static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
    return t;
}

/// Criticality levels: IR <= 10 Low, total subclasses <= 10 Low, and overlap
/// High only when NOR exceeds 0.1 (Unknown when any projection failed).
inline DDPProfile ddp_profile(const DatasetSummary& summary, const SubclassAssignment& assign,
                              const NoiseReport& noise, bool overlap_known) {
    DDPProfile p;
    p.ir_level = summary.imbalance_ratio <= 10.0 ? Level::Low : Level::High;
    p.disjunct_level = assign.subclass_order.size() <= 10 ? Level::Low : Level::High;
    if (!overlap_known)
        p.overlap_level = Level::Unknown;
    else if (noise.nor && *noise.nor > 0.1)
        p.overlap_level = Level::High;
    else
        p.overlap_level = Level::Low;
    return p;
}

struct DiagnoseParams {
    std::size_t k = 3;          // neighbors for the noise rule
    std::size_t c_min = 0;      // 0 = auto (D + 2)
    std::size_t g_max = 9;
    double sp_th = 0.2;
    double alpha = 0.05;
    DistanceKind dist = DistanceKind::Euclidean;   // distance for the dispersion test
    bool standardize = true;
    std::uint64_t seed = 0;
    std::size_t n_perm = 999;
    std::vector<CovarianceModel> models = required_covariance_models();
    EmOptions em;
    unsigned threads = 1;
};

/// Algorithm-style diagnosis: subclass detection per class, then the IRO
/// matrix, noise analysis, dispersion statistics and DDP. Returns only the
/// subclass membership when some detected subclass falls under C.min.
inline DiagnosisOutcome diagnose(const Dataset& input, const DiagnoseParams& params) {
    const DatasetSummary summary = summarize(input);   // validates both classes non-empty
    const std::size_t c_min = params.c_min > 0 ? params.c_min : input.dimensions() + 2;
    if (input.size() < 2 * c_min)
        throw ValidationError("diagnose: need at least 2*C_min instances");

    const Dataset S = params.standardize ? standardize(input) : input;

    DiagnosisOutcome outcome;
    outcome.assignment.subclass_ids.resize(S.size());

    std::map<std::string, GaussianComponent> components;
    bool meets = true;
    for (ClassLabel cls : {ClassLabel::Negative, ClassLabel::Positive}) {
        const char prefix = cls == ClassLabel::Positive ? 'P' : 'N';
        const auto rows = S.indices_of(cls);
        const Eigen::MatrixXd X = S.class_matrix(cls);

        SelectOptions sopts;
        sopts.em = params.em;
        sopts.threads = params.threads;
        const auto sel =
            select_model(X, params.g_max, params.models, c_min,
                         derive_seed(params.seed, std::string("gmm/") + prefix), sopts);

        auto& det = cls == ClassLabel::Positive ? outcome.positive : outcome.negative;
        det.model_name = to_string(sel.model.model);
        det.k_subclasses = sel.model.K();
        det.bic = sel.model.bic;
        det.log_likelihood = sel.model.log_likelihood;
        det.instances = rows.size();
        det.fit_failures = sel.failures;
        if (!sel.meets_min_count) meets = false;

        // relabel components by descending size for stable subclass names
        const auto hard = sel.model.hard_assignment();
        const auto counts = sel.model.hard_counts();
        std::vector<std::size_t> order(sel.model.K());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return counts[a] > counts[b];
        });
        std::vector<std::size_t> rank(order.size());
        for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

        for (std::size_t r = 0; r < order.size(); ++r) {
            char buf[24];
            std::snprintf(buf, sizeof(buf), "%c-%02u", prefix, static_cast<unsigned>(r + 1));
            outcome.assignment.subclass_order.push_back(buf);
            outcome.assignment.per_subclass_counts[buf] = counts[order[r]];
            components[buf] = sel.model.components[order[r]];
            if (counts[order[r]] < c_min) meets = false;
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            char buf[24];
            std::snprintf(buf, sizeof(buf), "%c-%02u", prefix,
                          static_cast<unsigned>(rank[hard[i]] + 1));
            outcome.assignment.subclass_ids[rows[i]] = buf;
        }
    }

    // N-xx labels were appended before P-xx because Negative is iterated first
    if (!meets) return outcome;

    DiagnosticReport rep;
    rep.summary = summary;
    rep.negative = outcome.negative;
    rep.positive = outcome.positive;
    rep.assignment = outcome.assignment;
    rep.components = components;

    rep.iro = build_iro(outcome.assignment, components, params.alpha);
    for (const auto& w : rep.iro.warnings) rep.warnings.push_back(w);

    rep.noise = detect_noise(S, outcome.assignment, params.k, rep.iro, params.sp_th);
    for (const auto& w : rep.noise.warnings) rep.warnings.push_back(w);

    rep.dispersion = dispersion_stats(S, outcome.assignment);
    if (outcome.negative.k_subclasses >= 2)
        rep.anderson_negative =
            permdisp_class(S, outcome.assignment, ClassLabel::Negative, params.n_perm,
                           derive_seed(params.seed, "perm/N"), params.dist);
    if (outcome.positive.k_subclasses >= 2)
        rep.anderson_positive =
            permdisp_class(S, outcome.assignment, ClassLabel::Positive, params.n_perm,
                           derive_seed(params.seed, "perm/P"), params.dist);

    bool overlap_known = true;
    const std::size_t m = outcome.assignment.subclass_order.size();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (!rep.iro.j_between(i, j)) overlap_known = false;
    rep.ddp = ddp_profile(summary, outcome.assignment, rep.noise, overlap_known);

    for (const auto& f : outcome.negative.fit_failures)
        rep.warnings.push_back("Negative class fit skipped: " + f);
    for (const auto& f : outcome.positive.fit_failures)
        rep.warnings.push_back("Positive class fit skipped: " + f);

    outcome.report = std::move(rep);
    return outcome;
}

}  // namespace tsdiag
