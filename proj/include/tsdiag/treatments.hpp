#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tsdiag/common.hpp"
#include "tsdiag/dataset.hpp"
#include "tsdiag/neighbors.hpp"

namespace tsdiag {

enum class ProvenanceKind { Original, Synthetic };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::Original;
    std::size_t source_row = 0;   // input row this output row came from / was seeded by
};

struct ClassCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;
};

struct ResampledDataset {
    Dataset data;
    std::vector<Provenance> provenance;                          // one per output row
    std::vector<std::pair<std::size_t, std::string>> removed;    // input row -> reason
    ClassCounts before, after;
    std::vector<std::string> warnings;

    std::size_t synthetic_count() const {
        std::size_t n = 0;
        for (const auto& p : provenance)
            if (p.kind == ProvenanceKind::Synthetic) ++n;
        return n;
    }
};

/// One treatment invocation: a Table-13 style name, its parameter map and a
/// seed for the stochastic ones.
struct TreatmentSpec {
    std::string name;                       // Raw, Random, SMOTE, B-SMOTE, DBSMOTE,
                                            // ADASYN, ENN, NCL, OSS
    std::map<std::string, double> params;
    std::uint64_t seed = 0;
};

namespace detail {

struct SyntheticRow {
    Eigen::VectorXd features;
    std::size_t source_row;
};

inline ClassCounts class_counts(const Dataset& d) {
    return {d.count(ClassLabel::Positive), d.count(ClassLabel::Negative)};
}

// Build the output from kept original rows plus synthetic rows (all Positive
// unless stated otherwise by the caller's synth_label).
inline ResampledDataset assemble(const Dataset& d, std::vector<std::size_t> kept,
                                 const std::vector<SyntheticRow>& synth,
                                 ClassLabel synth_label,
                                 std::vector<std::pair<std::size_t, std::string>> removed,
                                 std::vector<std::string> warnings) {
    std::sort(kept.begin(), kept.end());
    ResampledDataset out;
    out.before = class_counts(d);
    out.removed = std::move(removed);
    out.warnings = std::move(warnings);

    const Eigen::Index D = d.features.cols();
    out.data.features.resize(static_cast<Eigen::Index>(kept.size() + synth.size()), D);
    out.data.feature_names = d.feature_names;
    out.data.id = d.id;
    out.data.labels.reserve(kept.size() + synth.size());
    out.provenance.reserve(kept.size() + synth.size());

    Eigen::Index row = 0;
    for (std::size_t idx : kept) {
        out.data.features.row(row++) = d.features.row(static_cast<Eigen::Index>(idx));
        out.data.labels.push_back(d.labels[idx]);
        out.provenance.push_back({ProvenanceKind::Original, idx});
    }
    for (const auto& s : synth) {
        out.data.features.row(row++) = s.features.transpose();
        out.data.labels.push_back(synth_label);
        out.provenance.push_back({ProvenanceKind::Synthetic, s.source_row});
    }
    out.after = class_counts(out.data);
    return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

// Distances are always computed on standardized features; interpolation and
// row copies happen in the original space (the two agree on convex weights).
inline Eigen::MatrixXd distance_space(const Dataset& d) {
    return apply_standardize(d.features, standardize_params(d.features));
}

// Negative retention shared by Random and SMOTE: perc_under percent of the
// newly added Positive rows. Degenerate or over-large requests clamp to the
// full Negative class with a warning.
inline std::vector<std::size_t> retain_negatives(const Dataset& d, double perc_under,
                                                 std::size_t n_added, Rng& rng,
                                                 std::vector<std::string>& warnings,
                                                 std::vector<std::pair<std::size_t, std::string>>& removed) {
    const auto negatives = d.indices_of(ClassLabel::Negative);
    if (n_added == 0) {
        warnings.push_back("no instances were added; undersampling skipped");
        return negatives;
    }
    const std::size_t requested =
        static_cast<std::size_t>(std::floor(perc_under / 100.0 * static_cast<double>(n_added)));
    if (requested >= negatives.size()) {
        if (requested > negatives.size())
            warnings.push_back("requested Negative retention exceeds available; keeping all");
        return negatives;
    }
    const auto picks = rng.sample_without_replacement(negatives.size(), requested);
    std::vector<bool> keep(negatives.size(), false);
    for (std::size_t p : picks) keep[p] = true;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        if (keep[i])
            kept.push_back(negatives[i]);
        else
            removed.emplace_back(negatives[i], "undersampled");
    }
    return kept;
}

// Majority class among the k nearest neighbors; an exact tie takes the class
// of the closest neighbor.
inline ClassLabel neighbor_vote(const Dataset& d, const std::vector<std::size_t>& neighbors) {
    std::size_t pos = 0;
    for (std::size_t j : neighbors)
        if (d.labels[j] == ClassLabel::Positive) ++pos;
    const std::size_t neg = neighbors.size() - pos;
    if (pos > neg) return ClassLabel::Positive;
    if (neg > pos) return ClassLabel::Negative;
    return d.labels[neighbors.front()];
}

}  // namespace detail

/// Raw: the identity treatment.
inline ResampledDataset raw_treatment(const Dataset& d) {
    return detail::assemble(d, detail::all_indices(d.size()), {}, ClassLabel::Positive, {}, {});
}

/// Naive resampling: duplicate Positives with replacement, then keep
/// perc_under percent (of the duplicates added) of the Negatives.
inline ResampledDataset random_resample(const Dataset& d, double perc_over, double perc_under,
                                        std::uint64_t seed) {
    if (perc_over < 0.0) throw ValidationError("Random: perc_over must be >= 0");
    if (!(perc_under > 0.0)) throw ValidationError("Random: perc_under must be > 0");
    const auto positives = d.indices_of(ClassLabel::Positive);
    const auto negatives = d.indices_of(ClassLabel::Negative);
    if (positives.empty() || negatives.empty())
        throw ValidationError("Random: both classes must be non-empty");

    Rng rng(seed);
    const std::size_t n_new = static_cast<std::size_t>(
        std::floor(perc_over / 100.0 * static_cast<double>(positives.size())));
    std::vector<detail::SyntheticRow> dup;
    dup.reserve(n_new);
    for (std::size_t i = 0; i < n_new; ++i) {
        const std::size_t src = positives[rng.uniform_int(positives.size())];
        dup.push_back({d.features.row(static_cast<Eigen::Index>(src)).transpose(), src});
    }

    std::vector<std::string> warnings;
    std::vector<std::pair<std::size_t, std::string>> removed;
    std::vector<std::size_t> kept =
        detail::retain_negatives(d, perc_under, n_new, rng, warnings, removed);
    kept.insert(kept.end(), positives.begin(), positives.end());
    return detail::assemble(d, std::move(kept), dup, ClassLabel::Positive, std::move(removed),
                            std::move(warnings));
}

/// SMOTE: per-Positive synthetic interpolation toward one of its k Positive
/// nearest neighbors, plus Negative undersampling tied to the synthetic count.
inline ResampledDataset smote(const Dataset& d, double perc_over, double perc_under,
                              std::size_t k, std::uint64_t seed) {
    if (perc_over < 0.0) throw ValidationError("SMOTE: perc_over must be >= 0");
    if (!(perc_under > 0.0)) throw ValidationError("SMOTE: perc_under must be > 0");
    if (k < 1) throw ValidationError("SMOTE: k must be >= 1");
    const auto positives = d.indices_of(ClassLabel::Positive);
    if (positives.size() < k + 1)
        throw ValidationError("SMOTE: needs more than k Positive instances");

    Rng rng(seed);
    const Eigen::MatrixXd Xs = detail::distance_space(d);

    const std::size_t total = static_cast<std::size_t>(
        std::floor(perc_over / 100.0 * static_cast<double>(positives.size())));
    const std::size_t base = total / positives.size();
    const std::size_t rem = total % positives.size();
    std::vector<std::size_t> extra_count(positives.size(), base);
    for (std::size_t p : rng.sample_without_replacement(positives.size(), rem))
        ++extra_count[p];

    std::vector<detail::SyntheticRow> synth;
    synth.reserve(total);
    for (std::size_t pi = 0; pi < positives.size(); ++pi) {
        if (extra_count[pi] == 0) continue;
        const std::size_t src = positives[pi];
        const auto nn = knn::nearest_to_row_among(Xs, src, positives, k);
        for (std::size_t s = 0; s < extra_count[pi]; ++s) {
            const std::size_t nb = nn[rng.uniform_int(nn.size())];
            const double u = rng.uniform01();
            Eigen::VectorXd row =
                d.features.row(static_cast<Eigen::Index>(src)).transpose() +
                u * (d.features.row(static_cast<Eigen::Index>(nb)) -
                     d.features.row(static_cast<Eigen::Index>(src)))
                        .transpose();
            synth.push_back({std::move(row), src});
        }
    }

    std::vector<std::string> warnings;
    std::vector<std::pair<std::size_t, std::string>> removed;
    std::vector<std::size_t> kept =
        detail::retain_negatives(d, perc_under, synth.size(), rng, warnings, removed);
    kept.insert(kept.end(), positives.begin(), positives.end());
    return detail::assemble(d, std::move(kept), synth, ClassLabel::Positive, std::move(removed),
                            std::move(warnings));
}

/// Borderline-SMOTE, type2 flavor: only DANGER Positives (more than half but
/// not all of their C neighbors Negative) emit synthetics - dup_size toward
/// their K Positive neighbors with u ~ U(0,1) and dup_size toward their
/// Negative C-neighbors with u ~ U(0, 0.5).
inline ResampledDataset borderline_smote(const Dataset& d, std::size_t K, std::size_t C,
                                         std::size_t dup_size, std::uint64_t seed) {
    if (K < 1 || C < 1) throw ValidationError("B-SMOTE: K and C must be >= 1");
    const auto positives = d.indices_of(ClassLabel::Positive);
    if (positives.size() < K + 1)
        throw ValidationError("B-SMOTE: needs more than K Positive instances");
    if (d.size() < C + 1)
        throw ValidationError("B-SMOTE: needs more than C instances");

    Rng rng(seed);
    const Eigen::MatrixXd Xs = detail::distance_space(d);
    const auto kept = detail::all_indices(d.size());

    struct Danger {
        std::size_t row;
        std::vector<std::size_t> negative_neighbors;
    };
    std::vector<Danger> danger;
    for (std::size_t src : positives) {
        const auto nn = knn::nearest_to_row(Xs, src, C);
        std::vector<std::size_t> negs;
        for (std::size_t j : nn)
            if (d.labels[j] == ClassLabel::Negative) negs.push_back(j);
        const double m = static_cast<double>(negs.size());
        if (m > static_cast<double>(C) / 2.0 && negs.size() < C)
            danger.push_back({src, std::move(negs)});
    }
    if (danger.empty()) {
        auto out = detail::assemble(d, kept, {}, ClassLabel::Positive, {}, {});
        out.warnings.push_back("no borderline Positive instances; dataset returned unchanged");
        return out;
    }

    std::vector<detail::SyntheticRow> synth;
    for (const auto& dg : danger) {
        const auto pos_nn = knn::nearest_to_row_among(Xs, dg.row, positives, K);
        const auto src_row = d.features.row(static_cast<Eigen::Index>(dg.row));
        for (std::size_t s = 0; s < dup_size; ++s) {
            const std::size_t nb = pos_nn[rng.uniform_int(pos_nn.size())];
            const double u = rng.uniform01();
            Eigen::VectorXd row =
                src_row.transpose() +
                u * (d.features.row(static_cast<Eigen::Index>(nb)) - src_row).transpose();
            synth.push_back({std::move(row), dg.row});
        }
        for (std::size_t s = 0; s < dup_size; ++s) {
            const std::size_t nb = dg.negative_neighbors[rng.uniform_int(dg.negative_neighbors.size())];
            const double u = rng.uniform01() * 0.5;
            Eigen::VectorXd row =
                src_row.transpose() +
                u * (d.features.row(static_cast<Eigen::Index>(nb)) - src_row).transpose();
            synth.push_back({std::move(row), dg.row});
        }
    }
    return detail::assemble(d, kept, synth, ClassLabel::Positive, {}, {});
}

/// ADASYN: the synthetic budget (Neg - Pos) * beta is spread over Positives
/// proportionally to the Negative share of their K-neighborhoods.
inline ResampledDataset adasyn(const Dataset& d, std::size_t K, double beta, std::uint64_t seed) {
    if (K < 1) throw ValidationError("ADASYN: K must be >= 1");
    if (beta < 0.0) throw ValidationError("ADASYN: beta must be >= 0");
    const auto positives = d.indices_of(ClassLabel::Positive);
    const auto negatives = d.indices_of(ClassLabel::Negative);
    if (positives.size() < K + 1)
        throw ValidationError("ADASYN: needs more than K Positive instances");

    const auto kept = detail::all_indices(d.size());
    const double G = beta * (static_cast<double>(negatives.size()) -
                             static_cast<double>(positives.size()));
    if (G <= 0.0) {
        auto out = detail::assemble(d, kept, {}, ClassLabel::Positive, {}, {});
        out.warnings.push_back("classes already balanced; nothing to synthesize");
        return out;
    }

    Rng rng(seed);
    const Eigen::MatrixXd Xs = detail::distance_space(d);
    std::vector<double> r(positives.size(), 0.0);
    double r_total = 0.0;
    for (std::size_t pi = 0; pi < positives.size(); ++pi) {
        const auto nn = knn::nearest_to_row(Xs, positives[pi], K);
        std::size_t neg = 0;
        for (std::size_t j : nn)
            if (d.labels[j] == ClassLabel::Negative) ++neg;
        r[pi] = static_cast<double>(neg) / static_cast<double>(K);
        r_total += r[pi];
    }
    if (r_total <= 0.0) {
        auto out = detail::assemble(d, kept, {}, ClassLabel::Positive, {}, {});
        out.warnings.push_back("no Positive instance has Negative neighbors; nothing to synthesize");
        return out;
    }

    std::vector<detail::SyntheticRow> synth;
    for (std::size_t pi = 0; pi < positives.size(); ++pi) {
        const auto g = static_cast<std::size_t>(std::llround(G * r[pi] / r_total));
        if (g == 0) continue;
        const std::size_t src = positives[pi];
        const auto nn = knn::nearest_to_row_among(Xs, src, positives, K);
        for (std::size_t s = 0; s < g; ++s) {
            const std::size_t nb = nn[rng.uniform_int(nn.size())];
            const double u = rng.uniform01();
            Eigen::VectorXd row =
                d.features.row(static_cast<Eigen::Index>(src)).transpose() +
                u * (d.features.row(static_cast<Eigen::Index>(nb)) -
                     d.features.row(static_cast<Eigen::Index>(src)))
                        .transpose();
            synth.push_back({std::move(row), src});
        }
    }
    return detail::assemble(d, kept, synth, ClassLabel::Positive, {}, {});
}

namespace detail {

struct DbscanResult {
    std::vector<std::ptrdiff_t> cluster;   // -1 = noise, else cluster id
    std::size_t n_clusters = 0;
};

// Classic DBSCAN over the rows listed in `members`; neighborhoods include the
// point itself.
inline DbscanResult dbscan(const Eigen::MatrixXd& Xs, const std::vector<std::size_t>& members,
                           double eps, std::size_t min_pts) {
    const std::size_t n = members.size();
    std::vector<std::vector<std::size_t>> neigh(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double dd = (Xs.row(static_cast<Eigen::Index>(members[i])) -
                               Xs.row(static_cast<Eigen::Index>(members[j])))
                                  .norm();
            if (dd <= eps) neigh[i].push_back(j);
        }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neigh[i].size() >= min_pts;

    DbscanResult res;
    res.cluster.assign(n, -1);
    std::vector<bool> visited(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (visited[i] || !core[i]) continue;
        const auto cid = static_cast<std::ptrdiff_t>(res.n_clusters++);
        std::deque<std::size_t> frontier{i};
        visited[i] = true;
        res.cluster[i] = cid;
        while (!frontier.empty()) {
            const std::size_t cur = frontier.front();
            frontier.pop_front();
            if (!core[cur]) continue;
            for (std::size_t nb : neigh[cur]) {
                if (res.cluster[nb] == -1) res.cluster[nb] = cid;
                if (!visited[nb]) {
                    visited[nb] = true;
                    frontier.push_back(nb);
                }
            }
        }
    }
    return res;
}

}  // namespace detail

/// DBSMOTE: DBSCAN over the Positives, then synthetics sampled uniformly
/// along each member's shortest eps-graph path to the cluster pseudo-centroid.
/// eps defaults (when NaN) to the mean distance to the third Positive
/// neighbor.
inline ResampledDataset dbsmote(const Dataset& d, std::size_t dup_size, double eps,
                                std::size_t min_pts, std::uint64_t seed) {
    const auto positives = d.indices_of(ClassLabel::Positive);
    const auto kept = detail::all_indices(d.size());
    if (positives.empty()) throw ValidationError("DBSMOTE: no Positive instances");

    Rng rng(seed);
    const Eigen::MatrixXd Xs = detail::distance_space(d);

    if (std::isnan(eps)) {
        double total = 0.0;
        std::size_t counted = 0;
        for (std::size_t src : positives) {
            const auto nn = knn::nearest_to_row_among(Xs, src, positives, 3);
            if (nn.empty()) continue;
            const std::size_t far = nn.back();
            total += (Xs.row(static_cast<Eigen::Index>(src)) -
                      Xs.row(static_cast<Eigen::Index>(far)))
                         .norm();
            ++counted;
        }
        eps = counted > 0 ? total / static_cast<double>(counted) : 0.0;
    }
    if (!(eps > 0.0)) {
        auto out = detail::assemble(d, kept, {}, ClassLabel::Positive, {}, {});
        out.warnings.push_back("DBSMOTE: eps is degenerate; dataset returned unchanged");
        return out;
    }

    const auto db = detail::dbscan(Xs, positives, eps, min_pts);
    if (db.n_clusters == 0) {
        auto out = detail::assemble(d, kept, {}, ClassLabel::Positive, {}, {});
        out.warnings.push_back("DBSMOTE: no density cluster found; dataset returned unchanged");
        return out;
    }

    std::vector<detail::SyntheticRow> synth;
    std::vector<std::string> warnings;
    for (std::size_t cid = 0; cid < db.n_clusters; ++cid) {
        std::vector<std::size_t> local;   // indices into `positives`
        for (std::size_t i = 0; i < positives.size(); ++i)
            if (db.cluster[i] == static_cast<std::ptrdiff_t>(cid)) local.push_back(i);

        Eigen::VectorXd mean = Eigen::VectorXd::Zero(Xs.cols());
        for (std::size_t i : local)
            mean += Xs.row(static_cast<Eigen::Index>(positives[i])).transpose();
        mean /= static_cast<double>(local.size());
        std::size_t centroid = local[0];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : local) {
            const double dd =
                (Xs.row(static_cast<Eigen::Index>(positives[i])).transpose() - mean).norm();
            if (dd < best) {
                best = dd;
                centroid = i;
            }
        }

        // Dijkstra from the pseudo-centroid over the eps graph; ties prefer
        // fewer hops, then the lower predecessor index
        const std::size_t m = local.size();
        std::map<std::size_t, std::size_t> pos_in_local;
        for (std::size_t i = 0; i < m; ++i) pos_in_local[local[i]] = i;
        std::vector<std::vector<std::pair<std::size_t, double>>> adj(m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 1; b < m; ++b) {
                const double dd = (Xs.row(static_cast<Eigen::Index>(positives[local[a]])) -
                                   Xs.row(static_cast<Eigen::Index>(positives[local[b]])))
                                      .norm();
                if (dd <= eps) {
                    adj[a].emplace_back(b, dd);
                    adj[b].emplace_back(a, dd);
                }
            }
        const std::size_t c_local = pos_in_local[centroid];
        std::vector<double> dist(m, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> hops(m, 0);
        std::vector<std::ptrdiff_t> pred(m, -1);
        std::vector<bool> done(m, false);
        dist[c_local] = 0.0;
        for (;;) {
            std::ptrdiff_t u = -1;
            for (std::size_t i = 0; i < m; ++i)
                if (!done[i] && std::isfinite(dist[i]) &&
                    (u < 0 || dist[i] < dist[static_cast<std::size_t>(u)]))
                    u = static_cast<std::ptrdiff_t>(i);
            if (u < 0) break;
            const auto uu = static_cast<std::size_t>(u);
            done[uu] = true;
            for (const auto& [v, w] : adj[uu]) {
                const double nd = dist[uu] + w;
                const bool better =
                    nd < dist[v] ||
                    (nd == dist[v] && (hops[uu] + 1 < hops[v] ||
                                       (hops[uu] + 1 == hops[v] &&
                                        (pred[v] < 0 || uu < static_cast<std::size_t>(pred[v])))));
                if (!done[v] && better) {
                    dist[v] = nd;
                    hops[v] = hops[uu] + 1;
                    pred[v] = static_cast<std::ptrdiff_t>(uu);
                }
            }
        }

        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t src = positives[local[i]];
            if (!std::isfinite(dist[i])) {
                warnings.push_back("DBSMOTE: cluster member unreachable; skipped");
                continue;
            }
            // path i -> centroid as row indices
            std::vector<std::size_t> path;
            for (std::ptrdiff_t cur = static_cast<std::ptrdiff_t>(i); cur >= 0;
                 cur = pred[static_cast<std::size_t>(cur)])
                path.push_back(positives[local[static_cast<std::size_t>(cur)]]);
            for (std::size_t s = 0; s < dup_size; ++s) {
                if (path.size() == 1 || dist[i] == 0.0) {
                    synth.push_back(
                        {d.features.row(static_cast<Eigen::Index>(src)).transpose(), src});
                    continue;
                }
                double t = rng.uniform01() * dist[i];
                Eigen::VectorXd row;
                for (std::size_t e = 0; e + 1 < path.size(); ++e) {
                    const auto a = static_cast<Eigen::Index>(path[e]);
                    const auto b = static_cast<Eigen::Index>(path[e + 1]);
                    const double seg = (Xs.row(a) - Xs.row(b)).norm();
                    if (t <= seg || e + 2 == path.size()) {
                        const double f = seg > 0.0 ? std::min(1.0, t / seg) : 0.0;
                        row = d.features.row(a).transpose() +
                              f * (d.features.row(b) - d.features.row(a)).transpose();
                        break;
                    }
                    t -= seg;
                }
                synth.push_back({std::move(row), src});
            }
        }
    }
    return detail::assemble(d, kept, synth, ClassLabel::Positive, {}, std::move(warnings));
}

/// ENN: drop every instance (either class) whose class disagrees with the
/// majority of its k nearest neighbors; all decisions on the original set.
inline ResampledDataset enn(const Dataset& d, std::size_t k) {
    if (d.size() <= k) throw ValidationError("ENN: needs more than k instances");
    const Eigen::MatrixXd Xs = detail::distance_space(d);
    std::vector<std::size_t> kept;
    std::vector<std::pair<std::size_t, std::string>> removed;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto nn = knn::nearest_to_row(Xs, i, k);
        if (detail::neighbor_vote(d, nn) == d.labels[i])
            kept.push_back(i);
        else
            removed.emplace_back(i, "misclassified by k-NN");
    }
    return detail::assemble(d, std::move(kept), {}, ClassLabel::Positive, std::move(removed), {});
}

/// NCL: remove Negatives misclassified by their k-NN, then the Negative
/// neighbors of every misclassified Positive. Positives are never removed.
inline ResampledDataset ncl(const Dataset& d, std::size_t k) {
    if (d.size() <= k) throw ValidationError("NCL: needs more than k instances");
    const Eigen::MatrixXd Xs = detail::distance_space(d);
    std::vector<bool> drop(d.size(), false);
    std::vector<std::string> reason(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto nn = knn::nearest_to_row(Xs, i, k);
        const ClassLabel vote = detail::neighbor_vote(d, nn);
        if (d.labels[i] == ClassLabel::Negative) {
            if (vote != ClassLabel::Negative && !drop[i]) {
                drop[i] = true;
                reason[i] = "misclassified Negative";
            }
        } else if (vote != ClassLabel::Positive) {
            for (std::size_t j : nn)
                if (d.labels[j] == ClassLabel::Negative && !drop[j]) {
                    drop[j] = true;
                    reason[j] = "Negative neighbor of misclassified Positive";
                }
        }
    }
    std::vector<std::size_t> kept;
    std::vector<std::pair<std::size_t, std::string>> removed;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (drop[i])
            removed.emplace_back(i, reason[i]);
        else
            kept.push_back(i);
    }
    return detail::assemble(d, std::move(kept), {}, ClassLabel::Positive, std::move(removed), {});
}

/// OSS: remove the Negative member of every Tomek link, then keep the CNN
/// store grown from all Positives plus one random Negative.
inline ResampledDataset oss(const Dataset& d, std::uint64_t seed) {
    if (d.count(ClassLabel::Positive) < 1 || d.count(ClassLabel::Negative) < 1)
        throw ValidationError("OSS: both classes must be non-empty");
    if (d.size() < 2) throw ValidationError("OSS: needs at least 2 instances");
    const Eigen::MatrixXd Xs = detail::distance_space(d);

    std::vector<std::size_t> nn1(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) nn1[i] = knn::nearest_to_row(Xs, i, 1).front();

    std::vector<bool> removed_flag(d.size(), false);
    std::vector<std::pair<std::size_t, std::string>> removed;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const std::size_t j = nn1[i];
        if (j > i && nn1[j] == i && d.labels[i] != d.labels[j]) {
            const std::size_t neg = d.labels[i] == ClassLabel::Negative ? i : j;
            if (!removed_flag[neg]) {
                removed_flag[neg] = true;
                removed.emplace_back(neg, "Tomek link");
            }
        }
    }

    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!removed_flag[i]) remaining.push_back(i);

    // CNN pass
    Rng rng(seed);
    std::vector<std::size_t> store;
    std::vector<std::size_t> remaining_negatives;
    for (std::size_t i : remaining) {
        if (d.labels[i] == ClassLabel::Positive)
            store.push_back(i);
        else
            remaining_negatives.push_back(i);
    }
    if (!remaining_negatives.empty())
        store.push_back(remaining_negatives[rng.uniform_int(remaining_negatives.size())]);

    std::vector<bool> in_store(d.size(), false);
    for (std::size_t i : store) in_store[i] = true;
    for (std::size_t i : remaining) {
        if (in_store[i]) continue;
        std::vector<std::size_t> current;
        for (std::size_t sidx : remaining)
            if (in_store[sidx]) current.push_back(sidx);
        const auto nn = knn::nearest(
            Xs, Xs.row(static_cast<Eigen::Index>(i)).transpose(), current, 1);
        if (d.labels[nn.front()] != d.labels[i]) in_store[i] = true;
    }

    std::vector<std::size_t> kept;
    for (std::size_t i : remaining) {
        if (in_store[i])
            kept.push_back(i);
        else
            removed.emplace_back(i, "outside CNN store");
    }
    return detail::assemble(d, std::move(kept), {}, ClassLabel::Positive, std::move(removed), {});
}

namespace detail {

inline double param_or(const TreatmentSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

inline double required_param(const TreatmentSpec& spec, const std::string& key) {
    auto it = spec.params.find(key);
    if (it == spec.params.end())
        throw ValidationError(spec.name + ": missing required parameter '" + key + "'");
    return it->second;
}

inline std::size_t count_param(const TreatmentSpec& spec, const std::string& key,
                               double fallback) {
    const double v = param_or(spec, key, fallback);
    if (!(v >= 0.0) || v != std::floor(v))
        throw ValidationError(spec.name + ": parameter '" + key +
                              "' must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

inline void check_param_names(const TreatmentSpec& spec,
                              std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : spec.params) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ValidationError(spec.name + ": unknown parameter '" + key + "'");
    }
}

}  // namespace detail

/// Dispatch a treatment by spec; Raw returns the input unchanged.
inline ResampledDataset apply_treatment(const Dataset& d, const TreatmentSpec& spec) {
    const std::string& n = spec.name;
    if (n == "Raw") {
        detail::check_param_names(spec, {});
        return raw_treatment(d);
    }
    if (n == "Random") {
        detail::check_param_names(spec, {"perc_over", "perc_under"});
        return random_resample(d, detail::required_param(spec, "perc_over"),
                               detail::required_param(spec, "perc_under"), spec.seed);
    }
    if (n == "SMOTE") {
        detail::check_param_names(spec, {"perc_over", "perc_under", "k"});
        return smote(d, detail::required_param(spec, "perc_over"),
                     detail::required_param(spec, "perc_under"),
                     detail::count_param(spec, "k", 3), spec.seed);
    }
    if (n == "B-SMOTE") {
        detail::check_param_names(spec, {"K", "C", "dup_size"});
        return borderline_smote(d, detail::count_param(spec, "K", 3),
                                detail::count_param(spec, "C", 3),
                                detail::count_param(spec, "dup_size", 1), spec.seed);
    }
    if (n == "DBSMOTE") {
        detail::check_param_names(spec, {"dup_size", "eps", "min_pts"});
        return dbsmote(d, detail::count_param(spec, "dup_size", 1),
                       detail::param_or(spec, "eps", std::numeric_limits<double>::quiet_NaN()),
                       detail::count_param(spec, "min_pts", 3), spec.seed);
    }
    if (n == "ADASYN") {
        detail::check_param_names(spec, {"K", "beta"});
        return adasyn(d, detail::count_param(spec, "K", 3), detail::param_or(spec, "beta", 1.0),
                      spec.seed);
    }
    if (n == "ENN") {
        detail::check_param_names(spec, {"k"});
        return enn(d, detail::count_param(spec, "k", 3));
    }
    if (n == "NCL") {
        detail::check_param_names(spec, {"k"});
        return ncl(d, detail::count_param(spec, "k", 3));
    }
    if (n == "OSS") {
        detail::check_param_names(spec, {});
        return oss(d, spec.seed);
    }
    throw ValidationError("unknown treatment name: " + n);
}

inline const std::vector<std::string>& treatment_names() {
    static const std::vector<std::string> names = {"Raw",     "Random", "SMOTE",
                                                   "B-SMOTE", "DBSMOTE", "ADASYN",
                                                   "ENN",     "NCL",    "OSS"};
    return names;
}

}  // namespace tsdiag
