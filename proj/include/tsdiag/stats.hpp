#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tsdiag/common.hpp"
#include "tsdiag/special.hpp"

namespace tsdiag {

enum class Alternative { TwoSided, Greater, Less };

inline const char* to_string(Alternative a) {
    switch (a) {
        case Alternative::TwoSided: return "two-sided";
        case Alternative::Greater: return "greater";
        case Alternative::Less: return "less";
    }
    return "?";
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string method;
    Alternative alternative = Alternative::TwoSided;
    std::size_t n_effective = 0;
    std::string warning;
};

/// Midranks (1-based, ties averaged) of a value vector.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

enum class ExactPolicy { Auto, Exact, Approximate };

/// Paired Wilcoxon signed-rank test. Zero differences are dropped, tied
/// absolute differences get midranks, and the statistic is the positive-rank
/// sum W+. The exact distribution (enumeration over sign assignments via
/// dynamic programming) is used for n <= 25 without ties; otherwise a normal
/// approximation with tie-corrected variance and continuity correction.
inline TestResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y,
                                       Alternative alternative = Alternative::TwoSided,
                                       ExactPolicy policy = ExactPolicy::Auto) {
    if (x.size() != y.size() || x.empty())
        throw ValidationError("wilcoxon_signed_rank: need equal-length nonempty samples");

    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        if (diff != 0.0) d.push_back(diff);
    }

    TestResult r;
    r.alternative = alternative;
    r.n_effective = d.size();
    if (d.empty()) {
        r.method = "wilcoxon-signed-rank";
        r.warning = "all differences are zero";
        return r;
    }

    std::vector<double> abs_d(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::fabs(d[i]);
    const std::vector<double> ranks = average_ranks(abs_d);

    double w_plus = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) w_plus += ranks[i];
    r.statistic = w_plus;

    bool has_ties = false;
    {
        std::vector<double> sorted = abs_d;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 1; i < sorted.size(); ++i)
            if (sorted[i] == sorted[i - 1]) has_ties = true;
    }

    const std::size_t n = d.size();
    const bool exact = policy == ExactPolicy::Exact ||
                       (policy == ExactPolicy::Auto && n <= 25 && !has_ties);
    if (exact && has_ties)
        throw ValidationError("wilcoxon_signed_rank: exact distribution requires untied ranks");
    if (exact && n > 30)
        throw ValidationError("wilcoxon_signed_rank: exact mode limited to n <= 30");

    if (exact) {
        // counts[w] = number of sign assignments with positive-rank sum w
        const std::size_t max_w = n * (n + 1) / 2;
        std::vector<double> counts(max_w + 1, 0.0);
        counts[0] = 1.0;
        for (std::size_t rank = 1; rank <= n; ++rank)
            for (std::size_t w = max_w; w >= rank; --w) counts[w] += counts[w - rank];
        const double total = std::ldexp(1.0, static_cast<int>(n));
        const std::size_t w_obs = static_cast<std::size_t>(std::llround(w_plus));
        double p_ge = 0.0, p_le = 0.0;
        for (std::size_t w = 0; w <= max_w; ++w) {
            if (w >= w_obs) p_ge += counts[w];
            if (w <= w_obs) p_le += counts[w];
        }
        p_ge /= total;
        p_le /= total;
        r.method = "wilcoxon-signed-rank-exact";
        switch (alternative) {
            case Alternative::Greater: r.p_value = p_ge; break;
            case Alternative::Less: r.p_value = p_le; break;
            case Alternative::TwoSided: r.p_value = std::min(1.0, 2.0 * std::min(p_ge, p_le));
        }
        return r;
    }

    // Normal approximation on midranks: mean = sum r / 2, var = sum r^2 / 4
    // (the tie-corrected variance), sharpened with the symmetric Edgeworth
    // kurtosis term so small-n tails stay close to the exact distribution.
    double sum_r = 0.0, sum_r2 = 0.0, sum_r4 = 0.0;
    for (double rk : ranks) {
        sum_r += rk;
        sum_r2 += rk * rk;
        sum_r4 += rk * rk * rk * rk;
    }
    const double mean = sum_r / 2.0;
    const double var = sum_r2 / 4.0;
    if (var <= 0.0) {
        r.method = "wilcoxon-signed-rank-normal";
        r.warning = "zero variance";
        r.p_value = 1.0;
        return r;
    }
    const double sd = std::sqrt(var);
    const double gamma2 = (-sum_r4 / 8.0) / (var * var);   // excess kurtosis
    auto cdf_approx = [&](double w) {
        const double z = (w - mean) / sd;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        const double f = normal_cdf(z) - pdf * gamma2 / 24.0 * (z * z * z - 3.0 * z);
        return std::min(1.0, std::max(0.0, f));
    };
    const double p_greater = 1.0 - cdf_approx(w_plus - 0.5);
    const double p_less = cdf_approx(w_plus + 0.5);
    r.method = "wilcoxon-signed-rank-normal";
    switch (alternative) {
        case Alternative::Greater: r.p_value = p_greater; break;
        case Alternative::Less: r.p_value = p_less; break;
        case Alternative::TwoSided:
            r.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less));
    }
    return r;
}

/// Two-sample Wilcoxon rank-sum (Mann-Whitney) with normal approximation,
/// tie-corrected variance and continuity correction. Used for comparing
/// unpaired groups, e.g. metric values across criticality levels.
inline TestResult wilcoxon_rank_sum(const std::vector<double>& x, const std::vector<double>& y,
                                    Alternative alternative = Alternative::TwoSided) {
    if (x.empty() || y.empty())
        throw ValidationError("wilcoxon_rank_sum: both samples must be nonempty");
    std::vector<double> all = x;
    all.insert(all.end(), y.begin(), y.end());
    const auto ranks = average_ranks(all);
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    double rank_sum_x = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rank_sum_x += ranks[i];
    const double u = rank_sum_x - nx * (nx + 1.0) / 2.0;   // Mann-Whitney U for x

    double tie_term = 0.0;
    {
        std::vector<double> sorted = all;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += (t * t * t - t);
            i = j + 1;
        }
    }
    const double n = nx + ny;
    const double mean = nx * ny / 2.0;
    const double var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));

    TestResult r;
    r.alternative = alternative;
    r.statistic = u;
    r.n_effective = static_cast<std::size_t>(n);
    r.method = "wilcoxon-rank-sum-normal";
    if (var <= 0.0) {
        r.warning = "zero variance";
        r.p_value = 1.0;
        return r;
    }
    const double sd = std::sqrt(var);
    switch (alternative) {
        case Alternative::Greater:
            r.p_value = 1.0 - normal_cdf((u - mean - 0.5) / sd);
            break;
        case Alternative::Less:
            r.p_value = normal_cdf((u - mean + 0.5) / sd);
            break;
        case Alternative::TwoSided: {
            const double z = (std::fabs(u - mean) - 0.5) / sd;
            r.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::max(0.0, z))));
        }
    }
    return r;
}

/// Datasets x treatments score grid with per-row ranks (best = k, ties
/// averaged), the layout consumed by the Friedman test and its post hoc.
struct RankTable {
    std::vector<std::string> row_ids;       // datasets
    std::vector<std::string> column_ids;    // treatments
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<double>> ranks;

    std::size_t n_rows() const { return scores.size(); }
    std::size_t n_cols() const { return column_ids.size(); }

    std::vector<double> mean_ranks() const {
        std::vector<double> m(n_cols(), 0.0);
        for (const auto& row : ranks)
            for (std::size_t j = 0; j < row.size(); ++j) m[j] += row[j];
        for (auto& v : m) v /= static_cast<double>(n_rows());
        return m;
    }
};

/// Rank a score grid per row; with higher_better the best value in a row
/// receives rank k and the worst rank 1.
inline RankTable rank_scores(const std::vector<std::string>& row_ids,
                             const std::vector<std::string>& column_ids,
                             const std::vector<std::vector<double>>& scores,
                             bool higher_better = true) {
    if (scores.size() != row_ids.size())
        throw ValidationError("rank_scores: row count mismatch");
    RankTable rt;
    rt.row_ids = row_ids;
    rt.column_ids = column_ids;
    rt.scores = scores;
    for (const auto& row : scores) {
        if (row.size() != column_ids.size())
            throw ValidationError("rank_scores: column count mismatch");
        std::vector<double> vals = row;
        if (!higher_better)
            for (auto& v : vals) v = -v;
        rt.ranks.push_back(average_ranks(vals));
    }
    return rt;
}

/// Friedman rank test with tie correction. The degenerate all-tied table
/// yields statistic 0 and p = 1.
inline TestResult friedman(const RankTable& rt) {
    const std::size_t n = rt.n_rows(), k = rt.n_cols();
    if (n < 2 || k < 2) throw ValidationError("friedman: need at least 2 rows and 2 columns");

    std::vector<double> rank_sums(k, 0.0);
    double a1 = 0.0;
    for (const auto& row : rt.ranks) {
        for (std::size_t j = 0; j < k; ++j) {
            rank_sums[j] += row[j];
            a1 += row[j] * row[j];
        }
    }
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    const double c1 = nn * kk * (kk + 1.0) * (kk + 1.0) / 4.0;
    double dev = 0.0;
    for (double rj : rank_sums) {
        const double e = rj - nn * (kk + 1.0) / 2.0;
        dev += e * e;
    }

    TestResult r;
    r.alternative = Alternative::TwoSided;
    r.method = "friedman-chisq";
    r.n_effective = n;
    const double denom = a1 - c1;
    if (denom <= 0.0) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.warning = "all columns tied";
        return r;
    }
    r.statistic = (kk - 1.0) * dev / denom;
    r.p_value = chisq_sf(r.statistic, kk - 1.0);
    return r;
}

/// Compact-letter-display grouping from Fisher LSD comparisons on the
/// Friedman rank table.
struct CLDGrouping {
    std::vector<std::string> treatments;           // column ids, input order
    std::vector<double> mean_ranks;                // aligned with treatments
    std::map<std::string, std::string> letters;    // treatment -> letter set
    std::vector<std::vector<double>> pairwise_p;   // aligned with treatments
    double lsd = 0.0;                              // threshold on mean-rank distance
    double alpha = 0.05;
};

/// Pairwise comparison of mean ranks against the rank-ANOVA LSD; treatments
/// whose mean ranks differ by no more than the LSD share a letter. Letters
/// run a, b, c, ... from the best (largest) mean rank downward.
inline CLDGrouping posthoc_lsd(const RankTable& rt, double alpha = 0.05) {
    const std::size_t n = rt.n_rows(), k = rt.n_cols();
    if (n < 2 || k < 2) throw ValidationError("posthoc_lsd: need at least 2 rows and 2 columns");

    std::vector<double> rank_sums(k, 0.0);
    double a1 = 0.0;
    for (const auto& row : rt.ranks)
        for (std::size_t j = 0; j < k; ++j) {
            rank_sums[j] += row[j];
            a1 += row[j] * row[j];
        }
    const double nn = static_cast<double>(n);
    double sum_rj2 = 0.0;
    for (double rj : rank_sums) sum_rj2 += rj * rj;
    // two-way rank ANOVA residual; block sums are constant so their term drops
    const double sse = a1 - sum_rj2 / nn;
    const double df = (nn - 1.0) * (static_cast<double>(k) - 1.0);
    const double mse = std::max(0.0, sse) / df;
    const double se = std::sqrt(2.0 * mse / nn);

    CLDGrouping g;
    g.alpha = alpha;
    g.treatments = rt.column_ids;
    g.mean_ranks = rt.mean_ranks();
    g.lsd = se > 0.0 ? t_quantile(1.0 - alpha / 2.0, df) * se : 0.0;

    g.pairwise_p.assign(k, std::vector<double>(k, 1.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double diff = std::fabs(g.mean_ranks[i] - g.mean_ranks[j]);
            double p;
            if (se > 0.0)
                p = 2.0 * (1.0 - t_cdf(diff / se, df));
            else
                p = diff > 0.0 ? 0.0 : 1.0;
            g.pairwise_p[i][j] = std::min(1.0, p);
        }

    // letters by maximal runs over treatments sorted by decreasing mean rank;
    // the LSD is a single distance threshold, so non-significance is an
    // interval relation on the sorted means
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return g.mean_ranks[a] > g.mean_ranks[b];
    });
    std::vector<std::string> assigned(k);
    char letter = 'a';
    std::size_t covered_hi = 0;   // one past the last sorted index already covered
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i;
        while (j + 1 < k && g.mean_ranks[order[i]] - g.mean_ranks[order[j + 1]] <= g.lsd) ++j;
        if (j + 1 <= covered_hi) continue;   // run nested in a previous one
        for (std::size_t t = i; t <= j; ++t) assigned[order[t]] += letter;
        covered_hi = j + 1;
        ++letter;
    }
    for (std::size_t i = 0; i < k; ++i) g.letters[g.treatments[i]] = assigned[i];
    return g;
}

}  // namespace tsdiag
