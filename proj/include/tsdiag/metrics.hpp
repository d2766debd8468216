#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "tsdiag/common.hpp"
#include "tsdiag/dataset.hpp"

namespace tsdiag {

struct ConfusionMatrix {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    std::size_t total() const { return tp + fn + fp + tn; }
};

/// Classifier scores (probability of Positive) paired with ground truth.
struct ScoredPredictions {
    std::vector<double> scores;
    std::vector<ClassLabel> truth;
};

/// Undefined entries (0/0 denominators, single-class inputs) stay empty and
/// serialize as null; they are never silently zero.
struct MetricSet {
    std::optional<double> acc, sensitivity, specificity, precision;
    std::optional<double> f1, g_mean, auc, phi, tpr, fpr;
};

inline ConfusionMatrix confusion(const ScoredPredictions& s, double threshold = 0.5) {
    if (s.scores.size() != s.truth.size())
        throw ValidationError("confusion: scores/truth length mismatch");
    ConfusionMatrix c;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
        const bool predicted_positive = s.scores[i] >= threshold;
        if (s.truth[i] == ClassLabel::Positive)
            (predicted_positive ? c.tp : c.fn)++;
        else
            (predicted_positive ? c.fp : c.tn)++;
    }
    return c;
}

namespace detail {

inline std::optional<double> ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

}  // namespace detail

/// Accuracy, per-class accuracies, precision and the two ROC rates.
inline MetricSet basic_metrics(const ConfusionMatrix& c) {
    MetricSet m;
    const double tp = static_cast<double>(c.tp), fn = static_cast<double>(c.fn);
    const double fp = static_cast<double>(c.fp), tn = static_cast<double>(c.tn);
    m.acc = detail::ratio(tp + tn, tp + tn + fp + fn);
    m.sensitivity = detail::ratio(tp, tp + fn);
    m.specificity = detail::ratio(tn, tn + fp);
    m.precision = detail::ratio(tp, tp + fp);
    m.tpr = m.sensitivity;
    m.fpr = detail::ratio(fp, fp + tn);
    return m;
}

/// Harmonic mean of precision and sensitivity.
inline std::optional<double> f1(const ConfusionMatrix& c) {
    const auto m = basic_metrics(c);
    if (!m.precision || !m.sensitivity) return std::nullopt;
    const double sum = *m.precision + *m.sensitivity;
    if (sum == 0.0) return std::nullopt;
    return 2.0 * (*m.precision) * (*m.sensitivity) / sum;
}

/// Geometric mean of the per-class accuracies.
inline std::optional<double> g_mean(const ConfusionMatrix& c) {
    const auto m = basic_metrics(c);
    if (!m.sensitivity || !m.specificity) return std::nullopt;
    return std::sqrt(*m.sensitivity * *m.specificity);
}

/// Phi (mean square contingency) coefficient; undefined when a marginal is 0.
inline std::optional<double> phi(const ConfusionMatrix& c) {
    const double tp = static_cast<double>(c.tp), fn = static_cast<double>(c.fn);
    const double fp = static_cast<double>(c.fp), tn = static_cast<double>(c.tn);
    const double m1 = tp + fp, m2 = fn + tn, m3 = tp + fn, m4 = fp + tn;
    if (m1 == 0.0 || m2 == 0.0 || m3 == 0.0 || m4 == 0.0) return std::nullopt;
    return (tp * tn - fp * fn) / std::sqrt(m1 * m2 * m3 * m4);
}

/// Pairwise AUC: the probability a Positive outranks a Negative, with score
/// ties contributing one half. Equals the Mann-Whitney statistic and the
/// trapezoidal area under the ROC curve.
inline double auc(const ScoredPredictions& s) {
    if (s.scores.size() != s.truth.size())
        throw ValidationError("auc: scores/truth length mismatch");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < s.scores.size(); ++i)
        (s.truth[i] == ClassLabel::Positive ? pos : neg).push_back(s.scores[i]);
    if (pos.empty() || neg.empty()) throw ValidationError("auc: both classes must be present");
    double num = 0.0;
    for (double p : pos)
        for (double n : neg) {
            if (p > n)
                num += 1.0;
            else if (p == n)
                num += 0.5;
        }
    return num / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Full metric set for one scored test fold.
inline MetricSet compute_metrics(const ScoredPredictions& s, double threshold = 0.5) {
    const ConfusionMatrix c = confusion(s, threshold);
    MetricSet m = basic_metrics(c);
    m.f1 = f1(c);
    m.g_mean = g_mean(c);
    m.phi = phi(c);
    bool has_pos = false, has_neg = false;
    for (auto t : s.truth) (t == ClassLabel::Positive ? has_pos : has_neg) = true;
    if (has_pos && has_neg) m.auc = auc(s);
    return m;
}

}  // namespace tsdiag
