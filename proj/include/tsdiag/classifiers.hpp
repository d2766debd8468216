#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tsdiag/common.hpp"
#include "tsdiag/dataset.hpp"
#include "tsdiag/metrics.hpp"
#include "tsdiag/neighbors.hpp"
#include "tsdiag/treatments.hpp"

namespace tsdiag {

struct ClassifierSpec {
    std::string name;                      // GNB, LDA, QDA, KNN
    std::map<std::string, double> params;  // k for KNN
    std::uint64_t seed = 0;
};

namespace detail {

// gmm-style ridge: 1e-6 times the mean feature variance of the training set
inline double classifier_ridge(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    if (n < 2) return 1e-10;
    const Eigen::VectorXd mean = X.colwise().mean();
    const double mean_var = (X.rowwise() - mean.transpose()).squaredNorm() /
                            (static_cast<double>(n - 1) * static_cast<double>(X.cols()));
    const double ridge = 1e-6 * mean_var;
    return ridge > 0.0 ? ridge : 1e-10;
}

struct GaussianNb {
    Eigen::VectorXd mean_pos, mean_neg, var_pos, var_neg;
    double log_prior_pos = 0.0, log_prior_neg = 0.0;

    double score(const Eigen::VectorXd& x) const {
        double lp = log_prior_pos, ln = log_prior_neg;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double dp = x(j) - mean_pos(j);
            const double dn = x(j) - mean_neg(j);
            lp += -0.5 * (std::log(2.0 * M_PI * var_pos(j)) + dp * dp / var_pos(j));
            ln += -0.5 * (std::log(2.0 * M_PI * var_neg(j)) + dn * dn / var_neg(j));
        }
        const double mx = std::max(lp, ln);
        return std::exp(lp - mx) / (std::exp(lp - mx) + std::exp(ln - mx));
    }
};

struct GaussianDiscriminant {
    // pooled == true gives LDA, else QDA
    Eigen::VectorXd mean_pos, mean_neg;
    Eigen::LLT<Eigen::MatrixXd> chol_pos, chol_neg;
    double logdet_pos = 0.0, logdet_neg = 0.0;
    double log_prior_pos = 0.0, log_prior_neg = 0.0;

    double score(const Eigen::VectorXd& x) const {
        const double D = static_cast<double>(x.size());
        const Eigen::VectorXd yp = chol_pos.matrixL().solve(x - mean_pos);
        const Eigen::VectorXd yn = chol_neg.matrixL().solve(x - mean_neg);
        const double lp =
            log_prior_pos - 0.5 * (D * std::log(2.0 * M_PI) + logdet_pos + yp.squaredNorm());
        const double ln =
            log_prior_neg - 0.5 * (D * std::log(2.0 * M_PI) + logdet_neg + yn.squaredNorm());
        const double mx = std::max(lp, ln);
        return std::exp(lp - mx) / (std::exp(lp - mx) + std::exp(ln - mx));
    }
};

struct KnnModel {
    Eigen::MatrixXd train;
    std::vector<ClassLabel> labels;
    std::size_t k = 3;

    double score(const Eigen::VectorXd& x) const {
        std::vector<std::size_t> all(static_cast<std::size_t>(train.rows()));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const auto nn = knn::nearest(train, x, all, std::min(k, all.size()));
        std::size_t pos = 0;
        for (std::size_t j : nn)
            if (labels[j] == ClassLabel::Positive) ++pos;
        return static_cast<double>(pos) / static_cast<double>(nn.size());
    }
};

}  // namespace detail

/// A fitted classifier; predict_score returns the probability of Positive.
class TrainedModel {
public:
    using Impl =
        std::variant<detail::GaussianNb, detail::GaussianDiscriminant, detail::KnnModel>;

    explicit TrainedModel(Impl impl) : impl_(std::move(impl)) {}

    double predict_score(const Eigen::VectorXd& x) const {
        return std::visit([&](const auto& m) { return m.score(x); }, impl_);
    }

    std::vector<double> scores(const Eigen::MatrixXd& X) const {
        std::vector<double> out(static_cast<std::size_t>(X.rows()));
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            out[static_cast<std::size_t>(i)] = predict_score(X.row(i).transpose());
        return out;
    }

private:
    Impl impl_;
};

/// Fit one of the four supported classifiers.
inline TrainedModel fit(const ClassifierSpec& spec, const Dataset& train) {
    const auto pos_idx = train.indices_of(ClassLabel::Positive);
    const auto neg_idx = train.indices_of(ClassLabel::Negative);
    if (pos_idx.empty() || neg_idx.empty())
        throw FitError("fit: training data must contain both classes");

    const Eigen::MatrixXd Xp = train.class_matrix(ClassLabel::Positive);
    const Eigen::MatrixXd Xn = train.class_matrix(ClassLabel::Negative);
    const double n = static_cast<double>(train.size());
    const double prior_pos = static_cast<double>(pos_idx.size()) / n;
    const double ridge = detail::classifier_ridge(train.features);

    auto mle_cov = [&](const Eigen::MatrixXd& X) {
        const Eigen::VectorXd mu = X.colwise().mean();
        const Eigen::MatrixXd c = X.rowwise() - mu.transpose();
        return Eigen::MatrixXd((c.transpose() * c) / static_cast<double>(X.rows()));
    };
    auto make_llt = [&](Eigen::MatrixXd cov, double& logdet) {
        cov += ridge * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw FitError("fit: covariance singular after regularization");
        logdet = 0.0;
        for (Eigen::Index i = 0; i < cov.rows(); ++i)
            logdet += 2.0 * std::log(llt.matrixL()(i, i));
        return llt;
    };

    if (spec.name == "GNB") {
        detail::GaussianNb m;
        m.mean_pos = Xp.colwise().mean();
        m.mean_neg = Xn.colwise().mean();
        auto var_of = [&](const Eigen::MatrixXd& X, const Eigen::VectorXd& mu) {
            Eigen::VectorXd v(X.cols());
            for (Eigen::Index j = 0; j < X.cols(); ++j)
                v(j) = (X.col(j).array() - mu(j)).square().sum() /
                           static_cast<double>(X.rows()) +
                       ridge;
            return v;
        };
        m.var_pos = var_of(Xp, m.mean_pos);
        m.var_neg = var_of(Xn, m.mean_neg);
        m.log_prior_pos = std::log(prior_pos);
        m.log_prior_neg = std::log(1.0 - prior_pos);
        return TrainedModel(m);
    }
    if (spec.name == "LDA" || spec.name == "QDA") {
        detail::GaussianDiscriminant m;
        m.mean_pos = Xp.colwise().mean();
        m.mean_neg = Xn.colwise().mean();
        m.log_prior_pos = std::log(prior_pos);
        m.log_prior_neg = std::log(1.0 - prior_pos);
        if (spec.name == "LDA") {
            const Eigen::MatrixXd cp = Xp.rowwise() - m.mean_pos.transpose();
            const Eigen::MatrixXd cn = Xn.rowwise() - m.mean_neg.transpose();
            const Eigen::MatrixXd pooled =
                (cp.transpose() * cp + cn.transpose() * cn) / n;
            m.chol_pos = make_llt(pooled, m.logdet_pos);
            m.chol_neg = make_llt(pooled, m.logdet_neg);
        } else {
            m.chol_pos = make_llt(mle_cov(Xp), m.logdet_pos);
            m.chol_neg = make_llt(mle_cov(Xn), m.logdet_neg);
        }
        return TrainedModel(m);
    }
    if (spec.name == "KNN") {
        for (const auto& [key, _] : spec.params)
            if (key != "k") throw ValidationError("KNN: unknown parameter '" + key + "'");
        detail::KnnModel m;
        const double kv = spec.params.count("k") ? spec.params.at("k") : 3.0;
        if (!(kv >= 1.0) || kv != std::floor(kv))
            throw ValidationError("KNN: k must be a positive integer");
        m.k = static_cast<std::size_t>(kv);
        m.train = train.features;
        m.labels = train.labels;
        return TrainedModel(m);
    }
    throw ValidationError("unknown classifier name: " + spec.name);
}

struct FoldPlan {
    std::size_t n_folds = 0;
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds;
    std::vector<std::string> warnings;
};

/// Class-stratified k-fold partition; when a class is smaller than the fold
/// count the number of folds is reduced with a warning.
inline FoldPlan stratified_kfold(const Dataset& d, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ValidationError("stratified_kfold: need at least 2 folds");
    const std::size_t min_class =
        std::min(d.count(ClassLabel::Positive), d.count(ClassLabel::Negative));
    if (min_class < 1) throw ValidationError("stratified_kfold: both classes must be present");

    FoldPlan plan;
    plan.n_folds = folds;
    if (min_class < folds) {
        plan.n_folds = std::max<std::size_t>(2, min_class);
        plan.warnings.push_back("fold count reduced to " + std::to_string(plan.n_folds) +
                                " (smallest class has " + std::to_string(min_class) +
                                " instances)");
    }
    if (min_class < 2) throw ValidationError("stratified_kfold: each class needs >= 2 instances");

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> test_sets(plan.n_folds);
    for (ClassLabel c : {ClassLabel::Negative, ClassLabel::Positive}) {
        auto idx = d.indices_of(c);
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) test_sets[i % plan.n_folds].push_back(idx[i]);
    }
    for (std::size_t f = 0; f < plan.n_folds; ++f) {
        std::sort(test_sets[f].begin(), test_sets[f].end());
        std::vector<bool> in_test(d.size(), false);
        for (std::size_t i : test_sets[f]) in_test[i] = true;
        std::vector<std::size_t> train_idx;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (!in_test[i]) train_idx.push_back(i);
        plan.folds.emplace_back(std::move(train_idx), test_sets[f]);
    }
    return plan;
}

struct FoldOutcome {
    std::size_t fold = 0;
    std::optional<MetricSet> metrics;
    std::string failure;   // set when the fold could not be evaluated
};

struct EvaluateOptions {
    bool standardize = true;    // per-fold, parameters from the training portion
    double threshold = 0.5;
    std::size_t folds = 10;
};

/// Cross-validated evaluation of one (classifier, treatment) pair: the
/// treatment is applied to the training portion of each fold only, the test
/// portion is scored untouched. Failures are recorded per fold, never thrown.
inline std::vector<FoldOutcome> evaluate(const Dataset& d, const ClassifierSpec& cspec,
                                         const TreatmentSpec& tspec, std::uint64_t seed,
                                         const EvaluateOptions& opts = {}) {
    const FoldPlan plan = stratified_kfold(d, opts.folds, seed);
    std::vector<FoldOutcome> out;
    for (std::size_t f = 0; f < plan.n_folds; ++f) {
        FoldOutcome fo;
        fo.fold = f;
        try {
            Dataset train = d.subset(plan.folds[f].first);
            Dataset test = d.subset(plan.folds[f].second);
            if (opts.standardize) {
                const auto sp = standardize_params(train.features);
                train.features = apply_standardize(train.features, sp);
                test.features = apply_standardize(test.features, sp);
            }
            TreatmentSpec fold_spec = tspec;
            fold_spec.seed = derive_seed(seed, tspec.name + "/fold=" + std::to_string(f));
            const ResampledDataset treated = apply_treatment(train, fold_spec);
            if (treated.data.count(ClassLabel::Positive) == 0 ||
                treated.data.count(ClassLabel::Negative) == 0)
                throw FitError("treatment removed an entire class from the training fold");
            const TrainedModel model = fit(cspec, treated.data);
            ScoredPredictions sp{model.scores(test.features), test.labels};
            fo.metrics = compute_metrics(sp, opts.threshold);
        } catch (const std::exception& e) {
            fo.failure = e.what();
        }
        out.push_back(std::move(fo));
    }
    return out;
}

/// One flattened results row; `value` is the 12-digit rendering or NA.
struct ResultRow {
    std::string dataset, classifier, treatment;
    std::size_t fold = 0;
    std::string metric;
    std::string value;
};

inline const std::vector<std::pair<const char*, std::optional<double> MetricSet::*>>&
metric_fields() {
    static const std::vector<std::pair<const char*, std::optional<double> MetricSet::*>> fields = {
        {"acc", &MetricSet::acc},           {"sensitivity", &MetricSet::sensitivity},
        {"specificity", &MetricSet::specificity}, {"precision", &MetricSet::precision},
        {"f1", &MetricSet::f1},             {"g_mean", &MetricSet::g_mean},
        {"auc", &MetricSet::auc},           {"phi", &MetricSet::phi},
        {"tpr", &MetricSet::tpr},           {"fpr", &MetricSet::fpr}};
    return fields;
}

inline std::vector<ResultRow> flatten_outcomes(const std::string& dataset,
                                               const std::string& classifier,
                                               const std::string& treatment,
                                               const std::vector<FoldOutcome>& outcomes) {
    std::vector<ResultRow> rows;
    for (const auto& fo : outcomes) {
        if (!fo.metrics) {
            std::string reason = fo.failure;
            for (auto& ch : reason)
                if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
            rows.push_back({dataset, classifier, treatment, fo.fold, "failed", reason});
            continue;
        }
        for (const auto& [mname, field] : metric_fields()) {
            const auto& v = (*fo.metrics).*field;
            rows.push_back({dataset, classifier, treatment, fo.fold, mname,
                            v ? format_value(*v) : std::string("NA")});
        }
    }
    return rows;
}

/// Cartesian evaluation grid. Cells already present in `existing` (a set of
/// "dataset|classifier|treatment|fold" keys from a previous run) are skipped,
/// making reruns append nothing. Resume granularity is the cell: a cell's
/// rows are always written together.
inline std::vector<ResultRow> run_grid(const std::vector<Dataset>& datasets,
                                       const std::vector<ClassifierSpec>& classifiers,
                                       const std::vector<TreatmentSpec>& treatments,
                                       std::uint64_t seed, const EvaluateOptions& opts,
                                       const std::set<std::string>& existing = {},
                                       unsigned threads = 1) {
    struct Cell {
        const Dataset* data;
        const ClassifierSpec* cspec;
        const TreatmentSpec* tspec;
        std::vector<ResultRow> rows;
    };
    std::vector<Cell> cells;
    for (const auto& d : datasets)
        for (const auto& c : classifiers)
            for (const auto& t : treatments) cells.push_back({&d, &c, &t, {}});

    parallel_for(cells.size(), threads, [&](std::size_t i) {
        auto& cell = cells[i];
        const std::string tag =
            cell.data->id + "|" + cell.cspec->name + "|" + cell.tspec->name;
        const auto it = existing.lower_bound(tag + "|");
        if (it != existing.end() && it->rfind(tag + "|", 0) == 0) return;   // already done
        const std::uint64_t cell_seed = derive_seed(seed, tag);
        const auto outcomes = evaluate(*cell.data, *cell.cspec, *cell.tspec, cell_seed, opts);
        cell.rows =
            flatten_outcomes(cell.data->id, cell.cspec->name, cell.tspec->name, outcomes);
    });

    std::vector<ResultRow> all;
    for (auto& cell : cells)
        for (auto& r : cell.rows) all.push_back(std::move(r));
    return all;
}

}  // namespace tsdiag
