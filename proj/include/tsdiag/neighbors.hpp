#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <vector>

namespace tsdiag {

/// Brute-force Euclidean k-NN helpers. Grids here are desk scale; an index
/// structure would be a drop-in replacement behind the same signatures.
namespace knn {

/// Indices of the k nearest rows of X to `point`, candidates restricted to
/// `candidates`; ties in distance resolve to the lower row index.
inline std::vector<std::size_t> nearest(const Eigen::MatrixXd& X, const Eigen::VectorXd& point,
                                        const std::vector<std::size_t>& candidates,
                                        std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(candidates.size());
    for (std::size_t idx : candidates) {
        const double d =
            (X.row(static_cast<Eigen::Index>(idx)).transpose() - point).squaredNorm();
        dist.emplace_back(d, idx);
    }
    const std::size_t kk = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::vector<std::size_t> out;
    out.reserve(kk);
    for (std::size_t i = 0; i < kk; ++i) out.push_back(dist[i].second);
    return out;
}

/// k nearest rows to row `self`, self excluded, over all rows.
inline std::vector<std::size_t> nearest_to_row(const Eigen::MatrixXd& X, std::size_t self,
                                               std::size_t k) {
    std::vector<std::size_t> candidates;
    candidates.reserve(static_cast<std::size_t>(X.rows()) - 1);
    for (std::size_t i = 0; i < static_cast<std::size_t>(X.rows()); ++i)
        if (i != self) candidates.push_back(i);
    return nearest(X, X.row(static_cast<Eigen::Index>(self)).transpose(), candidates, k);
}

/// k nearest rows to row `self` among `candidates` (self removed if present).
inline std::vector<std::size_t> nearest_to_row_among(const Eigen::MatrixXd& X, std::size_t self,
                                                     const std::vector<std::size_t>& candidates,
                                                     std::size_t k) {
    std::vector<std::size_t> pool;
    pool.reserve(candidates.size());
    for (std::size_t c : candidates)
        if (c != self) pool.push_back(c);
    return nearest(X, X.row(static_cast<Eigen::Index>(self)).transpose(), pool, k);
}

}  // namespace knn
}  // namespace tsdiag
