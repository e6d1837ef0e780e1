#pragma once

#include "oodkit/linalg.hpp"

#include <filesystem>
#include <span>

namespace oodkit::detectors {

/// Single Gaussian fitted to training embeddings. The precision matrix is
/// stored explicitly so scoring is one O(m^2) quadratic form per query.
struct GaussianModel {
    Vector mean;
    Eigen::MatrixXd precision;  ///< inverse of (MLE covariance + jitter * I)
    double jitter_used = 0.0;
    std::size_t n_train = 0;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Relative diagonal loadings tried in order (multiplied by trace(cov)/m).
inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};

/// Mean and maximum-likelihood (divide-by-N) covariance; inverted through a
/// Cholesky factorisation, escalating diagonal jitter until it succeeds.
GaussianModel gaussian_fit(const SampleMatrix& train);

/// Mahalanobis distance sqrt((x - mean)^T precision (x - mean)).
double mahalanobis(const GaussianModel& model, std::span<const double> x);

/// k-th nearest neighbour (1-indexed) Euclidean distance to the stored rows.
struct KnnIndex {
    SampleMatrix train;
    std::size_t k = 1;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(train.cols()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(train.rows()); }
};

/// Neighbour counts searched by the grid harness.
inline constexpr std::size_t kNeighbourGrid[] = {2, 4, 8, 16, 32, 64, 128, 256};

KnnIndex knn_fit(SampleMatrix train, std::size_t k);
double knn_score(const KnnIndex& index, std::span<const double> x);

/// Squared distances of x to every training row, accumulated left to right.
std::vector<double> squared_distances(const KnnIndex& index, std::span<const double> x);

void save_gaussian(const GaussianModel& model, const std::filesystem::path& dir);
GaussianModel load_gaussian(const std::filesystem::path& dir);
void save_knn(const KnnIndex& index, const std::filesystem::path& dir);
KnnIndex load_knn(const std::filesystem::path& dir);

}  // namespace oodkit::detectors
