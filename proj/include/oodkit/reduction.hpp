#pragma once

#include "oodkit/linalg.hpp"
#include "oodkit/tensor.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace oodkit::reduction {

enum class PoolDims { Pool2d = 2, Pool3d = 3 };

struct PoolSpec {
    PoolDims dims = PoolDims::Pool3d;
    std::size_t kernel = 2;
    std::size_t stride = 2;
};

/// Kernel/stride pairs searched for average pooling.
inline constexpr std::pair<std::size_t, std::size_t> kPoolingGrid[] = {{2, 1}, {2, 2}, {3, 1}, {3, 2}, {4, 1}};

/// Valid-padding window mean over the last 2 or 3 axes; leading axes untouched.
/// Output extent per pooled axis is floor((L - kernel) / stride) + 1.
/// Throws RankTooLow when the tensor has fewer axes than pooled dims,
/// WindowTooLarge when kernel exceeds a pooled axis, InvalidArgument for
/// kernel or stride of zero.
Tensor avg_pool(const Tensor& tensor, const PoolSpec& spec);

/// Mean over axis 0 (the patch axis). Rank >= 2 required.
Tensor patch_mean_pool(const Tensor& tensor);

struct PcaModel {
    std::size_t n_components = 0;
    std::size_t n_train = 0;
    Vector feature_mean;
    Vector feature_std;  ///< population std; zero marks a constant feature
    SampleMatrix components;  ///< n x d, orthonormal rows
    Vector explained_variance;  ///< singular value^2 / (N - 1), nonincreasing

    std::size_t dim() const noexcept { return static_cast<std::size_t>(feature_mean.size()); }
};

/// Exact PCA on flattened, standardised training tensors. Constant features
/// standardise to 0. Component signs are fixed so that the largest-magnitude
/// entry of each component is positive.
PcaModel pca_fit(std::span<const Tensor> train, std::size_t n_components);
PcaModel pca_fit(const SampleMatrix& train, std::size_t n_components);

std::vector<double> pca_transform(const PcaModel& model, const Tensor& tensor);
std::vector<double> pca_transform(const PcaModel& model, std::span<const double> flat);
SampleMatrix pca_transform(const PcaModel& model, const SampleMatrix& samples);

/// Inverse of pca_transform (exact only when n equals the data rank).
std::vector<double> pca_reconstruct(const PcaModel& model, std::span<const double> scores);

/// Directory layout: mean.npy, std.npy, components.npy, explained_variance.npy
/// and model.json {n_components, d, n_train}.
void save_pca(const PcaModel& model, const std::filesystem::path& dir);
PcaModel load_pca(const std::filesystem::path& dir);

}  // namespace oodkit::reduction
