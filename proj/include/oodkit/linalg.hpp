#pragma once

#include "oodkit/tensor.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace oodkit {

/// Samples as rows: N x m, row-major so each sample's features are contiguous.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Flattens each tensor (C order) into one row. Throws ShapeMismatch if the
/// element counts differ.
SampleMatrix stack_rows(std::span<const Tensor> tensors);
SampleMatrix stack_rows(std::span<const std::vector<double>> rows);

}  // namespace oodkit
