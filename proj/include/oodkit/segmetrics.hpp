#pragma once

#include "oodkit/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace oodkit::seg {

using Spacing = std::array<double, 3>;  ///< (sz, sy, sx) in mm
using Voxel = std::array<std::size_t, 3>;  ///< (z, y, x)

struct BinaryMask {
    std::array<std::size_t, 3> shape{0, 0, 0};  ///< (D, H, W)
    std::vector<std::uint8_t> voxels;  ///< row-major, nonzero = foreground
    Spacing spacing{1.0, 1.0, 1.0};

    BinaryMask() = default;
    /// Throws InvalidArgument for non-positive spacing or a size mismatch.
    BinaryMask(std::array<std::size_t, 3> shape, std::vector<std::uint8_t> voxels, Spacing spacing = {1.0, 1.0, 1.0});

    std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return (z * shape[1] + y) * shape[2] + x;
    }
    bool at(std::size_t z, std::size_t y, std::size_t x) const noexcept { return voxels[index(z, y, x)] != 0; }
    std::size_t count() const noexcept;
};

/// Rank-3 tensor (or rank 2, treated as a single slice); nonzero = foreground.
BinaryMask mask_from_tensor(const Tensor& tensor, Spacing spacing);

struct SegMetrics {
    double dsc = 0.0;
    double hd = 0.0;
    double nsd = 0.0;
};

inline constexpr double kDefaultNsdToleranceMm = 2.0;

/// 2|A n B| / (|A| + |B|); 1 when both masks are empty.
double dsc(const BinaryMask& a, const BinaryMask& b);

/// Foreground voxels with a background or out-of-bounds face neighbour, raster order.
std::vector<Voxel> surface_voxels(const BinaryMask& m);

/// Exact symmetric (maximum) Hausdorff distance between surfaces, in mm.
double hausdorff(const BinaryMask& a, const BinaryMask& b);

/// Symmetric normalised surface Dice at tolerance tau_mm.
double nsd(const BinaryMask& a, const BinaryMask& b, double tau_mm = kDefaultNsdToleranceMm);

SegMetrics evaluate(const BinaryMask& prediction, const BinaryMask& reference, double tau_mm = kDefaultNsdToleranceMm);

/// Squared anisotropic distance (mm^2) from every voxel to the nearest
/// surface voxel of m. Infinity everywhere when m is empty.
std::vector<double> surface_distance_field(const BinaryMask& m);

}  // namespace oodkit::seg
