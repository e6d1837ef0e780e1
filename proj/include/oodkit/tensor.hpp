#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace oodkit {

using Shape = std::vector<std::size_t>;

constexpr std::size_t kMaxRank = 5;

std::size_t element_count(const Shape& shape) noexcept;

/// Dense row-major (C-order) n-dimensional array of doubles, rank 1 to 5.
/// Carries embeddings, logit maps, prediction stacks and reduced vectors.
class Tensor {
public:
    Tensor() = default;
    /// Zero-filled tensor of the given shape. Throws ShapeMismatch on an
    /// invalid shape (empty, zero extent, rank above kMaxRank).
    explicit Tensor(Shape shape);
    /// Throws ShapeMismatch unless data.size() equals the shape's element count.
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// NPY v1.0 codec. Reads little-endian <f4 / <f8 in C order; f4 is widened.
struct NpyReadOptions {
    bool validate_finite = true;
};

Tensor read_npy(const std::filesystem::path& path, NpyReadOptions options = {});
Tensor parse_npy(std::span<const unsigned char> bytes, NpyReadOptions options = {});

/// Always emits <f8, fortran_order False, header padded to 64 bytes.
void write_npy(const Tensor& tensor, const std::filesystem::path& path);
std::vector<unsigned char> encode_npy(const Tensor& tensor);

/// Loose reader for segmentation masks: accepts |u1, |b1, |i1, <i2/<u2, <i4/<u4,
/// <i8/<u8, <f4, <f8. Values are converted to double without finiteness checks.
Tensor read_npy_any_numeric(const std::filesystem::path& path);

}  // namespace oodkit
