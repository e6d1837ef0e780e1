#include "oodkit/error.hpp"
#include "oodkit/segmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace oodkit::seg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const BinaryMask& a, const BinaryMask& b, bool need_spacing) {
    if (a.shape != b.shape) throw Error(ErrorCode::ShapeMismatch, "masks differ in shape");
    if (need_spacing && a.spacing != b.spacing) throw Error(ErrorCode::SpacingMismatch, "masks differ in voxel spacing");
}

// One pass of the Felzenszwalb-Huttenlocher lower-envelope transform along a
// line of n samples spaced `step` mm apart: out[q] = min_p f[p] + ((q - p) * step)^2.
void envelope_pass(const double* f, double* out, std::size_t n, double step, std::vector<std::size_t>& v,
                   std::vector<double>& z) {
    v.resize(n);
    z.resize(n + 1);
    std::ptrdiff_t k = -1;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double xq = static_cast<double>(q) * step;
        double s = -kInf;
        while (k >= 0) {
            const std::size_t p = v[static_cast<std::size_t>(k)];
            const double xp = static_cast<double>(p) * step;
            s = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
            if (s > z[static_cast<std::size_t>(k)]) break;
            --k;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = k == 0 ? -kInf : s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
        std::fill(out, out + n, kInf);
        return;
    }
    std::size_t j = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const double xq = static_cast<double>(q) * step;
        while (z[j + 1] < xq) ++j;
        const std::size_t p = v[j];
        const double delta = (static_cast<double>(q) - static_cast<double>(p)) * step;
        out[q] = delta * delta + f[p];
    }
}

double directed_max(const std::vector<Voxel>& from, const BinaryMask& geometry, const std::vector<double>& field) {
    double worst = 0.0;
    for (const auto& v : from) worst = std::max(worst, field[geometry.index(v[0], v[1], v[2])]);
    return std::sqrt(worst);
}

std::size_t count_within(const std::vector<Voxel>& from, const BinaryMask& geometry, const std::vector<double>& field,
                         double tau) {
    std::size_t hits = 0;
    for (const auto& v : from) {
        if (std::sqrt(field[geometry.index(v[0], v[1], v[2])]) <= tau) ++hits;
    }
    return hits;
}

}  // namespace

BinaryMask::BinaryMask(std::array<std::size_t, 3> shape_, std::vector<std::uint8_t> voxels_, Spacing spacing_)
    : shape(shape_), voxels(std::move(voxels_)), spacing(spacing_) {
    for (double s : spacing) {
        if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "voxel spacing must be positive");
    }
    if (voxels.size() != shape[0] * shape[1] * shape[2]) {
        throw Error(ErrorCode::ShapeMismatch, "mask voxel count does not match its shape");
    }
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(voxels.begin(), voxels.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask mask_from_tensor(const Tensor& tensor, Spacing spacing) {
    std::array<std::size_t, 3> shape{};
    if (tensor.rank() == 3) shape = {tensor.shape()[0], tensor.shape()[1], tensor.shape()[2]};
    else if (tensor.rank() == 2) shape = {1, tensor.shape()[0], tensor.shape()[1]};
    else throw Error(ErrorCode::ShapeMismatch, "masks must be 2-D or 3-D, got rank " + std::to_string(tensor.rank()));
    std::vector<std::uint8_t> voxels(tensor.size());
    for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = tensor[i] != 0.0 ? 1 : 0;
    return BinaryMask(shape, std::move(voxels), spacing);
}

double dsc(const BinaryMask& a, const BinaryMask& b) {
    check_pair(a, b, false);
    std::size_t both = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.voxels.size(); ++i) {
        const bool x = a.voxels[i] != 0, y = b.voxels[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<Voxel> surface_voxels(const BinaryMask& m) {
    std::vector<Voxel> out;
    const auto [d, h, w] = m.shape;
    for (std::size_t z = 0; z < d; ++z) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                if (!m.at(z, y, x)) continue;
                const bool boundary = z == 0 || z + 1 == d || y == 0 || y + 1 == h || x == 0 || x + 1 == w ||
                                      !m.at(z - 1, y, x) || !m.at(z + 1, y, x) || !m.at(z, y - 1, x) ||
                                      !m.at(z, y + 1, x) || !m.at(z, y, x - 1) || !m.at(z, y, x + 1);
                if (boundary) out.push_back({z, y, x});
            }
        }
    }
    return out;
}

std::vector<double> surface_distance_field(const BinaryMask& m) {
    const auto [d, h, w] = m.shape;
    std::vector<double> field(d * h * w, kInf);
    for (const auto& v : surface_voxels(m)) field[m.index(v[0], v[1], v[2])] = 0.0;

    // Passes run z, then y, then x so each squared distance accumulates as
    // (dz*sz)^2 + (dy*sy)^2 + (dx*sx)^2 from left to right.
    std::vector<double> line_in, line_out, z_buf;
    std::vector<std::size_t> v_buf;
    auto run_axis = [&](std::size_t n, double step, std::size_t count, auto offset_of, std::size_t stride) {
        line_in.resize(n);
        line_out.resize(n);
        for (std::size_t line = 0; line < count; ++line) {
            const std::size_t base = offset_of(line);
            for (std::size_t i = 0; i < n; ++i) line_in[i] = field[base + i * stride];
            envelope_pass(line_in.data(), line_out.data(), n, step, v_buf, z_buf);
            for (std::size_t i = 0; i < n; ++i) field[base + i * stride] = line_out[i];
        }
    };
    run_axis(d, m.spacing[0], h * w, [](std::size_t line) { return line; }, h * w);
    run_axis(h, m.spacing[1], d * w, [&](std::size_t line) { return (line / w) * h * w + line % w; }, w);
    run_axis(w, m.spacing[2], d * h, [&](std::size_t line) { return line * w; }, 1);
    return field;
}

double hausdorff(const BinaryMask& a, const BinaryMask& b) {
    check_pair(a, b, true);
    const auto sa = surface_voxels(a);
    const auto sb = surface_voxels(b);
    if (sa.empty() || sb.empty()) throw Error(ErrorCode::EmptyMask, "Hausdorff distance is undefined for an empty mask");
    const auto field_a = surface_distance_field(a);
    const auto field_b = surface_distance_field(b);
    return std::max(directed_max(sa, a, field_b), directed_max(sb, b, field_a));
}

double nsd(const BinaryMask& a, const BinaryMask& b, double tau_mm) {
    check_pair(a, b, true);
    if (!(tau_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "NSD tolerance must be positive");
    const auto sa = surface_voxels(a);
    const auto sb = surface_voxels(b);
    if (sa.empty() || sb.empty()) throw Error(ErrorCode::EmptyMask, "surface Dice is undefined for an empty mask");
    const auto field_a = surface_distance_field(a);
    const auto field_b = surface_distance_field(b);
    const std::size_t hits = count_within(sa, a, field_b, tau_mm) + count_within(sb, b, field_a, tau_mm);
    return static_cast<double>(hits) / static_cast<double>(sa.size() + sb.size());
}

SegMetrics evaluate(const BinaryMask& prediction, const BinaryMask& reference, double tau_mm) {
    check_pair(prediction, reference, true);
    if (!(tau_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "NSD tolerance must be positive");
    const auto sp = surface_voxels(prediction);
    const auto sr = surface_voxels(reference);
    if (sp.empty() || sr.empty()) throw Error(ErrorCode::EmptyMask, "surface metrics are undefined for an empty mask");
    const auto field_p = surface_distance_field(prediction);
    const auto field_r = surface_distance_field(reference);
    SegMetrics out;
    out.dsc = dsc(prediction, reference);
    out.hd = std::max(directed_max(sp, prediction, field_r), directed_max(sr, reference, field_p));
    const std::size_t hits =
        count_within(sp, prediction, field_r, tau_mm) + count_within(sr, reference, field_p, tau_mm);
    out.nsd = static_cast<double>(hits) / static_cast<double>(sp.size() + sr.size());
    return out;
}

}  // namespace oodkit::seg
