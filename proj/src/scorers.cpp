#include "oodkit/error.hpp"
#include "oodkit/scorers.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oodkit::scorers {

namespace {

void check_temperature(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "temperature must be a positive finite number");
}

struct Layout {
    std::size_t planes;
    std::size_t voxels;
};

Layout layout(const Tensor& t) { return {t.shape()[0], t.size() / t.shape()[0]}; }

}  // namespace

void validate_logits(const Tensor& logits) {
    if (logits.rank() < 2) throw Error(ErrorCode::RankTooLow, "logit map needs a class axis and at least one spatial axis");
    if (logits.shape()[0] < 2) throw Error(ErrorCode::ShapeMismatch, "logit map needs at least 2 classes");
    if (!logits.all_finite()) throw Error(ErrorCode::NonFiniteValue, "logit map contains non-finite values");
}

void validate_stack(const Tensor& stack) {
    if (stack.rank() < 2) throw Error(ErrorCode::RankTooLow, "prediction stack needs a stack axis and spatial axes");
    if (stack.shape()[0] < 2) throw Error(ErrorCode::ShapeMismatch, "prediction stack needs at least 2 maps");
    for (double v : stack.data()) {
        if (!std::isfinite(v) || v < -1e-9 || v > 1.0 + 1e-9) {
            throw Error(ErrorCode::BadValue, "prediction stack values must lie in [0, 1]");
        }
    }
}

double msp_score(const Tensor& logits, double temperature) {
    validate_logits(logits);
    check_temperature(temperature);
    const auto [classes, voxels] = layout(logits);
    const auto f = logits.data();
    NeumaierSum total;
    for (std::size_t v = 0; v < voxels; ++v) {
        double top = f[v];
        for (std::size_t c = 1; c < classes; ++c) top = std::max(top, f[c * voxels + v]);
        // max softmax = exp(top/T) / sum exp(f_c/T) = 1 / sum exp((f_c - top)/T)
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp((f[c * voxels + v] - top) / temperature);
        total.add(1.0 / denom);
    }
    return 1.0 - total.value() / static_cast<double>(voxels);
}

double energy_score(const Tensor& logits, double temperature) {
    validate_logits(logits);
    check_temperature(temperature);
    const auto [classes, voxels] = layout(logits);
    const auto f = logits.data();
    NeumaierSum total;
    for (std::size_t v = 0; v < voxels; ++v) {
        double top = f[v] / temperature;
        for (std::size_t c = 1; c < classes; ++c) top = std::max(top, f[c * voxels + v] / temperature);
        double acc = 0.0;
        for (std::size_t c = 0; c < classes; ++c) acc += std::exp(f[c * voxels + v] / temperature - top);
        total.add(-temperature * (top + std::log(acc)));
    }
    return total.value() / static_cast<double>(voxels);
}

double uncertainty_score(const Tensor& stack) {
    validate_stack(stack);
    const auto [members, voxels] = layout(stack);
    const auto p = stack.data();
    // Members are sorted per voxel so the result is exactly invariant to stack order.
    std::vector<double> column(members);
    NeumaierSum total;
    for (std::size_t v = 0; v < voxels; ++v) {
        for (std::size_t s = 0; s < members; ++s) column[s] = p[s * voxels + v];
        std::sort(column.begin(), column.end());
        double mean = 0.0;
        for (double x : column) mean += x;
        mean /= static_cast<double>(members);
        double ss = 0.0;
        for (double x : column) ss += (x - mean) * (x - mean);
        total.add(std::sqrt(ss / static_cast<double>(members)));
    }
    return total.value() / static_cast<double>(voxels);
}

}  // namespace oodkit::scorers
