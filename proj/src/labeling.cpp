#include "oodkit/error.hpp"
#include "oodkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oodkit::eval {

LabelRule LabelRule::fixed(double t) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::InvalidArgument, "fixed DSC threshold must lie in (0, 1)");
    return {LabelMode::Fixed, t};
}

std::size_t Labels::n_ood() const noexcept {
    return static_cast<std::size_t>(std::count(is_ood.begin(), is_ood.end(), true));
}

Labels label(std::span<const double> dscs, const LabelRule& rule) {
    if (dscs.empty()) throw Error(ErrorCode::NoImages, "cannot label an empty image set");
    Labels out;
    switch (rule.mode) {
        case LabelMode::Fixed:
            if (!(rule.threshold > 0.0 && rule.threshold < 1.0)) {
                throw Error(ErrorCode::InvalidArgument, "fixed DSC threshold must lie in (0, 1)");
            }
            out.threshold = rule.threshold;
            break;
        case LabelMode::Median: {
            std::vector<double> sorted(dscs.begin(), dscs.end());
            std::sort(sorted.begin(), sorted.end());
            const std::size_t n = sorted.size();
            out.threshold = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
            break;
        }
        case LabelMode::Auto: {
            const auto strict_id = std::count_if(dscs.begin(), dscs.end(), [](double d) { return d >= kStrictDsc; });
            out.threshold = kStrictDsc;
            if (strict_id < 2) {
                out.threshold = kFallbackDsc;
                out.fell_back = true;
            }
            break;
        }
    }
    out.is_ood.reserve(dscs.size());
    for (double d : dscs) out.is_ood.push_back(d < out.threshold);
    return out;
}

Labels label(std::span<const ScoredImage> images, const LabelRule& rule) {
    std::vector<double> dscs;
    dscs.reserve(images.size());
    for (const auto& img : images) dscs.push_back(img.dsc);
    return label(dscs, rule);
}

}  // namespace oodkit::eval
