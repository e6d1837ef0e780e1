#include "oodkit/error.hpp"
#include "oodkit/evaluation.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <string>

namespace oodkit::eval {

namespace {

std::optional<Correlation> maybe_pearson(std::span<const double> x, std::span<const double> y) {
    try {
        return pearson(x, y);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ZeroVariance || e.code() == ErrorCode::TooFewPoints) return std::nullopt;
        throw;
    }
}

template <typename Get>
std::optional<double> delta_of(std::span<const ScoredImage> images, const std::vector<bool>& rejected, Get get) {
    NeumaierSum all, kept;
    std::size_t n_kept = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::optional<double> v = get(images[i]);
        if (!v) return std::nullopt;
        all.add(*v);
        if (!rejected[i]) {
            kept.add(*v);
            ++n_kept;
        }
    }
    return kept.value() / static_cast<double>(n_kept) - all.value() / static_cast<double>(images.size());
}

}  // namespace

DetectionReport evaluate(std::span<const ScoredImage> images, const LabelRule& rule, double seconds) {
    const Labels labels = label(images, rule);
    DetectionReport report;
    report.n_ood = labels.n_ood();
    report.n_id = labels.n_id();
    report.label_threshold = labels.threshold;
    report.label_fell_back = labels.fell_back;
    report.seconds = seconds;
    if (report.n_ood == 0 || report.n_id == 0) {
        throw Error(ErrorCode::DegenerateLabels,
                    "labeling at DSC threshold " + std::to_string(labels.threshold) + " produced n_id = " +
                        std::to_string(report.n_id) + ", n_ood = " + std::to_string(report.n_ood));
    }

    std::vector<double> scores, dscs, hds, nsds;
    for (const auto& img : images) {
        scores.push_back(img.score);
        dscs.push_back(img.dsc);
        if (img.hd) hds.push_back(*img.hd);
        if (img.nsd) nsds.push_back(*img.nsd);
    }
    report.auroc = auroc(scores, labels.is_ood);
    report.auprc = auprc(scores, labels.is_ood);
    const auto at90 = fpr_at_tpr(scores, labels.is_ood, 0.90);
    report.fpr90 = at90.fpr;
    report.threshold_at_tpr90 = at90.threshold;
    report.pcc_dsc = maybe_pearson(scores, dscs);
    if (hds.size() == scores.size()) report.pcc_hd = maybe_pearson(scores, hds);
    if (nsds.size() == scores.size()) report.pcc_nsd = maybe_pearson(scores, nsds);
    return report;
}

RejectionReport reject_at_tpr(std::span<const ScoredImage> images, const std::vector<bool>& is_ood, double tpr_target) {
    std::vector<double> scores;
    scores.reserve(images.size());
    for (const auto& img : images) scores.push_back(img.score);
    const auto at = fpr_at_tpr(scores, is_ood, tpr_target);

    RejectionReport out;
    out.threshold = at.threshold;
    std::vector<bool> rejected(images.size(), false);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].score >= at.threshold) {
            rejected[i] = true;
            ++out.n_rejected;
            if (is_ood[i]) ++out.n_rejected_ood;
        }
    }
    out.n_retained = images.size() - out.n_rejected;
    if (out.n_retained == 0) {
        throw Error(ErrorCode::EverythingRejected, "every image scored at or above the threshold " +
                                                       std::to_string(at.threshold));
    }
    out.delta_dsc = *delta_of(images, rejected, [](const ScoredImage& s) { return std::optional<double>(s.dsc); });
    out.delta_hd = delta_of(images, rejected, [](const ScoredImage& s) { return s.hd; });
    out.delta_nsd = delta_of(images, rejected, [](const ScoredImage& s) { return s.nsd; });
    return out;
}

}  // namespace oodkit::eval
