#include "oodkit/error.hpp"
#include "oodkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace oodkit::eval {

namespace {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

ClassCounts count_classes(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    for (double s : scores) {
        if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteInput, "scores must be finite");
    }
    ClassCounts c;
    c.positives = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    c.negatives = positive.size() - c.positives;
    return c;
}

void require_both(const ClassCounts& c) {
    if (c.positives == 0 || c.negatives == 0) {
        throw Error(ErrorCode::DegenerateLabels, "need at least one OOD and one ID image (n_ood = " +
                                                     std::to_string(c.positives) + ", n_id = " +
                                                     std::to_string(c.negatives) + ")");
    }
}

// Indices ordered by score, descending.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

double auroc(std::span<const double> scores, const std::vector<bool>& positive) {
    const auto counts = count_classes(scores, positive);
    require_both(counts);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank sums are half-integers, exact in double for any realistic n.
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t t = i; t <= j; ++t) {
            if (positive[order[t]]) positive_rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(counts.positives);
    const double nn = static_cast<double>(counts.negatives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auprc(std::span<const double> scores, const std::vector<bool>& positive) {
    const auto counts = count_classes(scores, positive);
    if (counts.positives == 0) throw Error(ErrorCode::NoPositives, "average precision needs at least one OOD image");
    const auto order = descending_order(scores);
    const double np = static_cast<double>(counts.positives);
    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double level = scores[order[i]];
        while (i < order.size() && scores[order[i]] == level) {
            if (positive[order[i]]) ++tp;
            else ++fp;
            ++i;
        }
        const double recall = static_cast<double>(tp) / np;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

FprAtTpr fpr_at_tpr(std::span<const double> scores, const std::vector<bool>& positive, double tpr_target) {
    const auto counts = count_classes(scores, positive);
    require_both(counts);
    if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw Error(ErrorCode::InvalidArgument, "TPR target must lie in (0, 1]");
    const auto order = descending_order(scores);
    const double np = static_cast<double>(counts.positives);
    const double nn = static_cast<double>(counts.negatives);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double level = scores[order[i]];
        while (i < order.size() && scores[order[i]] == level) {
            if (positive[order[i]]) ++tp;
            else ++fp;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / np;
        if (tpr >= tpr_target) return {static_cast<double>(fp) / nn, level, tpr};
    }
    // Unreachable: the lowest threshold always gives TPR = 1.
    return {1.0, scores[order.back()], 1.0};
}

}  // namespace oodkit::eval
