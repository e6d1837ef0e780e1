#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oodkit::eval {

/// One scored test image. Higher score means more likely OOD.
struct ScoredImage {
    std::string id;
    double score = 0.0;
    double dsc = 0.0;
    std::optional<double> hd;
    std::optional<double> nsd;
    std::optional<double> seconds;
};

// ---- labeling -------------------------------------------------------------

enum class LabelMode { Fixed, Median, Auto };

inline constexpr double kStrictDsc = 0.95;
inline constexpr double kFallbackDsc = 0.80;

struct LabelRule {
    LabelMode mode = LabelMode::Auto;
    double threshold = kStrictDsc;  ///< used by Fixed only

    static LabelRule fixed(double t);
    static LabelRule median() { return {LabelMode::Median, 0.0}; }
    static LabelRule automatic() { return {LabelMode::Auto, kStrictDsc}; }
};

struct Labels {
    std::vector<bool> is_ood;  ///< dsc < threshold
    double threshold = 0.0;
    bool fell_back = false;  ///< Auto mode lowered 0.95 to 0.80

    std::size_t n_ood() const noexcept;
    std::size_t n_id() const noexcept { return is_ood.size() - n_ood(); }
};

/// Auto: 0.95, lowered to 0.80 when fewer than two images reach 0.95.
/// Median: threshold is the median DSC (mean of the middle two for even counts).
Labels label(std::span<const double> dscs, const LabelRule& rule);
Labels label(std::span<const ScoredImage> images, const LabelRule& rule);

// ---- detection metrics (OOD is the positive class) -----------------------

/// Mann-Whitney AUROC with average ranks for ties.
double auroc(std::span<const double> scores, const std::vector<bool>& positive);

/// Average precision over distinct score thresholds (ties form one step).
double auprc(std::span<const double> scores, const std::vector<bool>& positive);

struct FprAtTpr {
    double fpr = 0.0;
    double threshold = 0.0;  ///< predict OOD when score >= threshold
    double tpr = 0.0;
};

/// Largest threshold t among the scores with TPR(score >= t) >= target.
FprAtTpr fpr_at_tpr(std::span<const double> scores, const std::vector<bool>& positive, double tpr_target = 0.90);

// ---- statistics ----------------------------------------------------------

struct Correlation {
    double r = 0.0;
    double p = 1.0;  ///< two-sided
};

inline constexpr double kCorrelationAlpha = 0.10;
inline constexpr double kSegmentationAlpha = 0.05;

Correlation pearson(std::span<const double> x, std::span<const double> y);

enum class Alternative { Less, Greater, TwoSided };

struct TTest {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

/// Paired Student t-test on a - b.
TTest paired_t_test(std::span<const double> a, std::span<const double> b, Alternative alternative);

/// Student-t CDF with df degrees of freedom.
double student_t_cdf(double t, double df);

// ---- reports -------------------------------------------------------------

struct DetectionReport {
    double auroc = 0.0;
    double auprc = 0.0;
    double fpr90 = 0.0;
    double threshold_at_tpr90 = 0.0;
    double seconds = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    double label_threshold = 0.0;
    bool label_fell_back = false;
    std::optional<Correlation> pcc_dsc;
    std::optional<Correlation> pcc_hd;
    std::optional<Correlation> pcc_nsd;
};

/// Labels the images and computes every detection metric. Correlations are
/// reported where defined (n >= 3 and nonzero variances). Throws
/// DegenerateLabels (with label counts) when either class is empty.
DetectionReport evaluate(std::span<const ScoredImage> images, const LabelRule& rule, double seconds = 0.0);

struct RejectionReport {
    double threshold = 0.0;
    std::size_t n_rejected = 0;
    std::size_t n_rejected_ood = 0;
    std::size_t n_retained = 0;
    double delta_dsc = 0.0;
    std::optional<double> delta_hd;
    std::optional<double> delta_nsd;
};

/// Rejects images whose score reaches the TPR-target threshold and reports
/// mean(retained) - mean(all) for each metric present on every image.
RejectionReport reject_at_tpr(std::span<const ScoredImage> images, const std::vector<bool>& is_ood,
                              double tpr_target = 0.90);

}  // namespace oodkit::eval
