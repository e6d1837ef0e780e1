#pragma once

#include "oodkit/detectors.hpp"
#include "oodkit/evaluation.hpp"
#include "oodkit/linalg.hpp"
#include "oodkit/manifest.hpp"
#include "oodkit/reduction.hpp"
#include "oodkit/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace oodkit::pipeline {

enum class ReductionMethod { None, Pool2d, Pool3d, PatchMean, Pca, External };

struct ReductionSpec {
    ReductionMethod method = ReductionMethod::None;
    std::size_t kernel = 2;  ///< pooling window
    std::size_t stride = 2;  ///< pooling stride
    std::size_t n_components = 2;  ///< PCA
    bool patch_mean_first = false;  ///< average the patch axis before the method
    /// External: manifest of embeddings reduced by another tool (UMAP,
    /// t-SNE, ...). "{seed}" is replaced by the run's seed.
    std::string external_manifest;

    std::string name() const;
};

enum class DetectorKind { Mahalanobis, Knn };

struct DetectorSpec {
    DetectorKind kind = DetectorKind::Mahalanobis;
    std::size_t k = 8;

    std::string name() const;
};

struct ExperimentSpec {
    ReductionSpec reduction;
    DetectorSpec detector;
    /// Fraction of the training split kept per seed, drawn from an RNG stream
    /// keyed by (seed, experiment name). 1.0 keeps everything (deterministic).
    double train_fraction = 1.0;

    std::string name() const;
};

/// Images of one split, in manifest order.
struct SplitData {
    std::vector<ManifestRecord> records;
    std::vector<Tensor> embeddings;  ///< empty when loaded lazily (external-only runs)
};

struct PipelineData {
    DatasetManifest train_manifest;
    DatasetManifest test_manifest;
    SplitData train;
    SplitData test;
};

/// Train records come from the train manifest's `train` rows and test records
/// from the test manifest's `test` rows. Embeddings are read eagerly unless
/// load_embeddings is false.
PipelineData load_data(const std::filesystem::path& train_manifest, const std::filesystem::path& test_manifest,
                       bool load_embeddings = true);

struct Reduced {
    SampleMatrix train;
    SampleMatrix test;
    std::optional<reduction::PcaModel> pca;
    double seconds = 0.0;
};

/// Fits on the training split only and transforms both splits.
Reduced reduce(const PipelineData& data, const ReductionSpec& spec, std::int64_t seed);

/// Per-image reduction result for tensor inputs (used by the reduce command).
Tensor reduce_one(const Tensor& embedding, const ReductionSpec& spec, const reduction::PcaModel* pca);

using Detector = std::variant<detectors::GaussianModel, detectors::KnnIndex>;

Detector fit_detector(const SampleMatrix& train, const DetectorSpec& spec);
double score_one(const Detector& detector, std::span<const double> x);
/// When seconds is given it receives each row's scoring wall time.
std::vector<double> score_all(const Detector& detector, const SampleMatrix& test, unsigned threads,
                              std::vector<double>* seconds = nullptr);

struct RunOptions {
    eval::LabelRule rule = eval::LabelRule::automatic();
    unsigned threads = 1;
};

struct ExperimentRun {
    std::string experiment;
    std::int64_t seed = 0;
    std::vector<eval::ScoredImage> scored;
    eval::DetectionReport report;  ///< report.seconds = test scoring wall time
    double reduce_seconds = 0.0;
    double fit_seconds = 0.0;
    std::optional<double> jitter_used;
};

/// reduce -> fit -> score -> label -> evaluate for one seed.
ExperimentRun run_experiment(const PipelineData& data, const ExperimentSpec& spec, std::int64_t seed,
                             const RunOptions& options);

/// Scores without evaluating (labels may be degenerate or DSC absent).
ExperimentRun score_experiment(const PipelineData& data, const ExperimentSpec& spec, std::int64_t seed,
                               unsigned threads);

std::vector<eval::ScoredImage> attach_metrics(const std::vector<ManifestRecord>& records,
                                              const std::vector<double>& scores);

// ---- grid search ---------------------------------------------------------

struct SeedOutcome {
    std::int64_t seed = 0;
    double auroc = 0.0;
    double auprc = 0.0;
    double fpr90 = 0.0;
    double seconds = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;  ///< sample (n - 1) std; 0 for a single seed
};

Aggregate aggregate(std::span<const double> values);

struct GridRow {
    std::string experiment;
    std::vector<SeedOutcome> seeds;
    Aggregate auroc, auprc, fpr90, seconds;
};

struct GridFailure {
    std::string experiment;
    std::int64_t seed = 0;
    std::string message;
};

struct GridResult {
    std::vector<GridRow> rows;  ///< ranked
    std::vector<GridFailure> failures;
};

struct GridConfig {
    std::vector<ExperimentSpec> experiments;
    std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
    eval::LabelRule rule = eval::LabelRule::automatic();
    unsigned threads = 1;  ///< configurations evaluated concurrently
};

/// Ranked by mean AUROC (desc), then mean seconds (asc), then name. A
/// configuration that fails on some seed keeps its successful seeds; one that
/// fails on every seed appears only in failures.
GridResult grid_search(const GridConfig& config, const PipelineData& data);

/// Columns: experiment, auroc_mean, auroc_std, auprc_mean, auprc_std,
/// fpr90_mean, fpr90_std, seconds_mean, seconds_std.
std::string format_grid_csv(const GridResult& result);

}  // namespace oodkit::pipeline
