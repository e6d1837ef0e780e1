#include "oodkit/error.hpp"
#include "oodkit/pipeline.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace oodkit::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string with_id(const std::string& id, const std::exception& e) { return "image '" + id + "': " + e.what(); }

SplitData load_split(const DatasetManifest& manifest, Split split, bool load_embeddings) {
    SplitData out;
    for (const ManifestRecord* rec : manifest.with_split(split)) {
        out.records.push_back(*rec);
        if (!load_embeddings) continue;
        try {
            out.embeddings.push_back(read_npy(manifest.resolve(rec->embedding_path)));
        } catch (const Error& e) {
            throw Error(e.code(), with_id(rec->id, e));
        }
    }
    return out;
}

std::string replace_seed(std::string pattern, std::int64_t seed) {
    const std::string key = "{seed}";
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos)) {
        pattern.replace(pos, key.size(), std::to_string(seed));
    }
    return pattern;
}

std::vector<std::size_t> training_subset(std::size_t n, double fraction, std::int64_t seed, const std::string& name) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (fraction >= 1.0) return idx;
    if (!(fraction > 0.0)) throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1]");
    std::mt19937_64 rng(stream_seed(seed, name));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto keep = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
    idx.resize(std::min(keep, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

Tensor pre_reduce(const Tensor& t, const ReductionSpec& spec) {
    Tensor cur = spec.patch_mean_first ? reduction::patch_mean_pool(t) : t;
    switch (spec.method) {
        case ReductionMethod::Pool2d:
            return reduction::avg_pool(cur, {reduction::PoolDims::Pool2d, spec.kernel, spec.stride});
        case ReductionMethod::Pool3d:
            return reduction::avg_pool(cur, {reduction::PoolDims::Pool3d, spec.kernel, spec.stride});
        case ReductionMethod::PatchMean:
            return spec.patch_mean_first ? cur : reduction::patch_mean_pool(cur);
        default:
            return cur;
    }
}

SampleMatrix stack_reduced(const std::vector<ManifestRecord>& records, const std::vector<Tensor>& tensors,
                           const std::vector<std::size_t>& rows, const ReductionSpec& spec) {
    std::vector<Tensor> reduced;
    reduced.reserve(rows.size());
    for (std::size_t i : rows) {
        try {
            reduced.push_back(pre_reduce(tensors[i], spec));
        } catch (const Error& e) {
            throw Error(e.code(), with_id(records[i].id, e));
        }
    }
    for (std::size_t r = 0; r < reduced.size(); ++r) {
        if (reduced[r].size() != reduced.front().size()) {
            throw Error(ErrorCode::ShapeMismatch, "image '" + records[rows[r]].id + "' reduces to " +
                                                      std::to_string(reduced[r].size()) + " features, expected " +
                                                      std::to_string(reduced.front().size()));
        }
    }
    return stack_rows(reduced);
}

Reduced reduce_external(const PipelineData& data, const ReductionSpec& spec, std::int64_t seed,
                        const std::vector<std::size_t>& train_rows) {
    const std::filesystem::path manifest_path = replace_seed(spec.external_manifest, seed);
    if (manifest_path.empty()) throw Error(ErrorCode::BadConfig, "external reduction needs a manifest path");
    if (!std::filesystem::exists(manifest_path)) {
        throw Error(ErrorCode::MissingFiles, "external manifest " + manifest_path.string() + " does not exist");
    }
    const DatasetManifest external = load_manifest(manifest_path);

    std::vector<std::string> missing;
    auto locate = [&](const std::string& id) -> std::filesystem::path {
        const ManifestRecord* rec = external.find(id);
        if (!rec) {
            missing.push_back(id);
            return {};
        }
        auto p = external.resolve(rec->embedding_path);
        if (!std::filesystem::exists(p)) {
            missing.push_back(id);
            return {};
        }
        return p;
    };
    std::vector<std::filesystem::path> train_paths, test_paths;
    for (std::size_t i : train_rows) train_paths.push_back(locate(data.train.records[i].id));
    for (const auto& rec : data.test.records) test_paths.push_back(locate(rec.id));
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw Error(ErrorCode::MissingFiles,
                    "reduced embeddings missing in " + manifest_path.string() + " for ids: " + list);
    }
    auto load_all = [](const std::vector<std::filesystem::path>& paths) {
        std::vector<Tensor> out;
        out.reserve(paths.size());
        for (const auto& p : paths) out.push_back(read_npy(p));
        return stack_rows(out);
    };
    Reduced out;
    out.train = load_all(train_paths);
    out.test = load_all(test_paths);
    if (out.train.cols() != out.test.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "external train and test embeddings differ in length");
    }
    return out;
}

Reduced reduce_rows(const PipelineData& data, const ReductionSpec& spec, std::int64_t seed,
                    const std::vector<std::size_t>& train_rows) {
    const auto start = Clock::now();
    Reduced out;
    if (spec.method == ReductionMethod::External) {
        out = reduce_external(data, spec, seed, train_rows);
        out.seconds = seconds_since(start);
        return out;
    }
    if (data.train.embeddings.size() != data.train.records.size() ||
        data.test.embeddings.size() != data.test.records.size()) {
        throw Error(ErrorCode::InvalidArgument, "embeddings were not loaded");
    }
    std::vector<std::size_t> all_test(data.test.records.size());
    std::iota(all_test.begin(), all_test.end(), 0);
    out.train = stack_reduced(data.train.records, data.train.embeddings, train_rows, spec);
    out.test = stack_reduced(data.test.records, data.test.embeddings, all_test, spec);
    if (out.train.cols() != out.test.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "train embeddings reduce to " + std::to_string(out.train.cols()) +
                                                  " features but test embeddings to " +
                                                  std::to_string(out.test.cols()));
    }
    if (spec.method == ReductionMethod::Pca) {
        out.pca = reduction::pca_fit(out.train, spec.n_components);
        out.train = reduction::pca_transform(*out.pca, out.train);
        out.test = reduction::pca_transform(*out.pca, out.test);
    }
    out.seconds = seconds_since(start);
    return out;
}

}  // namespace

std::string ReductionSpec::name() const {
    std::string base;
    switch (method) {
        case ReductionMethod::None: base = "none"; break;
        case ReductionMethod::Pool2d:
            base = "pool2d(j=" + std::to_string(kernel) + ",s=" + std::to_string(stride) + ")";
            break;
        case ReductionMethod::Pool3d:
            base = "pool3d(j=" + std::to_string(kernel) + ",s=" + std::to_string(stride) + ")";
            break;
        case ReductionMethod::PatchMean: return "patchmean";
        case ReductionMethod::Pca: base = "pca(n=" + std::to_string(n_components) + ")"; break;
        case ReductionMethod::External: base = "external(" + external_manifest + ")"; break;
    }
    return patch_mean_first ? "patchmean+" + base : base;
}

std::string DetectorSpec::name() const {
    return kind == DetectorKind::Mahalanobis ? "md" : "knn(k=" + std::to_string(k) + ")";
}

std::string ExperimentSpec::name() const {
    std::string out = reduction.name() + "/" + detector.name();
    if (train_fraction < 1.0) {
        std::ostringstream f;
        f << train_fraction;
        out += "/frac=" + f.str();
    }
    return out;
}

PipelineData load_data(const std::filesystem::path& train_manifest, const std::filesystem::path& test_manifest,
                       bool load_embeddings) {
    PipelineData data;
    data.train_manifest = load_manifest(train_manifest);
    data.test_manifest = load_manifest(test_manifest);
    data.train = load_split(data.train_manifest, Split::Train, load_embeddings);
    data.test = load_split(data.test_manifest, Split::Test, load_embeddings);
    if (data.train.records.empty()) {
        throw Error(ErrorCode::TooFewSamples, train_manifest.string() + " has no train records");
    }
    if (data.test.records.size() < 2) {
        throw Error(ErrorCode::TooFewSamples, test_manifest.string() + " needs at least two test records");
    }
    return data;
}

Reduced reduce(const PipelineData& data, const ReductionSpec& spec, std::int64_t seed) {
    std::vector<std::size_t> rows(data.train.records.size());
    std::iota(rows.begin(), rows.end(), 0);
    return reduce_rows(data, spec, seed, rows);
}

Tensor reduce_one(const Tensor& embedding, const ReductionSpec& spec, const reduction::PcaModel* pca) {
    Tensor cur = pre_reduce(embedding, spec);
    if (spec.method == ReductionMethod::Pca) {
        if (!pca) throw Error(ErrorCode::InvalidArgument, "PCA reduction needs a fitted model");
        auto scores = reduction::pca_transform(*pca, cur);
        const std::size_t n = scores.size();
        return Tensor({n}, std::move(scores));
    }
    return cur;
}

Detector fit_detector(const SampleMatrix& train, const DetectorSpec& spec) {
    if (spec.kind == DetectorKind::Mahalanobis) return detectors::gaussian_fit(train);
    return detectors::knn_fit(train, spec.k);
}

double score_one(const Detector& detector, std::span<const double> x) {
    if (const auto* g = std::get_if<detectors::GaussianModel>(&detector)) return detectors::mahalanobis(*g, x);
    return detectors::knn_score(std::get<detectors::KnnIndex>(detector), x);
}

std::vector<double> score_all(const Detector& detector, const SampleMatrix& test, unsigned threads,
                              std::vector<double>* seconds) {
    std::vector<double> scores(static_cast<std::size_t>(test.rows()));
    if (seconds) seconds->assign(scores.size(), 0.0);
    const auto cols = static_cast<std::size_t>(test.cols());
    parallel_for(scores.size(), threads, [&](std::size_t i) {
        const auto start = Clock::now();
        scores[i] = score_one(detector, std::span<const double>(test.row(static_cast<Eigen::Index>(i)).data(), cols));
        if (seconds) (*seconds)[i] = seconds_since(start);
    });
    return scores;
}

std::vector<eval::ScoredImage> attach_metrics(const std::vector<ManifestRecord>& records,
                                              const std::vector<double>& scores) {
    std::vector<eval::ScoredImage> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.dsc) throw Error(ErrorCode::BadValue, "test image '" + rec.id + "' has no dsc; evaluation needs one");
        out.push_back({rec.id, scores[i], *rec.dsc, rec.hd, rec.nsd, std::nullopt});
    }
    return out;
}

ExperimentRun score_experiment(const PipelineData& data, const ExperimentSpec& spec, std::int64_t seed,
                               unsigned threads) {
    ExperimentRun run;
    run.experiment = spec.name();
    run.seed = seed;
    const auto rows = training_subset(data.train.records.size(), spec.train_fraction, seed, run.experiment);
    const Reduced reduced = reduce_rows(data, spec.reduction, seed, rows);
    run.reduce_seconds = reduced.seconds;

    auto start = Clock::now();
    const Detector detector = fit_detector(reduced.train, spec.detector);
    run.fit_seconds = seconds_since(start);
    if (const auto* g = std::get_if<detectors::GaussianModel>(&detector)) run.jitter_used = g->jitter_used;

    start = Clock::now();
    std::vector<double> per_image;
    const auto scores = score_all(detector, reduced.test, threads, &per_image);
    run.report.seconds = seconds_since(start);

    run.scored.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& rec = data.test.records[i];
        run.scored.push_back({rec.id, scores[i], rec.dsc.value_or(0.0), rec.hd, rec.nsd, per_image[i]});
    }
    return run;
}

ExperimentRun run_experiment(const PipelineData& data, const ExperimentSpec& spec, std::int64_t seed,
                             const RunOptions& options) {
    for (const auto& rec : data.test.records) {
        if (!rec.dsc) throw Error(ErrorCode::BadValue, "test image '" + rec.id + "' has no dsc; evaluation needs one");
    }
    ExperimentRun run = score_experiment(data, spec, seed, options.threads);
    const double seconds = run.report.seconds;
    run.report = eval::evaluate(run.scored, options.rule, seconds);
    return run;
}

}  // namespace oodkit::pipeline
