// oodkit command line: reduce, fit, score, output-score, seg-metrics,
// evaluate, pipeline, grid-search, reject, export-scatter.
//
// Exit status: 0 when every image (or seed, or grid cell) succeeded, 1 when
// some failed (listed in <out>/errors.json and on stderr), 2 on a fatal error.

#include "oodkit/config.hpp"
#include "oodkit/detectors.hpp"
#include "oodkit/error.hpp"
#include "oodkit/evaluation.hpp"
#include "oodkit/manifest.hpp"
#include "oodkit/pipeline.hpp"
#include "oodkit/reduction.hpp"
#include "oodkit/scorers.hpp"
#include "oodkit/segmetrics.hpp"
#include "oodkit/tensor.hpp"
#include "oodkit/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oodkit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Globals {
    std::string config;
    std::string out;
    std::string seeds;
    std::string train_manifest;
    std::string test_manifest;
    int threads = 0;
    bool quiet = false;
};

struct ItemError {
    std::string id;
    std::string code;
    std::string message;
};

class ErrorList {
public:
    void add(std::string id, const std::exception& e) {
        std::string code = "Error";
        if (const auto* oe = dynamic_cast<const Error*>(&e)) code = std::string(to_string(oe->code()));
        std::lock_guard lock(mutex_);
        items_.push_back({std::move(id), std::move(code), e.what()});
    }
    bool empty() const { return items_.empty(); }

    json to_json() const {
        auto sorted = items_;
        std::stable_sort(sorted.begin(), sorted.end(), [](const ItemError& a, const ItemError& b) { return a.id < b.id; });
        json list = json::array();
        for (const auto& e : sorted) list.push_back({{"id", e.id}, {"code", e.code}, {"message", e.message}});
        return {{"errors", list}};
    }

private:
    std::mutex mutex_;
    std::vector<ItemError> items_;
};

struct Context {
    Globals g;
    config::RunConfig cfg;
    unsigned threads = 1;

    void say(const std::string& line) const {
        if (!g.quiet) std::cout << line << '\n';
    }

    fs::path out_dir() const {
        if (cfg.out_dir.empty()) throw Error(ErrorCode::BadConfig, "no output directory; pass --out or set io.out_dir");
        return cfg.out_dir;
    }

    const fs::path& train_manifest() const {
        if (cfg.train_manifest.empty()) {
            throw Error(ErrorCode::BadConfig, "no train manifest; pass --train or set io.train_manifest");
        }
        return cfg.train_manifest;
    }

    const fs::path& test_manifest() const {
        if (cfg.test_manifest.empty()) {
            throw Error(ErrorCode::BadConfig, "no test manifest; pass --test or set io.test_manifest");
        }
        return cfg.test_manifest;
    }

    std::int64_t first_seed() const { return cfg.seeds.front(); }

    /// Writes errors.json (removing a stale one on success) and returns the exit code.
    int finish(const ErrorList& errors) const {
        const fs::path path = cfg.out_dir.empty() ? fs::path() : cfg.out_dir / "errors.json";
        if (errors.empty()) {
            if (!path.empty()) fs::remove(path);
            return 0;
        }
        const std::string text = errors.to_json().dump(2) + "\n";
        if (!path.empty()) write_file_atomic(path, text);
        std::cerr << text;
        return 1;
    }
};

Context make_context(const Globals& g) {
    Context ctx;
    ctx.g = g;
    if (!g.config.empty()) ctx.cfg = config::load_run_config(g.config);
    if (!g.out.empty()) ctx.cfg.out_dir = g.out;
    if (!g.train_manifest.empty()) ctx.cfg.train_manifest = g.train_manifest;
    if (!g.test_manifest.empty()) ctx.cfg.test_manifest = g.test_manifest;
    if (!g.seeds.empty()) ctx.cfg.seeds = config::parse_seed_list(g.seeds);
    ctx.threads = resolve_thread_count(g.threads);
    return ctx;
}

// ---- small file helpers ----------------------------------------------------

void check_id_is_filename(const std::string& id) {
    if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos) {
        throw Error(ErrorCode::BadValue, "id '" + id + "' cannot be used as a file name");
    }
}

std::string replace_seed(std::string pattern, std::int64_t seed) {
    const std::string key = "{seed}";
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos)) {
        pattern.replace(pos, key.size(), std::to_string(seed));
    }
    return pattern;
}

std::string scores_csv(const std::vector<eval::ScoredImage>& images) {
    std::string out = "id,score,seconds\n";
    for (const auto& im : images) {
        out += im.id + "," + format_double(im.score) + "," + (im.seconds ? format_double(*im.seconds) : "") + "\n";
    }
    return out;
}

std::string scatter_csv(const std::vector<eval::ScoredImage>& images) {
    std::string out = "id,score,dsc\n";
    for (const auto& im : images) out += im.id + "," + format_double(im.score) + "," + format_double(im.dsc) + "\n";
    return out;
}

struct ScoreRow {
    std::string id;
    double score = 0.0;
    std::optional<double> seconds;
};

double parse_number(const std::string& cell, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::BadValue, what + " '" + cell + "' is not a finite number");
    }
}

std::vector<ScoreRow> read_scores(const fs::path& path) {
    const auto rows = parse_csv(read_file(path));
    if (rows.empty()) throw Error(ErrorCode::MissingColumn, path.string() + " is empty");
    const auto& header = rows.front();
    auto column = [&](const char* name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = column("id");
    const auto score_col = column("score");
    if (!id_col || !score_col) throw Error(ErrorCode::MissingColumn, path.string() + " needs columns id and score");
    const auto sec_col = column("seconds");

    std::vector<ScoreRow> out;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != header.size()) {
            throw Error(ErrorCode::BadValue, path.string() + " line " + std::to_string(r + 1) + " has " +
                                                 std::to_string(row.size()) + " cells, expected " +
                                                 std::to_string(header.size()));
        }
        ScoreRow s;
        s.id = row[*id_col];
        if (!seen.insert(s.id).second) throw Error(ErrorCode::DuplicateId, path.string() + ": id '" + s.id + "' repeats");
        s.score = parse_number(row[*score_col], "score");
        if (sec_col && !row[*sec_col].empty()) s.seconds = parse_number(row[*sec_col], "seconds");
        out.push_back(std::move(s));
    }
    return out;
}

/// Joins a scores CSV with the test manifest's metrics; rows without a
/// matching test record (or without dsc) are reported and dropped.
std::vector<eval::ScoredImage> join_scores(const std::vector<ScoreRow>& scores, const DatasetManifest& manifest,
                                           ErrorList& errors) {
    std::vector<eval::ScoredImage> out;
    for (const auto& s : scores) {
        const ManifestRecord* rec = manifest.find(s.id);
        try {
            if (!rec) throw Error(ErrorCode::MissingPair, "id '" + s.id + "' is not in the test manifest");
            if (!rec->dsc) throw Error(ErrorCode::BadValue, "id '" + s.id + "' has no dsc in the test manifest");
            out.push_back({s.id, s.score, *rec->dsc, rec->hd, rec->nsd, s.seconds});
        } catch (const Error& e) {
            errors.add(s.id, e);
        }
    }
    return out;
}

json correlation_json(const std::optional<eval::Correlation>& c) {
    if (!c) return nullptr;
    return {{"r", c->r}, {"p", c->p}};
}

// Deterministic fields only; wall-clock time goes to timing.csv.
json report_json(const eval::DetectionReport& r) {
    return {{"auroc", r.auroc},
            {"auprc", r.auprc},
            {"fpr90", r.fpr90},
            {"threshold_at_tpr90", r.threshold_at_tpr90},
            {"n_id", r.n_id},
            {"n_ood", r.n_ood},
            {"label_threshold", r.label_threshold},
            {"label_fell_back", r.label_fell_back},
            {"pcc_dsc", correlation_json(r.pcc_dsc)},
            {"pcc_hd", correlation_json(r.pcc_hd)},
            {"pcc_nsd", correlation_json(r.pcc_nsd)}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct TimingRow {
    std::string stage;
    std::string seed;
    double seconds;
};

void write_timing(const fs::path& path, const std::vector<TimingRow>& rows) {
    std::string out = "stage,seed,seconds\n";
    for (const auto& r : rows) out += r.stage + "," + r.seed + "," + format_double(r.seconds) + "\n";
    write_file_atomic(path, out);
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json spec_json(const pipeline::ExperimentSpec& spec) {
    const auto& r = spec.reduction;
    return {{"experiment", spec.name()},
            {"reduction",
             {{"name", r.name()},
              {"kernel", r.kernel},
              {"stride", r.stride},
              {"n_components", r.n_components},
              {"patch_mean_first", r.patch_mean_first},
              {"external_manifest", r.external_manifest}}},
            {"detector", spec.detector.name()}};
}

// ---- reduce ------------------------------------------------------------------

void write_reduced_split(const fs::path& dir, const std::vector<ManifestRecord>& records,
                         const std::vector<std::optional<Tensor>>& reduced, const fs::path& manifest_path) {
    DatasetManifest m;
    m.base_dir = manifest_path.parent_path();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!reduced[i]) continue;
        ManifestRecord rec = records[i];
        rec.embedding_path = fs::path(dir.filename()) / (rec.id + ".npy");
        write_npy(*reduced[i], dir / (rec.id + ".npy"));
        m.records.push_back(std::move(rec));
    }
    write_manifest(m, manifest_path);
}

int cmd_reduce(const Context& ctx) {
    const auto& spec = ctx.cfg.experiment.reduction;
    const bool external = spec.method == pipeline::ReductionMethod::External;
    const auto out = ctx.out_dir() / "reduced";
    fs::create_directories(out);
    ErrorList errors;

    if (spec.method == pipeline::ReductionMethod::None) {
        // Identity: derived manifests point at the original files.
        for (auto [src, split, name] : {std::tuple{ctx.train_manifest(), Split::Train, "train.csv"},
                                        std::tuple{ctx.test_manifest(), Split::Test, "test.csv"}}) {
            const auto m = load_manifest(src);
            DatasetManifest derived;
            for (const auto* rec : m.with_split(split)) {
                ManifestRecord copy = *rec;
                copy.embedding_path = fs::absolute(m.resolve(rec->embedding_path)).lexically_normal();
                if (copy.logits_path) copy.logits_path = fs::absolute(m.resolve(*copy.logits_path)).lexically_normal();
                if (copy.stack_path) copy.stack_path = fs::absolute(m.resolve(*copy.stack_path)).lexically_normal();
                derived.records.push_back(std::move(copy));
            }
            write_manifest(derived, out / name);
        }
        ctx.say("wrote " + (out / "train.csv").string() + " and " + (out / "test.csv").string());
        return ctx.finish(errors);
    }

    const auto data = pipeline::load_data(ctx.train_manifest(), ctx.test_manifest(), !external);
    std::vector<std::optional<Tensor>> train(data.train.records.size()), test(data.test.records.size());

    if (spec.method == pipeline::ReductionMethod::Pca || external) {
        // Whole-split methods: any failure aborts, since the fit needs every training image.
        const auto reduced = pipeline::reduce(data, spec, ctx.first_seed());
        auto rows = [](const SampleMatrix& m, std::vector<std::optional<Tensor>>& dst) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                const auto n = static_cast<std::size_t>(m.cols());
                dst[static_cast<std::size_t>(r)] = Tensor({n}, std::vector<double>(m.row(r).data(), m.row(r).data() + n));
            }
        };
        rows(reduced.train, train);
        rows(reduced.test, test);
        if (reduced.pca) reduction::save_pca(*reduced.pca, out / "pca");
    } else {
        auto one = [&](const pipeline::SplitData& split, std::vector<std::optional<Tensor>>& dst) {
            parallel_for(split.records.size(), ctx.threads, [&](std::size_t i) {
                try {
                    dst[i] = pipeline::reduce_one(split.embeddings[i], spec, nullptr);
                } catch (const std::exception& e) {
                    errors.add(split.records[i].id, e);
                }
            });
        };
        one(data.train, train);
        one(data.test, test);
    }

    for (const auto& split : {&data.train, &data.test}) {
        for (std::size_t i = 0; i < split->records.size(); ++i) {
            try {
                check_id_is_filename(split->records[i].id);
            } catch (const Error& e) {
                errors.add(split->records[i].id, e);
                (split == &data.train ? train : test)[i].reset();
            }
        }
    }
    fs::create_directories(out / "train");
    fs::create_directories(out / "test");
    write_reduced_split(out / "train", data.train.records, train, out / "train.csv");
    write_reduced_split(out / "test", data.test.records, test, out / "test.csv");
    ctx.say("reduced " + std::to_string(train.size() + test.size()) + " images with " + spec.name() + " into " +
            out.string());
    return ctx.finish(errors);
}

// ---- fit / score ---------------------------------------------------------------

int cmd_fit(const Context& ctx) {
    const auto& spec = ctx.cfg.experiment;
    const bool external = spec.reduction.method == pipeline::ReductionMethod::External;
    const auto data = pipeline::load_data(ctx.train_manifest(), ctx.test_manifest(), !external);
    const auto dir = ctx.out_dir() / "model";
    fs::create_directories(dir);

    const auto reduced = pipeline::reduce(data, spec.reduction, ctx.first_seed());
    auto start = Clock::now();
    const auto detector = pipeline::fit_detector(reduced.train, spec.detector);
    const double fit_seconds = seconds_since(start);

    fs::remove_all(dir / "pca");
    fs::remove_all(dir / "detector");
    if (reduced.pca) reduction::save_pca(*reduced.pca, dir / "pca");
    if (const auto* g = std::get_if<detectors::GaussianModel>(&detector)) {
        detectors::save_gaussian(*g, dir / "detector");
    } else {
        detectors::save_knn(std::get<detectors::KnnIndex>(detector), dir / "detector");
    }
    json meta = spec_json(spec);
    meta["seed"] = ctx.first_seed();
    meta["n_train"] = reduced.train.rows();
    meta["dim"] = reduced.train.cols();
    write_json(dir / "experiment.json", meta);
    write_timing(ctx.out_dir() / "fit_timing.csv",
                 {{"reduce", std::to_string(ctx.first_seed()), reduced.seconds},
                  {"fit", std::to_string(ctx.first_seed()), fit_seconds}});
    ctx.say("fitted " + spec.name() + " on " + std::to_string(reduced.train.rows()) + " training images -> " +
            dir.string());
    return 0;
}

int cmd_score(const Context& ctx, const std::string& model_flag) {
    const auto& spec = ctx.cfg.experiment;
    const fs::path dir = model_flag.empty() ? ctx.out_dir() / "model" : fs::path(model_flag);
    const json meta = json::parse(read_file(dir / "experiment.json"));
    if (meta.at("experiment").get<std::string>() != spec.name()) {
        throw Error(ErrorCode::BadConfig, "model in " + dir.string() + " was fitted for " +
                                              meta.at("experiment").get<std::string>() + ", config describes " +
                                              spec.name());
    }
    std::optional<reduction::PcaModel> pca;
    if (spec.reduction.method == pipeline::ReductionMethod::Pca) pca = reduction::load_pca(dir / "pca");
    pipeline::Detector detector;
    if (spec.detector.kind == pipeline::DetectorKind::Mahalanobis) {
        detector = detectors::load_gaussian(dir / "detector");
    } else {
        detector = detectors::load_knn(dir / "detector");
    }

    const auto test = load_manifest(ctx.test_manifest());
    const auto records = test.with_split(Split::Test);
    std::optional<DatasetManifest> external;
    if (spec.reduction.method == pipeline::ReductionMethod::External) {
        external = load_manifest(replace_seed(spec.reduction.external_manifest, ctx.first_seed()));
    }

    ErrorList errors;
    std::vector<std::optional<eval::ScoredImage>> scored(records.size());
    const auto start = Clock::now();
    parallel_for(records.size(), ctx.threads, [&](std::size_t i) {
        const ManifestRecord& rec = *records[i];
        try {
            Tensor x;
            if (external) {
                const ManifestRecord* ext = external->find(rec.id);
                if (!ext) throw Error(ErrorCode::MissingFiles, "no reduced embedding for id '" + rec.id + "'");
                x = read_npy(external->resolve(ext->embedding_path));
            } else {
                x = pipeline::reduce_one(read_npy(test.resolve(rec.embedding_path)), spec.reduction,
                                         pca ? &*pca : nullptr);
            }
            const auto t0 = Clock::now();
            const double s = pipeline::score_one(detector, x.data());
            scored[i] = eval::ScoredImage{rec.id, s, rec.dsc.value_or(0.0), rec.hd, rec.nsd, seconds_since(t0)};
        } catch (const std::exception& e) {
            errors.add(rec.id, e);
        }
    });
    const double total = seconds_since(start);

    std::vector<eval::ScoredImage> ok;
    for (auto& s : scored) {
        if (s) ok.push_back(std::move(*s));
    }
    write_file_atomic(ctx.out_dir() / "scores.csv", scores_csv(ok));
    write_timing(ctx.out_dir() / "score_timing.csv", {{"score", std::to_string(ctx.first_seed()), total}});
    ctx.say("scored " + std::to_string(ok.size()) + " of " + std::to_string(records.size()) + " test images -> " +
            (ctx.out_dir() / "scores.csv").string());
    return ctx.finish(errors);
}

// ---- output-score -----------------------------------------------------------------

int cmd_output_score(const Context& ctx, const std::string& method, double temperature) {
    if (method != "msp" && method != "energy" && method != "uncertainty") {
        throw Error(ErrorCode::BadConfig, "unknown output score '" + method + "' (msp, energy, uncertainty)");
    }
    if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
    const auto test = load_manifest(ctx.test_manifest());
    const auto records = test.with_split(Split::Test);
    ErrorList errors;
    std::vector<std::optional<eval::ScoredImage>> scored(records.size());
    parallel_for(records.size(), ctx.threads, [&](std::size_t i) {
        const ManifestRecord& rec = *records[i];
        try {
            const auto& path = method == "uncertainty" ? rec.stack_path : rec.logits_path;
            if (!path) {
                throw Error(ErrorCode::BadValue,
                            "id '" + rec.id + "' has no " + (method == "uncertainty" ? "stack" : "logits") + " file");
            }
            const Tensor t = read_npy(test.resolve(*path));
            const auto t0 = Clock::now();
            double s = 0.0;
            if (method == "msp") s = scorers::msp_score(t, temperature);
            else if (method == "energy") s = scorers::energy_score(t, temperature);
            else s = scorers::uncertainty_score(t);
            scored[i] = eval::ScoredImage{rec.id, s, rec.dsc.value_or(0.0), rec.hd, rec.nsd, seconds_since(t0)};
        } catch (const std::exception& e) {
            errors.add(rec.id, e);
        }
    });
    std::vector<eval::ScoredImage> ok;
    for (auto& s : scored) {
        if (s) ok.push_back(std::move(*s));
    }
    const auto path = ctx.out_dir() / (method + "_scores.csv");
    write_file_atomic(path, scores_csv(ok));
    ctx.say("wrote " + std::to_string(ok.size()) + " " + method + " scores -> " + path.string());
    return ctx.finish(errors);
}

// ---- seg-metrics -------------------------------------------------------------------

std::optional<seg::Spacing> parse_spacing(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto rows = parse_csv(text);
    if (rows.size() != 1 || rows[0].size() != 3) {
        throw Error(ErrorCode::BadConfig, "--spacing expects three comma-separated values sz,sy,sx");
    }
    seg::Spacing s{};
    for (std::size_t i = 0; i < 3; ++i) {
        s[i] = parse_number(rows[0][i], "spacing");
        if (!(s[i] > 0.0)) throw Error(ErrorCode::BadConfig, "spacing values must be positive");
    }
    return s;
}

// Sidecar <stem>.json next to a mask: {"spacing": [sz, sy, sx]}.
std::optional<seg::Spacing> sidecar_spacing(const fs::path& mask) {
    auto path = mask;
    path.replace_extension(".json");
    if (!fs::exists(path)) return std::nullopt;
    const json j = json::parse(read_file(path));
    const auto v = j.at("spacing").get<std::vector<double>>();
    if (v.size() != 3) throw Error(ErrorCode::BadValue, path.string() + ": spacing needs three values");
    return seg::Spacing{v[0], v[1], v[2]};
}

std::map<std::string, fs::path> list_masks(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
    std::map<std::string, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".npy") {
            out.emplace(entry.path().stem().string(), entry.path());
        }
    }
    return out;
}

int cmd_seg_metrics(const Context& ctx, const std::string& pred_dir, const std::string& gt_dir,
                    const std::string& spacing_text, double tau) {
    const auto forced = parse_spacing(spacing_text);
    if (tau <= 0.0) tau = ctx.cfg.nsd_tau_mm;
    const auto preds = list_masks(pred_dir);
    const auto gts = list_masks(gt_dir);
    std::set<std::string> ids;
    for (const auto& [id, _] : preds) ids.insert(id);
    for (const auto& [id, _] : gts) ids.insert(id);
    const std::vector<std::string> order(ids.begin(), ids.end());

    ErrorList errors;
    std::vector<std::optional<seg::SegMetrics>> results(order.size());
    parallel_for(order.size(), ctx.threads, [&](std::size_t i) {
        const auto& id = order[i];
        try {
            const auto p = preds.find(id);
            const auto g = gts.find(id);
            if (p == preds.end()) throw Error(ErrorCode::MissingPair, "no prediction for '" + id + "'");
            if (g == gts.end()) throw Error(ErrorCode::MissingPair, "no reference for '" + id + "'");
            seg::Spacing spacing{1.0, 1.0, 1.0};
            if (forced) spacing = *forced;
            else if (auto s = sidecar_spacing(g->second)) spacing = *s;
            else if (auto s2 = sidecar_spacing(p->second)) spacing = *s2;
            const auto pred = seg::mask_from_tensor(read_npy_any_numeric(p->second), spacing);
            const auto ref = seg::mask_from_tensor(read_npy_any_numeric(g->second), spacing);
            results[i] = seg::evaluate(pred, ref, tau);
        } catch (const std::exception& e) {
            errors.add(id, e);
        }
    });

    std::string csv = "id,dsc,hd,nsd\n";
    std::size_t n = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (!results[i]) continue;
        ++n;
        csv += order[i] + "," + format_double(results[i]->dsc) + "," + format_double(results[i]->hd) + "," +
               format_double(results[i]->nsd) + "\n";
    }
    const auto path = ctx.out_dir() / "seg_metrics.csv";
    write_file_atomic(path, csv);
    ctx.say("wrote metrics for " + std::to_string(n) + " of " + std::to_string(order.size()) + " masks -> " +
            path.string());
    return ctx.finish(errors);
}

// ---- evaluate / reject / export-scatter ------------------------------------------------

fs::path scores_path(const Context& ctx, const std::string& flag) {
    return flag.empty() ? ctx.out_dir() / "scores.csv" : fs::path(flag);
}

int cmd_evaluate(const Context& ctx, const std::string& scores_flag) {
    ErrorList errors;
    const auto images = join_scores(read_scores(scores_path(ctx, scores_flag)), load_manifest(ctx.test_manifest()), errors);
    double seconds = 0.0;
    for (const auto& im : images) seconds += im.seconds.value_or(0.0);
    const auto report = eval::evaluate(images, ctx.cfg.rule, seconds);
    write_json(ctx.out_dir() / "report.json", report_json(report));
    write_timing(ctx.out_dir() / "timing.csv", {{"score", "", seconds}});
    std::ostringstream line;
    line << "AUROC " << report.auroc << "  AUPRC " << report.auprc << "  FPR90 " << report.fpr90 << "  (n_id "
         << report.n_id << ", n_ood " << report.n_ood << ")";
    ctx.say(line.str());
    return ctx.finish(errors);
}

int cmd_reject(const Context& ctx, const std::string& scores_flag, double tpr) {
    ErrorList errors;
    const auto images = join_scores(read_scores(scores_path(ctx, scores_flag)), load_manifest(ctx.test_manifest()), errors);
    const auto labels = eval::label(images, ctx.cfg.rule);
    const auto r = eval::reject_at_tpr(images, labels.is_ood, tpr);
    write_json(ctx.out_dir() / "rejection.json", {{"tpr_target", tpr},
                                                  {"label_threshold", labels.threshold},
                                                  {"threshold", r.threshold},
                                                  {"n_rejected", r.n_rejected},
                                                  {"n_rejected_ood", r.n_rejected_ood},
                                                  {"n_retained", r.n_retained},
                                                  {"delta_dsc", r.delta_dsc},
                                                  {"delta_hd", optional_json(r.delta_hd)},
                                                  {"delta_nsd", optional_json(r.delta_nsd)}});
    std::ostringstream line;
    line << "rejected " << r.n_rejected << " (" << r.n_rejected_ood << " OOD), delta DSC " << r.delta_dsc;
    ctx.say(line.str());
    return ctx.finish(errors);
}

int cmd_export_scatter(const Context& ctx, const std::string& scores_flag) {
    ErrorList errors;
    const auto images = join_scores(read_scores(scores_path(ctx, scores_flag)), load_manifest(ctx.test_manifest()), errors);
    write_file_atomic(ctx.out_dir() / "scatter.csv", scatter_csv(images));
    ctx.say("wrote " + std::to_string(images.size()) + " points -> " + (ctx.out_dir() / "scatter.csv").string());
    return ctx.finish(errors);
}

// ---- pipeline / grid-search --------------------------------------------------------------

int cmd_pipeline(const Context& ctx) {
    const auto& spec = ctx.cfg.experiment;
    const bool external = spec.reduction.method == pipeline::ReductionMethod::External;
    const auto data = pipeline::load_data(ctx.train_manifest(), ctx.test_manifest(), !external);
    const auto out = ctx.out_dir();
    ErrorList errors;
    std::vector<TimingRow> timing;
    json per_seed = json::array();
    std::vector<double> auroc, auprc, fpr90;

    for (std::int64_t seed : ctx.cfg.seeds) {
        const std::string tag = std::to_string(seed);
        try {
            const auto run = pipeline::run_experiment(data, spec, seed, {ctx.cfg.rule, ctx.threads});
            const auto dir = out / ("seed_" + tag);
            fs::create_directories(dir);
            json rep = report_json(run.report);
            rep["seed"] = seed;
            if (run.jitter_used) rep["jitter_used"] = *run.jitter_used;
            write_json(dir / "report.json", rep);
            write_file_atomic(dir / "scores.csv", scores_csv(run.scored));
            write_file_atomic(dir / "scatter.csv", scatter_csv(run.scored));
            timing.push_back({"reduce", tag, run.reduce_seconds});
            timing.push_back({"fit", tag, run.fit_seconds});
            timing.push_back({"score", tag, run.report.seconds});
            per_seed.push_back(rep);
            auroc.push_back(run.report.auroc);
            auprc.push_back(run.report.auprc);
            fpr90.push_back(run.report.fpr90);
            std::ostringstream line;
            line << "seed " << seed << ": AUROC " << run.report.auroc << "  AUPRC " << run.report.auprc << "  FPR90 "
                 << run.report.fpr90;
            ctx.say(line.str());
        } catch (const std::exception& e) {
            errors.add("seed " + tag, e);
        }
    }
    auto agg = [](const std::vector<double>& v) {
        const auto a = pipeline::aggregate(v);
        return json{{"mean", a.mean}, {"std", a.std}};
    };
    json summary = spec_json(spec);
    summary["seeds"] = per_seed;
    if (!auroc.empty()) summary["aggregate"] = {{"auroc", agg(auroc)}, {"auprc", agg(auprc)}, {"fpr90", agg(fpr90)}};
    write_json(out / "report.json", summary);
    write_timing(out / "timing.csv", timing);
    return ctx.finish(errors);
}

int cmd_grid_search(const Context& ctx) {
    if (ctx.cfg.grid.empty()) throw Error(ErrorCode::BadConfig, "config has no 'grid' section");
    const bool all_external = std::all_of(ctx.cfg.grid.begin(), ctx.cfg.grid.end(), [](const auto& s) {
        return s.reduction.method == pipeline::ReductionMethod::External;
    });
    const auto data = pipeline::load_data(ctx.train_manifest(), ctx.test_manifest(), !all_external);
    pipeline::GridConfig grid;
    grid.experiments = ctx.cfg.grid;
    grid.seeds = ctx.cfg.seeds;
    grid.rule = ctx.cfg.rule;
    grid.threads = ctx.threads;
    const auto result = pipeline::grid_search(grid, data);
    write_file_atomic(ctx.out_dir() / "grid.csv", pipeline::format_grid_csv(result));

    ErrorList errors;
    for (const auto& f : result.failures) {
        errors.add(f.experiment + " seed " + std::to_string(f.seed), std::runtime_error(f.message));
    }
    ctx.say("ranked " + std::to_string(result.rows.size()) + " of " + std::to_string(grid.experiments.size()) +
            " configurations -> " + (ctx.out_dir() / "grid.csv").string());
    if (!result.rows.empty()) {
        std::ostringstream line;
        line << "best: " << result.rows.front().experiment << "  AUROC " << result.rows.front().auroc.mean;
        ctx.say(line.str());
    }
    return ctx.finish(errors);
}

void fatal(const std::exception& e) {
    std::string code = "Error";
    if (const auto* oe = dynamic_cast<const Error*>(&e)) code = std::string(to_string(oe->code()));
    std::cerr << json{{"error", {{"code", code}, {"message", e.what()}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oodkit: distance-based out-of-distribution detection for segmentation embeddings"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "run configuration JSON");
    app.add_option("--out", g.out, "output directory (overrides io.out_dir)");
    app.add_option("--seeds", g.seeds, "comma-separated seeds (overrides config)");
    app.add_option("--threads", g.threads, "worker threads (default: $OODKIT_THREADS or 1)")->check(CLI::NonNegativeNumber);
    app.add_option("--train", g.train_manifest, "train manifest CSV (overrides io.train_manifest)");
    app.add_option("--test", g.test_manifest, "test manifest CSV (overrides io.test_manifest)");
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    std::string model_dir, scores_file, method = "energy", pred_dir, gt_dir, spacing;
    double temperature = 1.0, tau = 0.0, tpr = 0.90;

    auto* reduce = app.add_subcommand("reduce", "reduce embeddings and write a derived manifest");
    auto* fit = app.add_subcommand("fit", "fit the configured reduction and detector on the train split");
    auto* score = app.add_subcommand("score", "score the test split with a fitted model");
    score->add_option("--model", model_dir, "model directory (default <out>/model)");
    auto* output = app.add_subcommand("output-score", "score test images from segmentation outputs");
    output->add_option("--method", method, "msp, energy or uncertainty")->capture_default_str();
    output->add_option("--temperature", temperature, "softmax temperature")->capture_default_str();
    auto* segm = app.add_subcommand("seg-metrics", "DSC, Hausdorff and NSD for matching mask files");
    segm->add_option("--pred", pred_dir, "directory of predicted masks (.npy)")->required();
    segm->add_option("--gt", gt_dir, "directory of reference masks (.npy)")->required();
    segm->add_option("--spacing", spacing, "voxel spacing sz,sy,sx in mm (default: <stem>.json sidecar or 1,1,1)");
    segm->add_option("--tau", tau, "NSD tolerance in mm (default: config nsd_tau_mm or 2)");
    auto* evaluate = app.add_subcommand("evaluate", "detection metrics for a scores CSV");
    evaluate->add_option("--scores", scores_file, "scores CSV (default <out>/scores.csv)");
    auto* pipe = app.add_subcommand("pipeline", "reduce, fit, score and evaluate for every seed");
    auto* grid = app.add_subcommand("grid-search", "rank every configuration of the config's grid");
    auto* reject = app.add_subcommand("reject", "reject images at a TPR target and report metric changes");
    reject->add_option("--scores", scores_file, "scores CSV (default <out>/scores.csv)");
    reject->add_option("--tpr", tpr, "target true positive rate")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    auto* scatter = app.add_subcommand("export-scatter", "write id,score,dsc for score-vs-DSC plots");
    scatter->add_option("--scores", scores_file, "scores CSV (default <out>/scores.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const Context ctx = make_context(g);
        if (reduce->parsed()) return cmd_reduce(ctx);
        if (fit->parsed()) return cmd_fit(ctx);
        if (score->parsed()) return cmd_score(ctx, model_dir);
        if (output->parsed()) return cmd_output_score(ctx, method, temperature);
        if (segm->parsed()) return cmd_seg_metrics(ctx, pred_dir, gt_dir, spacing, tau);
        if (evaluate->parsed()) return cmd_evaluate(ctx, scores_file);
        if (pipe->parsed()) return cmd_pipeline(ctx);
        if (grid->parsed()) return cmd_grid_search(ctx);
        if (reject->parsed()) return cmd_reject(ctx, scores_file, tpr);
        if (scatter->parsed()) return cmd_export_scatter(ctx, scores_file);
    } catch (const std::exception& e) {
        fatal(e);
        return 2;
    }
    return 2;
}
