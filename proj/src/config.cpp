#include "oodkit/config.hpp"
#include "oodkit/error.hpp"
#include "oodkit/util.hpp"

#include <json.hpp>

#include <charconv>
#include <string>

namespace oodkit::config {

namespace {

using nlohmann::json;
using pipeline::DetectorKind;
using pipeline::DetectorSpec;
using pipeline::ExperimentSpec;
using pipeline::ReductionMethod;
using pipeline::ReductionSpec;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

ReductionMethod parse_method(const std::string& m) {
    if (m == "none") return ReductionMethod::None;
    if (m == "pool2d") return ReductionMethod::Pool2d;
    if (m == "pool3d") return ReductionMethod::Pool3d;
    if (m == "patchmean") return ReductionMethod::PatchMean;
    if (m == "pca") return ReductionMethod::Pca;
    if (m == "external") return ReductionMethod::External;
    bad("unknown reduction method '" + m + "'");
}

template <typename T>
std::vector<T> as_list(const json& j) {
    if (j.is_array()) return j.get<std::vector<T>>();
    return {j.get<T>()};
}

std::size_t positive(const json& j, const char* what) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 1) bad(std::string(what) + " must be a positive integer");
    return j.get<std::size_t>();
}

// One reduction block may expand to many specs when its fields hold lists.
std::vector<ReductionSpec> expand_reduction(const json& block, const std::filesystem::path& base) {
    if (!block.is_object() || !block.contains("method")) bad("reduction block needs a 'method'");
    const json params = block.value("params", json::object());
    auto get = [&](const char* key) -> const json* {
        if (block.contains(key)) return &block.at(key);
        if (params.contains(key)) return &params.at(key);
        return nullptr;
    };
    const bool patch_first = get("patch_mean_first") ? get("patch_mean_first")->get<bool>() : false;

    std::vector<ReductionSpec> out;
    for (const auto& method_name : as_list<std::string>(block.at("method"))) {
        ReductionSpec base_spec;
        base_spec.method = parse_method(method_name);
        base_spec.patch_mean_first = patch_first;
        switch (base_spec.method) {
            case ReductionMethod::Pool2d:
            case ReductionMethod::Pool3d: {
                std::vector<std::pair<std::size_t, std::size_t>> pairs;
                if (const json* p = get("pairs")) {
                    for (const auto& pair : *p) {
                        if (!pair.is_array() || pair.size() != 2) bad("pooling pairs must be [kernel, stride]");
                        pairs.emplace_back(positive(pair[0], "kernel"), positive(pair[1], "stride"));
                    }
                } else {
                    const json* k = get("kernel");
                    const json* s = get("stride");
                    if (!k || !s) bad("pooling needs 'kernel' and 'stride' (or 'pairs')");
                    pairs.emplace_back(positive(*k, "kernel"), positive(*s, "stride"));
                }
                for (auto [k, s] : pairs) {
                    ReductionSpec r = base_spec;
                    r.kernel = k;
                    r.stride = s;
                    out.push_back(r);
                }
                break;
            }
            case ReductionMethod::Pca: {
                const json* n = get("n");
                if (!n) n = get("n_components");
                if (!n) bad("pca needs 'n' (number of components)");
                const json list = n->is_array() ? *n : json::array({*n});
                for (const auto& v : list) {
                    ReductionSpec r = base_spec;
                    r.n_components = positive(v, "n");
                    out.push_back(r);
                }
                break;
            }
            case ReductionMethod::External: {
                const json* m = get("manifest");
                if (!m) bad("external reduction needs 'manifest'");
                for (const auto& path : as_list<std::string>(*m)) {
                    ReductionSpec r = base_spec;
                    r.external_manifest = resolve(base, path).string();
                    out.push_back(r);
                }
                break;
            }
            default:
                out.push_back(base_spec);
        }
    }
    return out;
}

std::vector<DetectorSpec> expand_detector(const json& block) {
    if (!block.is_object() || !block.contains("type")) bad("detector block needs a 'type'");
    const json params = block.value("params", json::object());
    std::vector<DetectorSpec> out;
    for (const auto& type : as_list<std::string>(block.at("type"))) {
        if (type == "mahalanobis" || type == "md") {
            out.push_back({DetectorKind::Mahalanobis, 0});
        } else if (type == "knn") {
            const json* k = block.contains("k") ? &block.at("k") : params.contains("k") ? &params.at("k") : nullptr;
            if (!k) bad("knn needs 'k'");
            const json list = k->is_array() ? *k : json::array({*k});
            for (const auto& v : list) out.push_back({DetectorKind::Knn, positive(v, "k")});
        } else {
            bad("unknown detector '" + type + "'");
        }
    }
    return out;
}

eval::LabelRule parse_labeling(const json& j) {
    const std::string mode = j.value("mode", "auto");
    if (mode == "auto") return eval::LabelRule::automatic();
    if (mode == "median") return eval::LabelRule::median();
    if (mode == "fixed") {
        if (!j.contains("threshold")) bad("fixed labeling needs 'threshold'");
        try {
            return eval::LabelRule::fixed(j.at("threshold").get<double>());
        } catch (const Error& e) {
            bad(e.what());
        }
    }
    bad("unknown labeling mode '" + mode + "'");
}

std::vector<ExperimentSpec> expand(const json& grid, const std::filesystem::path& base, double fraction) {
    if (!grid.contains("reductions") || !grid.contains("detectors")) bad("grid needs 'reductions' and 'detectors'");
    std::vector<ReductionSpec> reductions;
    for (const auto& b : grid.at("reductions")) {
        auto r = expand_reduction(b, base);
        reductions.insert(reductions.end(), r.begin(), r.end());
    }
    std::vector<DetectorSpec> dets;
    for (const auto& b : grid.at("detectors")) {
        auto d = expand_detector(b);
        dets.insert(dets.end(), d.begin(), d.end());
    }
    std::vector<ExperimentSpec> out;
    for (const auto& r : reductions) {
        for (const auto& d : dets) out.push_back({r, d, fraction});
    }
    return out;
}

}  // namespace

std::vector<std::int64_t> parse_seed_list(std::string_view text) {
    std::vector<std::int64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        auto item = text.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            bad("seed list entries must be integers, got '" + std::string(item) + "'");
        }
        seeds.push_back(v);
        start = end + 1;
    }
    if (seeds.empty()) bad("seed list is empty");
    return seeds;
}

std::vector<pipeline::ExperimentSpec> expand_grid(std::string_view grid_json, const std::filesystem::path& base_dir) {
    try {
        return expand(json::parse(grid_json), base_dir, 1.0);
    } catch (const json::exception& e) {
        bad(e.what());
    }
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    try {
        const json j = json::parse(json_text);
        RunConfig cfg;
        const json io = j.value("io", json::object());
        cfg.train_manifest = resolve(base_dir, io.value("train_manifest", ""));
        cfg.test_manifest = resolve(base_dir, io.value("test_manifest", ""));
        cfg.out_dir = resolve(base_dir, io.value("out_dir", ""));

        cfg.experiment.train_fraction = j.value("train_fraction", 1.0);
        if (!(cfg.experiment.train_fraction > 0.0 && cfg.experiment.train_fraction <= 1.0)) {
            bad("train_fraction must lie in (0, 1]");
        }
        if (j.contains("reduction")) {
            const auto r = expand_reduction(j.at("reduction"), base_dir);
            if (r.size() != 1) bad("'reduction' must describe exactly one method; use 'grid' for several");
            cfg.experiment.reduction = r.front();
        }
        if (j.contains("detector")) {
            const auto d = expand_detector(j.at("detector"));
            if (d.size() != 1) bad("'detector' must describe exactly one detector; use 'grid' for several");
            cfg.experiment.detector = d.front();
        }
        if (j.contains("labeling")) cfg.rule = parse_labeling(j.at("labeling"));
        if (j.contains("seeds")) {
            cfg.seeds = j.at("seeds").get<std::vector<std::int64_t>>();
            if (cfg.seeds.empty()) bad("seeds must be a nonempty list");
        }
        cfg.nsd_tau_mm = j.value("nsd_tau_mm", 2.0);
        if (!(cfg.nsd_tau_mm > 0.0)) bad("nsd_tau_mm must be positive");
        if (j.contains("grid")) cfg.grid = expand(j.at("grid"), base_dir, cfg.experiment.train_fraction);
        return cfg;
    } catch (const json::exception& e) {
        bad(e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    try {
        return parse_run_config(read_file(path), path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

}  // namespace oodkit::config
