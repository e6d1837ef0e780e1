#pragma once

#include "oodkit/evaluation.hpp"
#include "oodkit/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace oodkit::config {

/// Parsed run configuration. Relative paths are resolved against the
/// directory of the configuration file.
struct RunConfig {
    std::filesystem::path train_manifest;
    std::filesystem::path test_manifest;
    std::filesystem::path out_dir;
    pipeline::ExperimentSpec experiment;
    eval::LabelRule rule = eval::LabelRule::automatic();
    std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
    double nsd_tau_mm = 2.0;
    /// Expanded grid-search section, when the config has one.
    std::vector<pipeline::ExperimentSpec> grid;
};

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Comma-separated integer list, e.g. "0,1,2".
std::vector<std::int64_t> parse_seed_list(std::string_view text);

/// Expands {"reductions": [...], "detectors": [...]} into the cartesian
/// product of every reduction variant and detector variant. List-valued
/// parameters (method, pairs, n, k) multiply out.
std::vector<pipeline::ExperimentSpec> expand_grid(std::string_view grid_json, const std::filesystem::path& base_dir);

}  // namespace oodkit::config
