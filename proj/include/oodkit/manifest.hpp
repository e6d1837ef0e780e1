#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oodkit {

enum class Split { Train, Test };

std::string_view to_string(Split split) noexcept;

struct ManifestRecord {
    std::string id;
    Split split = Split::Train;
    std::filesystem::path embedding_path;
    std::optional<double> dsc;
    std::optional<double> hd;
    std::optional<double> nsd;
    std::optional<std::filesystem::path> logits_path;
    std::optional<std::filesystem::path> stack_path;
};

/// Records of one manifest CSV. Relative paths are kept as written and
/// resolved against base_dir (the manifest file's directory) by resolve().
struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
    std::vector<const ManifestRecord*> with_split(Split split) const;
    const ManifestRecord* find(std::string_view id) const;
};

/// Header must contain id, split, embedding; dsc, hd, nsd, logits and stack
/// columns are optional. Empty cells become absent values.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

/// Serialises with the full header `id,split,embedding,dsc,hd,nsd,logits,stack`.
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Minimal RFC-4180-style splitter (quoted cells, doubled quotes). CRLF tolerated.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string format_double(double v);

}  // namespace oodkit
