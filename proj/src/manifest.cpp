#include "oodkit/error.hpp"
#include "oodkit/manifest.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace oodkit {

namespace {

const std::vector<std::string> kColumns = {"id", "split", "embedding", "dsc", "hd", "nsd", "logits", "stack"};

std::optional<double> parse_optional_real(const std::string& cell, const std::string& column, const std::string& id) {
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw Error(ErrorCode::BadValue, "record '" + id + "': column " + column + " is not a real number: '" + cell + "'");
    }
    return v;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string_view to_string(Split split) noexcept { return split == Split::Train ? "train" : "test"; }

std::string format_double(double v) {
    // Shortest representation that round-trips exactly.
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool row_has_content = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            row_has_content = true;
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            if (row_has_content || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            row_has_content = false;
        } else {
            cell += c;
            row_has_content = true;
        }
    }
    if (row_has_content || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const {
    if (p.is_absolute()) return p;
    return base_dir / p;
}

std::vector<const ManifestRecord*> DatasetManifest::with_split(Split split) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(&r);
    }
    return out;
}

const ManifestRecord* DatasetManifest::find(std::string_view id) const {
    for (const auto& r : records) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    // Strip a UTF-8 BOM if present.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::MissingColumn, "manifest is empty; expected a header row");

    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < rows[0].size(); ++i) column[rows[0][i]] = i;
    for (const char* required : {"id", "split", "embedding"}) {
        if (!column.count(required)) throw Error(ErrorCode::MissingColumn, std::string("manifest lacks column '") + required + "'");
    }

    DatasetManifest manifest;
    manifest.base_dir = base_dir;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto cell = [&](const std::string& name) -> std::string {
            auto it = column.find(name);
            if (it == column.end() || it->second >= row.size()) return {};
            return row[it->second];
        };
        ManifestRecord rec;
        rec.id = cell("id");
        if (rec.id.empty()) throw Error(ErrorCode::BadValue, "row " + std::to_string(r) + " has an empty id");
        if (!seen.insert(rec.id).second) throw Error(ErrorCode::DuplicateId, "id '" + rec.id + "' appears more than once");

        const std::string split = cell("split");
        if (split == "train") rec.split = Split::Train;
        else if (split == "test") rec.split = Split::Test;
        else throw Error(ErrorCode::BadValue, "record '" + rec.id + "': split must be train or test, got '" + split + "'");

        const std::string embedding = cell("embedding");
        if (embedding.empty()) throw Error(ErrorCode::BadValue, "record '" + rec.id + "': empty embedding path");
        rec.embedding_path = embedding;

        rec.dsc = parse_optional_real(cell("dsc"), "dsc", rec.id);
        rec.hd = parse_optional_real(cell("hd"), "hd", rec.id);
        rec.nsd = parse_optional_real(cell("nsd"), "nsd", rec.id);
        if (rec.dsc && (*rec.dsc < 0.0 || *rec.dsc > 1.0)) {
            throw Error(ErrorCode::BadValue, "record '" + rec.id + "': dsc " + format_double(*rec.dsc) + " outside [0,1]");
        }
        if (rec.nsd && (*rec.nsd < 0.0 || *rec.nsd > 1.0)) {
            throw Error(ErrorCode::BadValue, "record '" + rec.id + "': nsd " + format_double(*rec.nsd) + " outside [0,1]");
        }
        if (rec.hd && *rec.hd < 0.0) {
            throw Error(ErrorCode::BadValue, "record '" + rec.id + "': hd must be nonnegative");
        }
        if (auto s = cell("logits"); !s.empty()) rec.logits_path = s;
        if (auto s = cell("stack"); !s.empty()) rec.stack_path = s;
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return parse_manifest(text, path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::ostringstream out;
    for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    auto opt_path = [](const std::optional<std::filesystem::path>& p) {
        return p ? quote_if_needed(p->generic_string()) : std::string();
    };
    for (const auto& r : manifest.records) {
        out << quote_if_needed(r.id) << ',' << to_string(r.split) << ',' << quote_if_needed(r.embedding_path.generic_string())
            << ',' << opt(r.dsc) << ',' << opt(r.hd) << ',' << opt(r.nsd) << ',' << opt_path(r.logits_path) << ','
            << opt_path(r.stack_path) << '\n';
    }
    return out.str();
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    write_file_atomic(path, format_manifest(manifest));
}

}  // namespace oodkit
