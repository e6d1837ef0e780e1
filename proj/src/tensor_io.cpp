#include "oodkit/error.hpp"
#include "oodkit/tensor.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace oodkit {

namespace {

constexpr unsigned char kMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreludeSize = 10;  // magic + version + u16 header length

void check_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > kMaxRank) {
        throw Error(ErrorCode::ShapeMismatch, "tensor rank must be in [1, 5], got " + std::to_string(shape.size()));
    }
    for (std::size_t extent : shape) {
        if (extent == 0) throw Error(ErrorCode::ShapeMismatch, "tensor extents must be positive");
    }
}

struct NpyHeader {
    std::string descr;
    bool fortran_order = false;
    Shape shape;
    std::size_t payload_offset = 0;
};

NpyHeader parse_header(std::span<const unsigned char> bytes) {
    if (bytes.size() < kPreludeSize || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw Error(ErrorCode::BadMagic, "missing \\x93NUMPY magic");
    }
    if (bytes[6] != 1 || bytes[7] != 0) {
        throw Error(ErrorCode::BadHeader,
                    "only NPY version 1.0 is supported, got " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]));
    }
    const std::size_t header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < kPreludeSize + header_len) throw Error(ErrorCode::TruncatedPayload, "header extends past end of file");
    const std::string header(reinterpret_cast<const char*>(bytes.data() + kPreludeSize), header_len);

    NpyHeader out;
    out.payload_offset = kPreludeSize + header_len;

    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex fortran_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    if (!std::regex_search(header, m, descr_re)) throw Error(ErrorCode::BadHeader, "header lacks 'descr'");
    out.descr = m[1];
    if (!std::regex_search(header, m, fortran_re)) throw Error(ErrorCode::BadHeader, "header lacks 'fortran_order'");
    out.fortran_order = m[1] == "True";
    if (!std::regex_search(header, m, shape_re)) throw Error(ErrorCode::BadHeader, "header lacks 'shape'");

    std::stringstream dims(m[1].str());
    std::string item;
    while (std::getline(dims, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
        if (item.empty()) continue;
        if (!std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); })) {
            throw Error(ErrorCode::BadHeader, "non-integer shape entry '" + item + "'");
        }
        out.shape.push_back(std::stoull(item));
    }
    if (out.shape.empty()) {
        // 0-d arrays carry a single element; represent them as shape [1].
        out.shape.push_back(1);
    }
    return out;
}

template <typename T>
void widen(std::span<const unsigned char> payload, std::vector<double>& out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        T v;
        std::memcpy(&v, payload.data() + i * sizeof(T), sizeof(T));
        out[i] = static_cast<double>(v);
    }
}

std::size_t dtype_width(const std::string& descr) {
    if (descr.size() < 3) return 0;
    return static_cast<std::size_t>(std::stoul(descr.substr(2)));
}

Tensor decode(std::span<const unsigned char> bytes, bool any_numeric, bool validate_finite) {
    const NpyHeader header = parse_header(bytes);
    if (header.fortran_order) throw Error(ErrorCode::FortranOrderUnsupported, "fortran_order=True arrays are not supported");

    const std::string& d = header.descr;
    const bool is_float = d == "<f4" || d == "<f8";
    const bool is_loose = d == "|u1" || d == "|b1" || d == "|i1" || d == "<i2" || d == "<u2" || d == "<i4" ||
                          d == "<u4" || d == "<i8" || d == "<u8";
    if (!is_float && !(any_numeric && is_loose)) {
        throw Error(ErrorCode::UnsupportedDtype, "unsupported dtype '" + d + "'");
    }
    check_shape(header.shape);

    const std::size_t count = element_count(header.shape);
    const std::size_t width = dtype_width(d);
    const auto payload = bytes.subspan(header.payload_offset);
    if (payload.size() < count * width) {
        throw Error(ErrorCode::TruncatedPayload, "payload has " + std::to_string(payload.size()) + " bytes, expected " +
                                                     std::to_string(count * width));
    }

    std::vector<double> data(count);
    if (d == "<f8") widen<double>(payload, data);
    else if (d == "<f4") widen<float>(payload, data);
    else if (d == "|u1" || d == "|b1") widen<std::uint8_t>(payload, data);
    else if (d == "|i1") widen<std::int8_t>(payload, data);
    else if (d == "<i2") widen<std::int16_t>(payload, data);
    else if (d == "<u2") widen<std::uint16_t>(payload, data);
    else if (d == "<i4") widen<std::int32_t>(payload, data);
    else if (d == "<u4") widen<std::uint32_t>(payload, data);
    else if (d == "<i8") widen<std::int64_t>(payload, data);
    else widen<std::uint64_t>(payload, data);

    if (validate_finite) {
        const auto bad = std::find_if(data.begin(), data.end(), [](double v) { return !std::isfinite(v); });
        if (bad != data.end()) {
            throw Error(ErrorCode::NonFiniteValue,
                        "non-finite value at flat index " + std::to_string(std::distance(data.begin(), bad)));
        }
    }
    return Tensor(header.shape, std::move(data));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

std::size_t element_count(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != element_count(shape_)) {
        throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                  " does not match shape product " +
                                                  std::to_string(element_count(shape_)));
    }
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor parse_npy(std::span<const unsigned char> bytes, NpyReadOptions options) {
    return decode(bytes, false, options.validate_finite);
}

Tensor read_npy(const std::filesystem::path& path, NpyReadOptions options) {
    const auto bytes = slurp(path);
    try {
        return parse_npy(bytes, options);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

Tensor read_npy_any_numeric(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    try {
        return decode(bytes, true, false);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<unsigned char> encode_npy(const Tensor& tensor) {
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < tensor.rank(); ++i) {
        header += std::to_string(tensor.shape()[i]);
        if (i + 1 < tensor.rank() || tensor.rank() == 1) header += ",";
        if (i + 1 < tensor.rank()) header += " ";
    }
    header += "), }";
    // Pad with spaces so prelude + header (terminated by '\n') is a multiple of 64.
    const std::size_t unpadded = kPreludeSize + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header += '\n';

    std::vector<unsigned char> out;
    out.reserve(kPreludeSize + header.size() + tensor.size() * sizeof(double));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(1);
    out.push_back(0);
    out.push_back(static_cast<unsigned char>(header.size() & 0xff));
    out.push_back(static_cast<unsigned char>((header.size() >> 8) & 0xff));
    out.insert(out.end(), header.begin(), header.end());
    const auto* raw = reinterpret_cast<const unsigned char*>(tensor.data().data());
    out.insert(out.end(), raw, raw + tensor.size() * sizeof(double));
    return out;
}

void write_npy(const Tensor& tensor, const std::filesystem::path& path) {
    const auto bytes = encode_npy(tensor);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace oodkit
