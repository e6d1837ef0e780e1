#include "oodkit/error.hpp"
#include "oodkit/util.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <vector>
#include <fstream>
#include <random>
#include <thread>

namespace oodkit {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Io: return "IoError";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
        case ErrorCode::FortranOrderUnsupported: return "FortranOrderUnsupported";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::BadHeader: return "BadHeader";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::BadValue: return "BadValue";
        case ErrorCode::WindowTooLarge: return "WindowTooLarge";
        case ErrorCode::RankTooLow: return "RankTooLow";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::NTooLarge: return "NTooLarge";
        case ErrorCode::SingularEvenWithJitter: return "SingularEvenWithJitter";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::SpacingMismatch: return "SpacingMismatch";
        case ErrorCode::NoImages: return "NoImages";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::NoPositives: return "NoPositives";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EverythingRejected: return "EverythingRejected";
        case ErrorCode::MissingPair: return "MissingPair";
        case ErrorCode::MissingFiles: return "MissingFiles";
        case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

double NeumaierSum::value() const noexcept { return sum_ + compensation_; }

void NeumaierSum::add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        compensation_ += (sum_ - t) + x;
    } else {
        compensation_ += (x - t) + sum_;
    }
    sum_ = t;
}

double compensated_mean(std::span<const double> values) noexcept {
    if (values.empty()) return 0.0;
    NeumaierSum acc;
    for (double v : values) acc.add(v);
    return acc.value() / static_cast<double>(values.size());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create directory " + path.parent_path().string());
    }
    // Unique per thread so concurrent writers targeting one directory never share a temp name.
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(tid);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot rename into " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return contents;
}

std::uint64_t stream_seed(std::int64_t seed, std::string_view name) noexcept {
    // FNV-1a over the name, mixed with the seed through splitmix64.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = h ^ (static_cast<std::uint64_t>(seed) + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

unsigned resolve_thread_count(int requested) noexcept {
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("OODKIT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return 1;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(threads);
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += threads) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace oodkit
