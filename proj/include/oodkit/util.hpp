#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace oodkit {

// Neumaier compensated summation; the result does not depend on magnitude ordering
// to first order, which keeps voxel means stable across traversal orders.
class NeumaierSum {
public:
    void add(double x) noexcept;
    double value() const noexcept;

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

double compensated_mean(std::span<const double> values) noexcept;

void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Seed for an RNG stream isolated per (seed, configuration name).
std::uint64_t stream_seed(std::int64_t seed, std::string_view name) noexcept;

/// requested > 0 wins, then OODKIT_THREADS, then 1.
unsigned resolve_thread_count(int requested) noexcept;

/// Static round-robin partition; each index is visited exactly once. The first
/// exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace oodkit
