#pragma once

#include "oodkit/tensor.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

/// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::path(OODKIT_TEST_DATA_DIR) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline oodkit::Tensor random_tensor(const oodkit::Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    oodkit::Tensor t(shape);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

}  // namespace testing
