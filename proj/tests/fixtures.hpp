#pragma once

#include "oodkit/manifest.hpp"
#include "oodkit/tensor.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

struct TwoClusterOptions {
    std::size_t n_train = 30;
    std::size_t n_test_id = 10;
    std::size_t n_test_ood = 10;
    oodkit::Shape shape{2, 4, 4, 4};  ///< patches, z, y, x
    double shift = 4.0;  ///< OOD mean offset in units of the noise std
    std::uint64_t seed = 7;
    bool with_logits = false;
};

/// Writes train.csv and test.csv (plus NPYs) into dir. Train and ID test images
/// are drawn around 0, OOD images around `shift`. ID images get dsc 0.97 and
/// small HD, OOD images dsc below 0.8 and large HD.
inline void write_two_cluster(const std::filesystem::path& dir, const TwoClusterOptions& opt = {}) {
    using namespace oodkit;
    std::filesystem::create_directories(dir / "emb");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    auto draw = [&](double mean) {
        Tensor t(opt.shape);
        for (auto& v : t.data()) v = mean + g(rng);
        return t;
    };
    auto logits = [&](bool ood) {
        Tensor t({3, 2, 2, 2});
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = (i % 3 == 0 && !ood ? 6.0 : 0.0) + 0.3 * g(rng);
        return t;
    };

    DatasetManifest train, test;
    for (std::size_t i = 0; i < opt.n_train; ++i) {
        const std::string id = "tr" + std::to_string(i);
        write_npy(draw(0.0), dir / "emb" / (id + ".npy"));
        train.records.push_back({id, Split::Train, "emb/" + id + ".npy", {}, {}, {}, {}, {}});
    }
    const std::size_t n_test = opt.n_test_id + opt.n_test_ood;
    for (std::size_t i = 0; i < n_test; ++i) {
        const bool ood = i >= opt.n_test_id;
        const std::string id = "te" + std::to_string(i);
        write_npy(draw(ood ? opt.shift : 0.0), dir / "emb" / (id + ".npy"));
        ManifestRecord rec{id, Split::Test, "emb/" + id + ".npy", {}, {}, {}, {}, {}};
        rec.dsc = ood ? 0.75 - 0.02 * static_cast<double>(i - opt.n_test_id) : 0.97 + 0.001 * static_cast<double>(i);
        rec.hd = ood ? 20.0 + static_cast<double>(i) : 2.0 + 0.1 * static_cast<double>(i);
        rec.nsd = ood ? 0.5 : 0.98;
        if (opt.with_logits) {
            write_npy(logits(ood), dir / "emb" / (id + "_logits.npy"));
            rec.logits_path = "emb/" + id + "_logits.npy";
        }
        test.records.push_back(rec);
    }
    write_manifest(train, dir / "train.csv");
    write_manifest(test, dir / "test.csv");
}

}  // namespace fixtures
