#include "oodkit/detectors.hpp"
#include "oodkit/error.hpp"
#include "oodkit/reduction.hpp"
#include "oodkit/util.hpp"

#include <json.hpp>

#include <string>

namespace oodkit {

namespace {

using nlohmann::json;

Tensor vector_tensor(const Vector& v) {
    return Tensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

template <typename M>
Tensor matrix_tensor(const M& m) {
    // Row-major copy regardless of the source storage order.
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data[i++] = m(r, c);
    }
    return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(data));
}

Vector load_vector(const std::filesystem::path& path, std::size_t expected) {
    const Tensor t = read_npy(path);
    if (t.rank() != 1 || t.size() != expected) {
        throw Error(ErrorCode::ShapeMismatch, path.string() + ": expected a vector of length " + std::to_string(expected));
    }
    return Eigen::Map<const Vector>(t.data().data(), static_cast<Eigen::Index>(t.size()));
}

SampleMatrix load_matrix(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
    const Tensor t = read_npy(path);
    if (t.rank() != 2 || t.shape()[0] != rows || t.shape()[1] != cols) {
        throw Error(ErrorCode::ShapeMismatch, path.string() + ": expected shape (" + std::to_string(rows) + ", " +
                                                  std::to_string(cols) + ")");
    }
    return Eigen::Map<const SampleMatrix>(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadValue, path.string() + ": " + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key, const std::filesystem::path& path) {
    if (!j.contains(key)) throw Error(ErrorCode::MissingColumn, path.string() + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadValue, path.string() + ": key '" + key + "': " + e.what());
    }
}

}  // namespace

namespace reduction {

void save_pca(const PcaModel& model, const std::filesystem::path& dir) {
    write_npy(vector_tensor(model.feature_mean), dir / "mean.npy");
    write_npy(vector_tensor(model.feature_std), dir / "std.npy");
    write_npy(matrix_tensor(model.components), dir / "components.npy");
    write_npy(vector_tensor(model.explained_variance), dir / "explained_variance.npy");
    const json meta = {{"n_components", model.n_components}, {"d", model.dim()}, {"n_train", model.n_train}};
    write_file_atomic(dir / "model.json", meta.dump(2) + "\n");
}

PcaModel load_pca(const std::filesystem::path& dir) {
    const auto meta_path = dir / "model.json";
    const json meta = read_json(meta_path);
    PcaModel model;
    model.n_components = field<std::size_t>(meta, "n_components", meta_path);
    model.n_train = field<std::size_t>(meta, "n_train", meta_path);
    const auto d = field<std::size_t>(meta, "d", meta_path);
    model.feature_mean = load_vector(dir / "mean.npy", d);
    model.feature_std = load_vector(dir / "std.npy", d);
    model.components = load_matrix(dir / "components.npy", model.n_components, d);
    model.explained_variance = load_vector(dir / "explained_variance.npy", model.n_components);
    return model;
}

}  // namespace reduction

namespace detectors {

void save_gaussian(const GaussianModel& model, const std::filesystem::path& dir) {
    write_npy(vector_tensor(model.mean), dir / "mean.npy");
    write_npy(matrix_tensor(model.precision), dir / "precision.npy");
    const json meta = {{"dim", model.dim()}, {"n_train", model.n_train}, {"jitter_used", model.jitter_used}};
    write_file_atomic(dir / "model.json", meta.dump(2) + "\n");
}

GaussianModel load_gaussian(const std::filesystem::path& dir) {
    const auto meta_path = dir / "model.json";
    const json meta = read_json(meta_path);
    GaussianModel model;
    const auto dim = field<std::size_t>(meta, "dim", meta_path);
    model.n_train = field<std::size_t>(meta, "n_train", meta_path);
    model.jitter_used = field<double>(meta, "jitter_used", meta_path);
    model.mean = load_vector(dir / "mean.npy", dim);
    model.precision = load_matrix(dir / "precision.npy", dim, dim);
    return model;
}

void save_knn(const KnnIndex& index, const std::filesystem::path& dir) {
    write_npy(matrix_tensor(index.train), dir / "train.npy");
    const json meta = {{"k", index.k}, {"n", index.size()}, {"dim", index.dim()}};
    write_file_atomic(dir / "model.json", meta.dump(2) + "\n");
}

KnnIndex load_knn(const std::filesystem::path& dir) {
    const auto meta_path = dir / "model.json";
    const json meta = read_json(meta_path);
    const auto k = field<std::size_t>(meta, "k", meta_path);
    const auto n = field<std::size_t>(meta, "n", meta_path);
    const auto dim = field<std::size_t>(meta, "dim", meta_path);
    return knn_fit(load_matrix(dir / "train.npy", n, dim), k);
}

}  // namespace detectors
}  // namespace oodkit
