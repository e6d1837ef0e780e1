#include "oodkit/error.hpp"
#include "oodkit/reduction.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <string>

namespace oodkit {

SampleMatrix stack_rows(std::span<const Tensor> tensors) {
    if (tensors.empty()) return SampleMatrix(0, 0);
    const std::size_t d = tensors.front().size();
    SampleMatrix out(static_cast<Eigen::Index>(tensors.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].size() != d) {
            throw Error(ErrorCode::ShapeMismatch, "sample " + std::to_string(i) + " has " +
                                                      std::to_string(tensors[i].size()) + " elements, expected " +
                                                      std::to_string(d));
        }
        std::copy(tensors[i].data().begin(), tensors[i].data().end(), out.row(static_cast<Eigen::Index>(i)).data());
    }
    return out;
}

SampleMatrix stack_rows(std::span<const std::vector<double>> rows) {
    if (rows.empty()) return SampleMatrix(0, 0);
    const std::size_t d = rows.front().size();
    SampleMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) throw Error(ErrorCode::ShapeMismatch, "ragged sample rows");
        std::copy(rows[i].begin(), rows[i].end(), out.row(static_cast<Eigen::Index>(i)).data());
    }
    return out;
}

namespace reduction {

Tensor avg_pool(const Tensor& tensor, const PoolSpec& spec) {
    const std::size_t dims = static_cast<std::size_t>(spec.dims);
    if (spec.kernel == 0 || spec.stride == 0) throw Error(ErrorCode::InvalidArgument, "kernel and stride must be >= 1");
    if (tensor.rank() < dims) {
        throw Error(ErrorCode::RankTooLow, "pool" + std::to_string(dims) + "d needs rank >= " + std::to_string(dims) +
                                               ", got " + std::to_string(tensor.rank()));
    }
    const Shape& in = tensor.shape();
    const std::size_t lead_rank = in.size() - dims;

    // Normalise to three spatial axes; pool2d gets a unit depth axis with kernel 1.
    std::array<std::size_t, 3> len{1, 1, 1}, ker{1, 1, 1}, str{1, 1, 1}, out_len{};
    for (std::size_t a = 0; a < dims; ++a) {
        const std::size_t slot = 3 - dims + a;
        len[slot] = in[lead_rank + a];
        ker[slot] = spec.kernel;
        str[slot] = spec.stride;
        if (spec.kernel > len[slot]) {
            throw Error(ErrorCode::WindowTooLarge, "kernel " + std::to_string(spec.kernel) + " exceeds axis " +
                                                       std::to_string(lead_rank + a) + " of length " +
                                                       std::to_string(len[slot]));
        }
    }
    for (std::size_t a = 0; a < 3; ++a) out_len[a] = (len[a] - ker[a]) / str[a] + 1;

    Shape out_shape(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(lead_rank));
    for (std::size_t a = 3 - dims; a < 3; ++a) out_shape.push_back(out_len[a]);
    Tensor out(out_shape);

    std::size_t lead = 1;
    for (std::size_t a = 0; a < lead_rank; ++a) lead *= in[a];
    const std::size_t in_block = len[0] * len[1] * len[2];
    const std::size_t out_block = out_len[0] * out_len[1] * out_len[2];
    const double window = static_cast<double>(ker[0] * ker[1] * ker[2]);

    const auto src = tensor.data();
    auto dst = out.data();
    for (std::size_t b = 0; b < lead; ++b) {
        const double* base = src.data() + b * in_block;
        double* target = dst.data() + b * out_block;
        for (std::size_t oz = 0; oz < out_len[0]; ++oz) {
            for (std::size_t oy = 0; oy < out_len[1]; ++oy) {
                for (std::size_t ox = 0; ox < out_len[2]; ++ox) {
                    double sum = 0.0;
                    for (std::size_t kz = 0; kz < ker[0]; ++kz) {
                        const std::size_t z = oz * str[0] + kz;
                        for (std::size_t ky = 0; ky < ker[1]; ++ky) {
                            const std::size_t y = oy * str[1] + ky;
                            const double* row = base + (z * len[1] + y) * len[2] + ox * str[2];
                            for (std::size_t kx = 0; kx < ker[2]; ++kx) sum += row[kx];
                        }
                    }
                    target[(oz * out_len[1] + oy) * out_len[2] + ox] = sum / window;
                }
            }
        }
    }
    return out;
}

Tensor patch_mean_pool(const Tensor& tensor) {
    if (tensor.rank() < 2) throw Error(ErrorCode::RankTooLow, "patch pooling needs rank >= 2");
    const std::size_t patches = tensor.shape()[0];
    Shape out_shape(tensor.shape().begin() + 1, tensor.shape().end());
    Tensor out(out_shape);
    const std::size_t inner = out.size();
    const auto src = tensor.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < inner; ++i) {
        double sum = 0.0;
        for (std::size_t p = 0; p < patches; ++p) sum += src[p * inner + i];
        dst[i] = sum / static_cast<double>(patches);
    }
    return out;
}

PcaModel pca_fit(std::span<const Tensor> train, std::size_t n_components) {
    for (const auto& t : train) {
        if (t.shape() != train.front().shape()) throw Error(ErrorCode::ShapeMismatch, "PCA training tensors differ in shape");
    }
    return pca_fit(stack_rows(train), n_components);
}

PcaModel pca_fit(const SampleMatrix& train, std::size_t n_components) {
    const Eigen::Index n = train.rows();
    const Eigen::Index d = train.cols();
    if (n < 2) throw Error(ErrorCode::TooFewSamples, "PCA needs at least 2 training samples, got " + std::to_string(n));
    if (!train.allFinite()) throw Error(ErrorCode::NonFiniteInput, "PCA training data contains non-finite values");
    const auto limit = static_cast<std::size_t>(std::min(n - 1, d));
    if (n_components < 1 || n_components > limit) {
        throw Error(ErrorCode::NTooLarge, "n_components must be in [1, " + std::to_string(limit) + "], got " +
                                              std::to_string(n_components));
    }

    PcaModel model;
    model.n_components = n_components;
    model.n_train = static_cast<std::size_t>(n);
    model.feature_mean = train.colwise().mean().transpose();
    model.feature_std.resize(d);

    // Standardised samples as columns: d x N (each column is one sample).
    Eigen::MatrixXd xt = train.transpose();
    xt.colwise() -= model.feature_mean;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double var = xt.row(j).squaredNorm() / static_cast<double>(n);
        const double sd = std::sqrt(var);
        model.feature_std[j] = sd;
        if (sd > 0.0) xt.row(j) /= sd;
        else xt.row(j).setZero();
    }

    // Right singular vectors of the N x d standardised matrix are the left
    // singular vectors of xt. Wide data goes through a Householder QR first so
    // the SVD only sees an N x N triangle.
    Eigen::MatrixXd basis;  // d x n_components
    Eigen::VectorXd singular;
    const auto k = static_cast<Eigen::Index>(n_components);
    if (d > n) {
        Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(xt);
        const Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU);
        singular = svd.singularValues();
        Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(d, k);
        padded.topRows(n) = svd.matrixU().leftCols(k);
        basis = qr.householderQ() * padded;
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(xt, Eigen::ComputeThinU);
        singular = svd.singularValues();
        basis = svd.matrixU().leftCols(k);
    }

    model.components.resize(k, d);
    model.explained_variance.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        basis.col(c).cwiseAbs().maxCoeff(&arg);
        const double sign = basis(arg, c) < 0.0 ? -1.0 : 1.0;
        model.components.row(c) = sign * basis.col(c).transpose();
        model.explained_variance[c] = singular[c] * singular[c] / static_cast<double>(n - 1);
    }
    return model;
}

namespace {

Vector standardise(const PcaModel& model, std::span<const double> flat) {
    if (flat.size() != model.dim()) {
        throw Error(ErrorCode::ShapeMismatch, "PCA expects " + std::to_string(model.dim()) + " features, got " +
                                                  std::to_string(flat.size()));
    }
    Vector z(static_cast<Eigen::Index>(flat.size()));
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double sd = model.feature_std[j];
        z[j] = sd > 0.0 ? (flat[static_cast<std::size_t>(j)] - model.feature_mean[j]) / sd : 0.0;
    }
    return z;
}

}  // namespace

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> flat) {
    const Vector projected = model.components * standardise(model, flat);
    return {projected.data(), projected.data() + projected.size()};
}

std::vector<double> pca_transform(const PcaModel& model, const Tensor& tensor) {
    return pca_transform(model, tensor.data());
}

SampleMatrix pca_transform(const PcaModel& model, const SampleMatrix& samples) {
    if (static_cast<std::size_t>(samples.cols()) != model.dim()) {
        throw Error(ErrorCode::ShapeMismatch, "PCA expects " + std::to_string(model.dim()) + " features, got " +
                                                  std::to_string(samples.cols()));
    }
    SampleMatrix out(samples.rows(), static_cast<Eigen::Index>(model.n_components));
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        const Vector z = standardise(model, std::span<const double>(samples.row(i).data(), model.dim()));
        out.row(i) = (model.components * z).transpose();
    }
    return out;
}

std::vector<double> pca_reconstruct(const PcaModel& model, std::span<const double> scores) {
    if (scores.size() != model.n_components) throw Error(ErrorCode::ShapeMismatch, "score vector length mismatch");
    const Eigen::Map<const Vector> s(scores.data(), static_cast<Eigen::Index>(scores.size()));
    const Vector z = model.components.transpose() * s;
    std::vector<double> out(model.dim());
    for (std::size_t j = 0; j < out.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        out[j] = model.feature_mean[jj] + model.feature_std[jj] * z[jj];
    }
    return out;
}

}  // namespace reduction
}  // namespace oodkit
