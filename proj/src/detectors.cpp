#include "oodkit/detectors.hpp"
#include "oodkit/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <string>

namespace oodkit::detectors {

GaussianModel gaussian_fit(const SampleMatrix& train) {
    const Eigen::Index n = train.rows();
    const Eigen::Index m = train.cols();
    if (n < 2) throw Error(ErrorCode::TooFewSamples, "Gaussian fit needs at least 2 samples, got " + std::to_string(n));
    if (m < 1) throw Error(ErrorCode::DimensionMismatch, "Gaussian fit needs at least one feature");
    if (!train.allFinite()) throw Error(ErrorCode::NonFiniteInput, "training embeddings contain non-finite values");

    GaussianModel model;
    model.n_train = static_cast<std::size_t>(n);
    model.mean = train.colwise().mean().transpose();
    const SampleMatrix centered = train.rowwise() - model.mean.transpose();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n);

    const double tau = cov.trace() / static_cast<double>(m);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(m, m);
    for (double rel : kJitterLadder) {
        const double jitter = rel * tau;
        if (rel > 0.0 && !(jitter > 0.0)) break;
        Eigen::LLT<Eigen::MatrixXd> llt(cov + jitter * identity);
        if (llt.info() != Eigen::Success) continue;
        // A factorisation can succeed on a numerically singular matrix; reject
        // pivots that are negligible against the scale of the diagonal.
        const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal();
        const double max_diag = (cov.diagonal().array() + jitter).maxCoeff();
        if (!(pivots.minCoeff() * pivots.minCoeff() > 1e-13 * max_diag)) continue;
        Eigen::MatrixXd precision = llt.solve(identity);
        model.precision = 0.5 * (precision + precision.transpose());
        if (!model.precision.allFinite()) continue;
        model.jitter_used = jitter;
        return model;
    }
    throw Error(ErrorCode::SingularEvenWithJitter,
                "covariance stayed singular after diagonal loading up to 1e-2 * trace/m (trace/m = " +
                    std::to_string(tau) + ")");
}

double mahalanobis(const GaussianModel& model, std::span<const double> x) {
    if (x.size() != model.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(model.dim()) + " features, got " +
                                                      std::to_string(x.size()));
    }
    const Eigen::Map<const Vector> v(x.data(), static_cast<Eigen::Index>(x.size()));
    const Vector diff = v - model.mean;
    const double d2 = diff.dot(model.precision * diff);
    return std::sqrt(std::max(0.0, d2));
}

KnnIndex knn_fit(SampleMatrix train, std::size_t k) {
    if (train.rows() < 1) throw Error(ErrorCode::TooFewSamples, "KNN index needs at least one training vector");
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (k > static_cast<std::size_t>(train.rows())) {
        throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds the " + std::to_string(train.rows()) +
                                              " training vectors");
    }
    if (!train.allFinite()) throw Error(ErrorCode::NonFiniteInput, "training embeddings contain non-finite values");
    return KnnIndex{std::move(train), k};
}

std::vector<double> squared_distances(const KnnIndex& index, std::span<const double> x) {
    if (x.size() != index.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(index.dim()) + " features, got " +
                                                      std::to_string(x.size()));
    }
    const std::size_t m = x.size();
    std::vector<double> out(index.size());
    for (std::size_t r = 0; r < out.size(); ++r) {
        const double* row = index.train.row(static_cast<Eigen::Index>(r)).data();
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double diff = x[j] - row[j];
            acc += diff * diff;
        }
        out[r] = acc;
    }
    return out;
}

double knn_score(const KnnIndex& index, std::span<const double> x) {
    auto d2 = squared_distances(index, x);
    const auto kth = d2.begin() + static_cast<std::ptrdiff_t>(index.k - 1);
    std::nth_element(d2.begin(), kth, d2.end());
    return std::sqrt(*kth);
}

}  // namespace oodkit::detectors
