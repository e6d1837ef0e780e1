#include "oodkit/error.hpp"
#include "oodkit/reduction.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <Eigen/SVD>
#include <doctest.h>

#include <cstring>

using namespace oodkit;
using namespace oodkit::reduction;

TEST_CASE("avg_pool of a constant tensor is constant") {
    Tensor ones({4, 4}, std::vector<double>(16, 1.0));
    const Tensor out = avg_pool(ones, {PoolDims::Pool2d, 2, 2});
    CHECK(out.shape() == Shape{2, 2});
    for (double v : out.data()) CHECK(v == 1.0);

    Tensor c({3, 5, 6, 7}, std::vector<double>(3 * 5 * 6 * 7, -2.5));
    for (auto [j, s] : kPoolingGrid) {
        for (auto dims : {PoolDims::Pool2d, PoolDims::Pool3d}) {
            const Tensor pooled = avg_pool(c, {dims, j, s});
            for (double v : pooled.data()) CHECK(v == -2.5);
        }
    }
}

TEST_CASE("avg_pool rejects windows larger than an axis") {
    Tensor t({1, 1, 4}, {0, 2, 4, 6});
    CHECK_THROWS_WITH_AS(avg_pool(t, {PoolDims::Pool2d, 2, 2}), doctest::Contains("WindowTooLarge"), Error);
    CHECK_THROWS_AS(avg_pool(Tensor({4}), {PoolDims::Pool2d, 2, 2}), Error);
    CHECK_THROWS_AS(avg_pool(t, {PoolDims::Pool2d, 0, 1}), Error);
}

TEST_CASE("avg_pool matches the window-mean oracle on the bottleneck shape") {
    std::mt19937_64 rng(11);
    const Tensor t = testing::random_tensor({768, 8, 4, 4}, rng);
    const Tensor out = avg_pool(t, {PoolDims::Pool3d, 2, 2});
    CHECK(out.shape() == Shape{768, 4, 2, 2});
    std::vector<std::size_t> oshape;
    const auto ref = oracle::window_mean(std::vector<double>(t.data().begin(), t.data().end()), t.shape(), 3, 2, 2, &oshape);
    CHECK(oshape == out.shape());
    CHECK(std::vector<double>(out.data().begin(), out.data().end()) == ref);
}

TEST_CASE("avg_pool equals the oracle across the kernel/stride grid") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> ext(4, 7), lead(1, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const Shape shape = {lead(rng), ext(rng), ext(rng), ext(rng)};
        const Tensor t = testing::random_tensor(shape, rng);
        for (auto [j, s] : kPoolingGrid) {
            for (std::size_t dims : {2u, 3u}) {
                const Tensor out = avg_pool(t, {static_cast<PoolDims>(dims), j, s});
                std::vector<std::size_t> oshape;
                const auto ref =
                    oracle::window_mean(std::vector<double>(t.data().begin(), t.data().end()), shape, dims, j, s, &oshape);
                REQUIRE(out.shape() == oshape);
                CHECK(std::vector<double>(out.data().begin(), out.data().end()) == ref);
            }
        }
    }
}

TEST_CASE("patch_mean_pool averages axis 0") {
    const Tensor t({3, 2}, {0, 2, 2, 4, 4, 6});
    const Tensor out = patch_mean_pool(t);
    CHECK(out.shape() == Shape{2});
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 4.0);

    CHECK(patch_mean_pool(Tensor({768, 8, 4, 4})).shape() == Shape{8, 4, 4});
    CHECK_THROWS_WITH_AS(patch_mean_pool(Tensor({5})), doctest::Contains("RankTooLow"), Error);
}

TEST_CASE("patch_mean_pool equals the loop oracle and commutes with scaling") {
    std::mt19937_64 rng(5);
    const Tensor t = testing::random_tensor({5, 3, 3}, rng);
    const Tensor out = patch_mean_pool(t);
    for (std::size_t i = 0; i < 9; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < 5; ++p) s += t[p * 9 + i];
        CHECK(out[i] == s / 5.0);
    }
    Tensor scaled = t;
    for (auto& v : scaled.data()) v *= -3.7;
    const Tensor out_scaled = patch_mean_pool(scaled);
    for (std::size_t i = 0; i < 9; ++i) CHECK(out_scaled[i] == doctest::Approx(-3.7 * out[i]).epsilon(1e-12));
}

namespace {

SampleMatrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    SampleMatrix x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    return x;
}

double max_orthonormality_error(const PcaModel& m) {
    const Eigen::MatrixXd gram = m.components * m.components.transpose();
    return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("pca_fit recovers the direction of collinear data") {
    SampleMatrix x(3, 2);
    x << 1, 2, 2, 4, 3, 6;
    const PcaModel m = pca_fit(x, 1);
    // Standardised coordinates of points on y = 2x lie on the diagonal.
    const double dot = (m.components(0, 0) + m.components(0, 1)) / std::sqrt(2.0);
    CHECK(std::abs(std::abs(dot) - 1.0) < 1e-8);
}

TEST_CASE("pca components are orthonormal with sorted variances and a fixed sign") {
    const SampleMatrix x = random_matrix(40, 12, 1);
    const PcaModel m = pca_fit(x, 10);
    CHECK(max_orthonormality_error(m) < 1e-8);
    for (Eigen::Index c = 1; c < m.explained_variance.size(); ++c) {
        CHECK(m.explained_variance[c] <= m.explained_variance[c - 1]);
    }
    for (Eigen::Index c = 0; c < m.components.rows(); ++c) {
        Eigen::Index arg;
        m.components.row(c).cwiseAbs().maxCoeff(&arg);
        CHECK(m.components(c, arg) > 0.0);
    }
}

TEST_CASE("pca with n = d reconstructs the inputs") {
    const SampleMatrix x = random_matrix(30, 8, 2) * 3.0 + SampleMatrix::Constant(30, 8, 1.5);
    const PcaModel m = pca_fit(x, 8);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto z = pca_transform(m, std::span<const double>(x.row(i).data(), 8));
        const auto back = pca_reconstruct(m, z);
        for (Eigen::Index j = 0; j < 8; ++j) CHECK(std::abs(back[static_cast<std::size_t>(j)] - x(i, j)) < 1e-6);
    }
}

TEST_CASE("pca transform of the training mean is zero; wrong length throws") {
    const SampleMatrix x = random_matrix(20, 6, 3);
    const PcaModel m = pca_fit(x, 4);
    const auto z = pca_transform(m, std::span<const double>(m.feature_mean.data(), 6));
    for (double v : z) CHECK(std::abs(v) < 1e-10);
    const std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_WITH_AS(pca_transform(m, std::span<const double>(wrong)), doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("pca scores equal the direct SVD score matrix, wide and tall") {
    for (auto [n, d] : {std::pair<Eigen::Index, Eigen::Index>{25, 60}, {60, 25}}) {
        const SampleMatrix x = random_matrix(n, d, static_cast<std::uint64_t>(n * 100 + d));
        const PcaModel m = pca_fit(x, 5);

        // Oracle: standardise by hand and take a Jacobi SVD of the N x d matrix.
        Eigen::MatrixXd z = x;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double mu = z.col(j).mean();
            z.col(j).array() -= mu;
            const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
            z.col(j) /= sd;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::MatrixXd scores = svd.matrixU() * svd.singularValues().asDiagonal();
        const SampleMatrix ours = pca_transform(m, x);
        for (Eigen::Index c = 0; c < 5; ++c) {
            const double sign = ours.col(c).dot(scores.col(c)) < 0 ? -1.0 : 1.0;
            CHECK((ours.col(c) - sign * scores.col(c)).cwiseAbs().maxCoeff() < 1e-8);
            const double var = ours.col(c).squaredNorm() / static_cast<double>(n - 1);
            CHECK(std::abs(var - m.explained_variance[c]) <= 1e-6 * m.explained_variance[c]);
        }
    }
}

TEST_CASE("pca maps constant features to zero") {
    SampleMatrix x = random_matrix(10, 4, 4);
    x.col(2).setConstant(7.0);
    const PcaModel m = pca_fit(x, 3);
    CHECK(m.feature_std[2] == 0.0);
    CHECK(m.components.col(2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca fit is bitwise deterministic") {
    const SampleMatrix x = random_matrix(50, 80, 9);
    const PcaModel a = pca_fit(x, 16);
    const PcaModel b = pca_fit(x, 16);
    CHECK(std::memcmp(a.components.data(), b.components.data(), sizeof(double) * a.components.size()) == 0);
    CHECK(std::memcmp(a.explained_variance.data(), b.explained_variance.data(),
                      sizeof(double) * a.explained_variance.size()) == 0);
}

TEST_CASE("pca argument validation") {
    const SampleMatrix x = random_matrix(5, 3, 10);
    CHECK_THROWS_WITH_AS(pca_fit(x, 4), doctest::Contains("NTooLarge"), Error);
    CHECK_THROWS_WITH_AS(pca_fit(x, 0), doctest::Contains("NTooLarge"), Error);
    CHECK_THROWS_WITH_AS(pca_fit(random_matrix(1, 3, 1), 1), doctest::Contains("TooFewSamples"), Error);
    const std::vector<Tensor> mixed = {Tensor({2, 2}), Tensor({4})};
    CHECK_THROWS_WITH_AS(pca_fit(mixed, 1), doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("pca fits the whole component grid on a 300 x 1024 matrix") {
    const SampleMatrix x = random_matrix(300, 1024, 12);
    for (std::size_t n : {2, 4, 8, 16, 32, 64, 128, 256}) {
        const PcaModel m = pca_fit(x, n);
        CHECK(m.n_components == n);
        CHECK(max_orthonormality_error(m) < 1e-8);
    }
}

TEST_CASE("pca model survives save/load") {
    const auto dir = testing::scratch_dir("pca_store");
    const PcaModel m = pca_fit(random_matrix(12, 5, 13), 3);
    save_pca(m, dir / "pca");
    const PcaModel back = load_pca(dir / "pca");
    CHECK(back.n_components == 3);
    CHECK(back.n_train == 12);
    CHECK(back.components == m.components);
    CHECK(back.feature_std == m.feature_std);
    CHECK(std::filesystem::exists(dir / "pca" / "explained_variance.npy"));
}
