#include <gtest/gtest.h>

#include <random>

#include "drbc/covariance.hpp"

namespace drbc {
namespace {

Matrix gaussian_sample(const Matrix& chol, int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(n, chol.rows());
    for (int i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = normal(gen);
    }
    return z * chol.transpose();
}

Matrix sample_cov(const Matrix& x) {
    const Matrix c = x.rowwise() - x.colwise().mean();
    return c.transpose() * c / static_cast<double>(x.rows());
}

TEST(LedoitWolf, LargeSampleRecoversCovariance) {
    Matrix l(3, 3);
    l << 0.3, 0, 0, 0.1, 0.2, 0, -0.05, 0.04, 0.25;
    const Matrix x = gaussian_sample(l, 100000, 1);
    const ShrinkageEstimate est = ledoit_wolf_detailed(x);
    EXPECT_LT(est.intensity, 0.01);
    EXPECT_LT((est.covariance - sample_cov(x)).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT((est.covariance - l * l.transpose()).cwiseAbs().maxCoeff(), 3e-3);
}

TEST(LedoitWolf, OneDimensionIsSampleVariance) {
    const Matrix x = gaussian_sample(Matrix::Constant(1, 1, 0.4), 50, 2);
    EXPECT_NEAR(ledoit_wolf(x)(0, 0), sample_cov(x)(0, 0), 1e-15);
}

TEST(LedoitWolf, SymmetricPositiveSemidefinite) {
    const Matrix x = gaussian_sample(Matrix::Identity(20, 20), 30, 3);
    const Matrix s = ledoit_wolf(x);
    EXPECT_EQ((s - s.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().minCoeff(), 0.0);
}

TEST(LedoitWolf, ShrinksHarderWithFewObservations) {
    Matrix l = Matrix::Identity(10, 10);
    l(3, 2) = 0.5;
    const double few = ledoit_wolf_detailed(gaussian_sample(l, 15, 4)).intensity;
    const double many = ledoit_wolf_detailed(gaussian_sample(l, 5000, 4)).intensity;
    EXPECT_GT(few, many);
    EXPECT_GE(few, 0.0);
    EXPECT_LE(few, 1.0);
}

}  // namespace
}  // namespace drbc
