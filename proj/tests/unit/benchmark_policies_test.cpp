#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drbc/benchmark_policies.hpp"
#include "test_support.hpp"

namespace drbc {
namespace {

using testing::random_sigma;
using testing::markowitz_oracle;

struct Instance {
    Vector mu;
    Matrix cov;
};

Instance random_instance(int d, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) a(i, j) = 0.2 * normal(gen);
    }
    Vector mu(d);
    for (int i = 0; i < d; ++i) mu(i) = 0.08 + 0.05 * normal(gen);
    return {mu, a * a.transpose() + 0.02 * Matrix::Identity(d, d)};
}

TEST(MertonPlugin, HandValueAndLinearity) {
    const MarketSpec m(0.01, Matrix::Constant(1, 1, 0.2), 1.0, 0.01);
    const UtilitySpec u(0.5);
    const PolicyWeights w = merton_plugin(Vector::Constant(1, 0.05), m, u);
    EXPECT_NEAR(w.weights(0), 2.0, 1e-12);
    EXPECT_NEAR(w.cash, -1.0, 1e-12);
    EXPECT_EQ(merton_plugin(Vector::Constant(1, 0.01), m, u).weights(0), 0.0);

    const MarketSpec m2(0.02, random_sigma(3, 1), 1.0, 0.01);
    const Vector b(Vector::LinSpaced(3, 0.05, 0.15));
    const Vector w1 = merton_plugin(b, m2, u).weights;
    const Vector w2 = merton_plugin(Vector::Constant(3, 0.02) + 2.0 * (b - Vector::Constant(3, 0.02)), m2, u).weights;
    EXPECT_LT((w2 - 2.0 * w1).norm(), 1e-12);
}

TEST(ShortCap, Definition) {
    PolicyWeights p = budgeted(Vector::LinSpaced(2, 0.2, 0.4));
    EXPECT_EQ(apply_short_cap(p).weights, p.weights);
    Vector w(2);
    w << -1.3, 0.7;
    p = budgeted(w);
    const PolicyWeights c = apply_short_cap(p, 0.5);
    EXPECT_EQ(c.weights(0), -0.5);
    EXPECT_NEAR(c.cash - p.cash, -0.8, 1e-15);
    EXPECT_NEAR(c.weights.sum() + c.cash, 1.0, 1e-15);
    const PolicyWeights cc = apply_short_cap(c, 0.5);
    EXPECT_EQ(cc.weights, c.weights);
    EXPECT_EQ(cc.cash, c.cash);
}

TEST(Drc, ZeroRadiusIsPlugIn) {
    const MarketSpec m(0.01, random_sigma(3, 2), 1.0, 0.01);
    const UtilitySpec u(-3.0);
    const Vector b(Vector::LinSpaced(3, 0.1, 0.2));
    EXPECT_LT((drc_policy(b, m, u, 0.0).weights - merton_plugin(b, m, u).weights).norm(), 1e-14);
}

TEST(Drc, FullShrinkageAndMonotone) {
    const MarketSpec m(0.01, 0.3 * Matrix::Identity(3, 3), 1.0, 0.01);
    const UtilitySpec u(-3.0);
    const Vector b(Vector::LinSpaced(3, 0.1, 0.2));
    const double half_sq = 0.5 * m.market_price_of_risk(b).squaredNorm();
    EXPECT_EQ(drc_policy(b, m, u, half_sq).weights.norm(), 0.0);
    EXPECT_EQ(drc_policy(b, m, u, 2.0 * half_sq).weights.norm(), 0.0);
    const Vector w0 = drc_policy(b, m, u, 0.01 * half_sq).weights.cwiseAbs();
    const Vector w1 = drc_policy(b, m, u, 0.2 * half_sq).weights.cwiseAbs();
    const Vector w2 = drc_policy(b, m, u, 0.7 * half_sq).weights.cwiseAbs();
    EXPECT_TRUE((w1.array() <= w0.array()).all());
    EXPECT_TRUE((w2.array() <= w1.array()).all());
}

TEST(Drmv, SymmetricCase) {
    DrmvProblem pb{Vector::Constant(2, 0.1), Matrix::Identity(2, 2), 0.0, 0.1};
    const PolicyWeights w = drmv_solve(pb);
    EXPECT_NEAR(w.weights(0), 0.5, 1e-9);
    EXPECT_NEAR(w.weights(1), 0.5, 1e-9);
}

TEST(Drmv, ZeroRadiusMatchesMarkowitz) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const int d = seed % 2 == 0 ? 2 : 5;
        const Instance in = random_instance(d, seed);
        const double floor = in.mu.maxCoeff() * 0.9;
        const DrmvSolution s = drmv_solve_detailed(DrmvProblem{in.mu, in.cov, 0.0, floor});
        EXPECT_LT((s.policy.weights - markowitz_oracle(in.mu, in.cov, floor)).cwiseAbs().maxCoeff(), 1e-6)
            << "seed " << seed;
    }
}

TEST(Drmv, RobustConstraintsAndPremium) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int d = seed % 2 == 0 ? 2 : 5;
        const Instance in = random_instance(d, seed + 40);
        const double floor = in.mu.mean();
        double prev = drmv_solve_detailed(DrmvProblem{in.mu, in.cov, 0.0, floor}).objective;
        for (double delta : {1e-6, 1e-5, 1e-4}) {
            DrmvProblem pb{in.mu, in.cov, delta, floor};
            DrmvSolution s;
            try {
                s = drmv_solve_detailed(pb);
            } catch (const InfeasibleTarget&) {
                continue;
            }
            const Vector& w = s.policy.weights;
            EXPECT_NEAR(w.sum(), 1.0, 1e-7);
            EXPECT_GE(in.mu.dot(w) - floor - std::sqrt(delta) * w.norm(), -1e-7);
            EXPECT_GE(s.objective, prev - 1e-12) << "seed " << seed << " delta " << delta;
            prev = s.objective;
        }
    }
}

TEST(Drmv, InfeasibleTargetReportsMaximizer) {
    const Instance in = random_instance(3, 5);
    DrmvProblem pb{in.mu, in.cov, 0.5, 10.0};
    try {
        drmv_solve(pb);
        FAIL() << "expected InfeasibleTarget";
    } catch (const InfeasibleTarget& e) {
        EXPECT_LT(e.max_robust_return(), 10.0);
        EXPECT_NEAR(e.maximizer().sum(), 1.0, 1e-9);
    }
}

TEST(Drmv, RejectsBadProblems) {
    EXPECT_THROW(drmv_solve(DrmvProblem{Vector::Ones(2), Matrix::Identity(3, 3)}), std::invalid_argument);
    EXPECT_THROW(drmv_solve(DrmvProblem{Vector::Ones(2), Matrix::Identity(2, 2), 0.1, 0.1, 1.0}),
                 std::invalid_argument);
}

TEST(DrmvRf, RisklessDominates) {
    const Instance in = random_instance(2, 3);
    const PolicyWeights w = drmv_rf_solve(DrmvProblem{in.mu, in.cov, 0.0, 0.03}, 0.03, 1e-10);
    EXPECT_NEAR(w.cash, 1.0, 1e-4);
    EXPECT_LT(w.weights.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(DrmvRf, ZeroRadiusMatchesAugmentedMarkowitz) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance in = random_instance(2, seed + 60);
        const double rate = 0.02, noise = 1e-4, floor = 0.07;
        Vector mu(3);
        mu << in.mu, rate;
        Matrix cov = Matrix::Zero(3, 3);
        cov.topLeftCorner(2, 2) = in.cov;
        cov(2, 2) = noise;
        const Vector want = markowitz_oracle(mu, cov, floor);
        const PolicyWeights got = drmv_rf_solve(DrmvProblem{in.mu, in.cov, 0.0, floor}, rate, noise);
        EXPECT_LT((got.weights - want.head(2)).cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_NEAR(got.cash, want(2), 1e-6);
    }
}

}  // namespace
}  // namespace drbc
