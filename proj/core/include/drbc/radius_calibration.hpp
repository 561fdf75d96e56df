#pragma once

#include <cstdint>
#include <variant>

#include "drbc/merton_core.hpp"

namespace drbc {

struct AnalyticQuantile {};

struct SampleQuantile {
    std::size_t draws = 100000;
    std::uint64_t seed = 0;
};

using QuantileMode = std::variant<AnalyticQuantile, SampleQuantile>;

struct CalibrationResult {
    double k_hat = 0.0;
    double sigma_sq = 0.0;
    double denom = 0.0;
    double eta_q = 0.0;
    double delta = 0.0;
    Eigen::Index n = 0;
    double confidence = 0.95;
};

// g'(F) = -I'(k e^{-rT} / F) k e^{-rT} / F^2.
double g_prime(double f_val, double k, const UtilitySpec& utility, const MarketSpec& market);

// int g'(F(y)) grad_b L_T(b, y) phi_T(y) dy.
Vector grad_kappa(const EmpiricalPrior& prior, const Vector& b, double k, const UtilitySpec& utility,
                  const MarketSpec& market, const GaussianNodes& nodes);

// Per-atom statistic s(b) = int g'(F(y)) L_T(b, y) phi_T(y) dy.
Vector kappa_statistic_atoms(const EmpiricalPrior& prior, double k, const UtilitySpec& utility,
                             const MarketSpec& market, const GaussianNodes& nodes);

// Weighted population variance of s(B) over the atoms.
double sigma_sq_estimate(const EmpiricalPrior& prior, double k, const UtilitySpec& utility,
                         const MarketSpec& market, const GaussianNodes& nodes);

// Upper quantile of a chi-squared law with one degree of freedom.
double chi_squared1_quantile(double confidence);

CalibrationResult select_delta(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                               const MarketSpec& market, const GaussianNodes& nodes,
                               double confidence = 0.95, const QuantileMode& mode = AnalyticQuantile{});

}  // namespace drbc
