#pragma once

#include <functional>

#include "drbc/market_sim.hpp"
#include "drbc/prior_builder.hpp"
#include "drbc/quadrature.hpp"
#include "drbc/types.hpp"

namespace drbc {

// CRRA utility U(x) = x^alpha / alpha with alpha < 1, alpha != 0.
class UtilitySpec {
public:
    explicit UtilitySpec(double alpha);

    double alpha() const { return alpha_; }
    // alpha / (1 - alpha)
    double beta() const { return beta_; }
    // 1 / (1 - alpha), the power applied to F in the value functional
    double power() const { return power_; }

    double utility(double x) const;
    // I = (U')^{-1}: I(y) = y^{1/(alpha-1)}
    double inverse_marginal(double y) const;
    double inverse_marginal_derivative(double y) const;

private:
    double alpha_;
    double beta_;
    double power_;
};

// Per-prior precomputation of theta_k = sigma^{-1}(b_k - r 1) and the log
// weights, so that log F(t, y) is a single log-sum-exp over atoms.
class MixtureKernel {
public:
    MixtureKernel(const EmpiricalPrior& prior, const MarketSpec& market);

    Eigen::Index atoms() const { return theta_.rows(); }
    int dim() const { return static_cast<int>(theta_.cols()); }
    const Matrix& theta() const { return theta_; }
    const Vector& log_weights() const { return log_w_; }
    const Vector& theta_sq() const { return theta_sq_; }

    // log w_k + log L_t(b_k, y) for every atom.
    Vector log_terms(const Vector& y, double t) const;
    double log_F(const Vector& y, double t) const;
    Vector grad_F(const Vector& y, double t) const;

private:
    Matrix theta_;
    Vector log_w_;
    Vector theta_sq_;
};

double likelihood_ratio(const Vector& drift, const Vector& y, double t, const MarketSpec& market);
double mixture_F(const EmpiricalPrior& prior, const Vector& y, double t, const MarketSpec& market);
Vector grad_F(const EmpiricalPrior& prior, const Vector& y, double t, const MarketSpec& market);

// log F(T, sqrt(T) z_j) at every standard node z_j.
Vector log_F_on_nodes(const MixtureKernel& kernel, const MarketSpec& market, const GaussianNodes& nodes);

// int F(T, z)^q phi_T(z) dz.
double power_moment(const EmpiricalPrior& prior, double q, const MarketSpec& market,
                    const GaussianNodes& nodes);

struct BudgetSolution {
    double k = 0.0;
    double x0 = 0.0;
    // | int I(k e^{-rT} / F(T, z)) phi_T(z) dz - x0 e^{rT} |
    double residual = 0.0;
};

// L(k; s, y) = e^{-rs} int I(k e^{-rT} / F(T, y + z)) phi_s(z) dz, with the
// s = 0 branch evaluated pointwise.
double budget_map(const EmpiricalPrior& prior, double k, double s, const Vector& y,
                  const UtilitySpec& utility, const MarketSpec& market, const GaussianNodes& nodes);

// Closed form k = e^{rT} (M / (x0 e^{rT}))^{1-alpha}, M = int F^{1/(1-alpha)} phi_T.
BudgetSolution solve_budget_k(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                              const MarketSpec& market, const GaussianNodes& nodes);

// Bracketing root search on the decreasing map k -> int I(k e^{-rT}/F) phi_T
// for an arbitrary inverse marginal utility.
BudgetSolution solve_budget_k_bracketing(const EmpiricalPrior& prior, double x0,
                                         const std::function<double(double)>& inverse_marginal,
                                         const MarketSpec& market, const GaussianNodes& nodes);
BudgetSolution solve_budget_k_bracketing(const EmpiricalPrior& prior, double x0,
                                         const UtilitySpec& utility, const MarketSpec& market,
                                         const GaussianNodes& nodes);

// V = (x0 e^{rT})^alpha / alpha * (int F^{1/(1-alpha)} phi_T)^{1-alpha}.
double value_function(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                      const MarketSpec& market, const GaussianNodes& nodes);

// int F U(I(k e^{-rT} / F)) phi_T with k from the budget; cross-check of the closed form.
double value_function_general(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                              const MarketSpec& market, const GaussianNodes& nodes);

// Optimal wealth fractions at plan time t given the observation Y(t). Nodes
// are scaled to N(0, (T - t) I) internally; T - t < 1e-12 uses the point
// evaluation at Y.
class PolicyEvaluator {
public:
    PolicyEvaluator(const EmpiricalPrior& prior, const UtilitySpec& utility, const MarketSpec& market,
                    const GaussianNodes& nodes);

    Vector fraction(double t, const Vector& observation) const;

private:
    MixtureKernel kernel_;
    UtilitySpec utility_;
    MarketSpec market_;
    Matrix projections_;  // nodes x atoms: z_j . theta_k
    Vector log_node_w_;
    Vector base_;         // log w_k - |theta_k|^2 T / 2
};

Vector optimal_fraction(const EmpiricalPrior& prior, double t, const Vector& observation,
                        const UtilitySpec& utility, const MarketSpec& market,
                        const GaussianNodes& nodes);

// Row-wise log-sum-exp.
Vector log_sum_exp_rows(const Matrix& m);

}  // namespace drbc
