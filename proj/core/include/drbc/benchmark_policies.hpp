#pragma once

#include <stdexcept>
#include <string>

#include "drbc/market_sim.hpp"
#include "drbc/merton_core.hpp"
#include "drbc/types.hpp"

namespace drbc {

struct PolicyWeights {
    Vector weights;
    double cash = 0.0;
};

// (1/(1-alpha)) (sigma sigma^T)^{-1} (b_hat - r 1); cash = 1 - sum.
PolicyWeights merton_plugin(const Vector& b_hat, const MarketSpec& market, const UtilitySpec& utility);

// Risky fractions with the residual held in cash.
PolicyWeights budgeted(Vector weights);

struct DrmvProblem {
    Vector mu_hat;
    Matrix sigma_hat;
    double delta = 0.0;
    double alpha_bar = 0.1;
    double p_norm = 2.0;

    void validate() const;
};

class InfeasibleTarget : public std::runtime_error {
public:
    InfeasibleTarget(const std::string& what, double max_robust_return, Vector maximizer)
        : std::runtime_error(what), max_robust_return_(max_robust_return), maximizer_(std::move(maximizer)) {}

    // +inf when the robust return is unbounded on the budget plane.
    double max_robust_return() const { return max_robust_return_; }
    const Vector& maximizer() const { return maximizer_; }

private:
    double max_robust_return_;
    Vector maximizer_;
};

struct DrmvSolution {
    PolicyWeights policy;
    double objective = 0.0;
    double kkt_residual = 0.0;
    bool return_constraint_active = false;
};

// min phi' S phi + sqrt(delta) |phi|_p  s.t.  1'phi = 1,  mu'phi >= alpha_bar + sqrt(delta) |phi|_p
DrmvSolution drmv_solve_detailed(const DrmvProblem& problem);
PolicyWeights drmv_solve(const DrmvProblem& problem);

// Same program with a risk-free asset appended as the last entry (return r,
// variance rf_noise); its weight is reported as cash.
DrmvSolution drmv_rf_solve_detailed(const DrmvProblem& problem, double rate, double rf_noise = 1e-8);
PolicyWeights drmv_rf_solve(const DrmvProblem& problem, double rate, double rf_noise = 1e-8);

// Drift with the market price of risk shrunk by sqrt(2 delta) in Euclidean norm.
Vector drc_adversarial_drift(const Vector& b_hat, const MarketSpec& market, double delta_drc);

// Merton on the adversarial drift, then the short cap.
PolicyWeights drc_policy(const Vector& b_hat, const MarketSpec& market, const UtilitySpec& utility,
                         double delta_drc, double short_cap = 0.5);

// Clips each weight at -cap; the removed short exposure is returned to cash.
PolicyWeights apply_short_cap(const PolicyWeights& weights, double cap = 0.5);

}  // namespace drbc
