#pragma once

#include <filesystem>

#include "drbc/merton_core.hpp"

namespace drbc {

// Quadratic transport cost c(D) = tau |D|^2. A direction_sign of 0 picks the
// sign from alpha: -1 for alpha in (0, 1), +1 for alpha < 0.
struct RobustSpec {
    double delta = 0.0;
    double tau = 1.0;
    int direction_sign = 0;

    void validate() const;
};

int worst_case_sign(const UtilitySpec& utility);

struct PerturbationResult {
    EmpiricalPrior perturbed;
    Matrix h_values;  // one row per atom
    double h_norm = 0.0;
    double predicted_value_shift = 0.0;
    int sign = 0;
};

// J(Q) = int F_Q(T, y)^{1/(1-alpha)} phi_T(y) dy.
double j_functional(const EmpiricalPrior& prior, const UtilitySpec& utility, const MarketSpec& market,
                    const GaussianNodes& nodes);

// H(b) = 1/(1-alpha) int L_T(b,y) sigma^{-T}(y - T theta_b) F(T,y)^{alpha/(1-alpha)} phi_T(y) dy
Vector influence_H(const EmpiricalPrior& prior, const Vector& b, const UtilitySpec& utility,
                   const MarketSpec& market, const GaussianNodes& nodes);

// H at every atom of the prior, sharing one evaluation of F on the nodes.
Matrix influence_H_atoms(const EmpiricalPrior& prior, const UtilitySpec& utility,
                         const MarketSpec& market, const GaussianNodes& nodes);

PerturbationResult perturb_prior(const EmpiricalPrior& prior, const RobustSpec& spec,
                                 const UtilitySpec& utility, const MarketSpec& market,
                                 const GaussianNodes& nodes);

// weight, b_1..b_d, h_1..h_d, c_1..c_d
void write_perturbation_csv(const EmpiricalPrior& original, const PerturbationResult& result,
                            const std::filesystem::path& file);

}  // namespace drbc
