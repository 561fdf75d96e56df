#include "drbc/robust_prior.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "drbc/csv_io.hpp"

namespace drbc {

void RobustSpec::validate() const {
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
        throw std::invalid_argument("RobustSpec: delta must be finite and nonnegative");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("RobustSpec: tau must be positive");
    if (direction_sign != 0 && direction_sign != 1 && direction_sign != -1) {
        throw std::invalid_argument("RobustSpec: direction_sign must be -1, 0 or +1");
    }
}

int worst_case_sign(const UtilitySpec& utility) {
    return utility.alpha() > 0.0 ? -1 : 1;
}

double j_functional(const EmpiricalPrior& prior, const UtilitySpec& utility, const MarketSpec& market,
                    const GaussianNodes& nodes) {
    return power_moment(prior, utility.power(), market, nodes);
}

namespace {

// H for each row of `drifts` against the mixture whose log F on the nodes is given.
Matrix influence_rows(const Matrix& drifts, const Vector& log_f, const UtilitySpec& utility,
                      const MarketSpec& market, const GaussianNodes& nodes) {
    const double T = market.horizon();
    const double root_t = std::sqrt(T);
    const Eigen::Index n = drifts.rows();
    const int d = market.dim();
    Matrix out(n, d);
    const Vector log_base = nodes.weights.array().log().matrix() + utility.beta() * log_f;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vector theta = market.market_price_of_risk(drifts.row(k).transpose());
        // log L_T(b, sqrt(T) z) + log w_j + beta log F
        Vector e = root_t * (nodes.points * theta);
        e.array() += -0.5 * T * theta.squaredNorm();
        e += log_base;
        const Vector mass = e.array().exp().matrix();
        // sum_j mass_j (sqrt(T) z_j - T theta)
        const Vector moment = root_t * (nodes.points.transpose() * mass) - T * mass.sum() * theta;
        out.row(k) = (market.sigma_inv().transpose() * moment).transpose() / (1.0 - utility.alpha());
    }
    return out;
}

}  // namespace

Vector influence_H(const EmpiricalPrior& prior, const Vector& b, const UtilitySpec& utility,
                   const MarketSpec& market, const GaussianNodes& nodes) {
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    return influence_rows(b.transpose(), log_f, utility, market, nodes).row(0).transpose();
}

Matrix influence_H_atoms(const EmpiricalPrior& prior, const UtilitySpec& utility,
                         const MarketSpec& market, const GaussianNodes& nodes) {
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    return influence_rows(prior.atoms(), log_f, utility, market, nodes);
}

PerturbationResult perturb_prior(const EmpiricalPrior& prior, const RobustSpec& spec,
                                 const UtilitySpec& utility, const MarketSpec& market,
                                 const GaussianNodes& nodes) {
    spec.validate();
    const int sign = spec.direction_sign != 0 ? spec.direction_sign : worst_case_sign(utility);

    Matrix h = influence_H_atoms(prior, utility, market, nodes);
    const double h_norm = std::sqrt(prior.weights().dot(h.rowwise().squaredNorm()));

    PerturbationResult out{prior, h, h_norm, 0.0, sign};
    if (spec.delta == 0.0 || h_norm == 0.0) return out;

    const double radius = std::sqrt(spec.delta / spec.tau);
    const Vector centre = prior.mean();
    const double spread =
        std::sqrt(prior.weights().dot((prior.atoms().rowwise() - centre.transpose()).rowwise().squaredNorm()));
    if (std::sqrt(spec.delta) > 0.5 * spread) {
        spdlog::warn("perturb_prior: sqrt(delta) = {:.6g} exceeds half the atom spread ({:.6g} / 2)",
                     std::sqrt(spec.delta), spread);
    }

    Matrix shifted = prior.atoms() + (sign * radius / h_norm) * h;
    out.perturbed = EmpiricalPrior(std::move(shifted), prior.weights());
    out.predicted_value_shift = sign * radius * h_norm;
    return out;
}

void write_perturbation_csv(const EmpiricalPrior& original, const PerturbationResult& result,
                            const std::filesystem::path& file) {
    auto os = open_for_write(file);
    const int d = original.dim();
    std::vector<std::string> header{"weight"};
    for (const char* prefix : {"b_", "h_", "c_"}) {
        for (int i = 1; i <= d; ++i) header.push_back(prefix + std::to_string(i));
    }
    write_csv_row(os, header);
    for (Eigen::Index k = 0; k < original.size(); ++k) {
        std::vector<std::string> row{format_double(original.weights()(k))};
        for (const Matrix* m : {&original.atoms(), &result.h_values, &result.perturbed.atoms()}) {
            for (int i = 0; i < d; ++i) row.push_back(format_double((*m)(k, i)));
        }
        write_csv_row(os, row);
    }
}

}  // namespace drbc
