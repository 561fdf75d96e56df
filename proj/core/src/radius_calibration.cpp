#include "drbc/radius_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "drbc/errors.hpp"
#include "drbc/rng.hpp"

namespace drbc {

double g_prime(double f_val, double k, const UtilitySpec& utility, const MarketSpec& market) {
    if (!(f_val > 0.0) || !(k > 0.0)) throw std::invalid_argument("g_prime: F and k must be positive");
    const double scaled = k * std::exp(-market.rate() * market.horizon());
    return -utility.inverse_marginal_derivative(scaled / f_val) * scaled / (f_val * f_val);
}

namespace {

// log g'(F) for power utility: -log(1-alpha) + p (rT - log k) + beta log F.
Vector log_g_prime_nodes(const Vector& log_f, double k, const UtilitySpec& utility,
                         const MarketSpec& market) {
    const double c = -std::log(1.0 - utility.alpha()) +
                     utility.power() * (market.rate() * market.horizon() - std::log(k));
    return (utility.beta() * log_f.array() + c).matrix();
}

struct AtomIntegrals {
    Vector level;  // int g' L_T phi_T
    Matrix grad;   // int g' grad_b L_T phi_T, one row per drift
};

AtomIntegrals atom_integrals(const Matrix& drifts, const Vector& log_f, double k,
                             const UtilitySpec& utility, const MarketSpec& market,
                             const GaussianNodes& nodes) {
    const double T = market.horizon();
    const double root_t = std::sqrt(T);
    const Vector log_base = log_g_prime_nodes(log_f, k, utility, market) +
                            nodes.weights.array().log().matrix();
    AtomIntegrals out{Vector(drifts.rows()), Matrix(drifts.rows(), market.dim())};
    for (Eigen::Index i = 0; i < drifts.rows(); ++i) {
        const Vector theta = market.market_price_of_risk(drifts.row(i).transpose());
        Vector e = root_t * (nodes.points * theta);
        e.array() += -0.5 * T * theta.squaredNorm();
        e += log_base;
        const Vector mass = e.array().exp().matrix();
        const double total = mass.sum();
        const Vector moment = root_t * (nodes.points.transpose() * mass) - T * total * theta;
        out.level(i) = total;
        out.grad.row(i) = (market.sigma_inv().transpose() * moment).transpose();
    }
    return out;
}

}  // namespace

Vector grad_kappa(const EmpiricalPrior& prior, const Vector& b, double k, const UtilitySpec& utility,
                  const MarketSpec& market, const GaussianNodes& nodes) {
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    return atom_integrals(b.transpose(), log_f, k, utility, market, nodes).grad.row(0).transpose();
}

Vector kappa_statistic_atoms(const EmpiricalPrior& prior, double k, const UtilitySpec& utility,
                             const MarketSpec& market, const GaussianNodes& nodes) {
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    return atom_integrals(prior.atoms(), log_f, k, utility, market, nodes).level;
}

namespace {

double weighted_variance(const Vector& values, const Vector& weights) {
    const double mean = weights.dot(values);
    return std::max(0.0, weights.dot((values.array() - mean).square().matrix()));
}

}  // namespace

double sigma_sq_estimate(const EmpiricalPrior& prior, double k, const UtilitySpec& utility,
                         const MarketSpec& market, const GaussianNodes& nodes) {
    if (prior.size() < 2) {
        throw std::invalid_argument("sigma_sq_estimate: need at least 2 atoms for a variance");
    }
    return weighted_variance(kappa_statistic_atoms(prior, k, utility, market, nodes), prior.weights());
}

double chi_squared1_quantile(double confidence) {
    if (!(confidence > 0.0) || !(confidence < 1.0)) {
        throw std::invalid_argument("confidence must lie in (0, 1)");
    }
    return boost::math::quantile(boost::math::chi_squared(1.0), confidence);
}

CalibrationResult select_delta(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                               const MarketSpec& market, const GaussianNodes& nodes, double confidence,
                               const QuantileMode& mode) {
    if (prior.size() < 2) {
        throw std::invalid_argument("select_delta: need at least 2 atoms, got " +
                                    std::to_string(prior.size()));
    }
    if (!(confidence > 0.0) || !(confidence < 1.0)) {
        throw std::invalid_argument("select_delta: confidence must lie in (0, 1)");
    }

    CalibrationResult out;
    out.n = prior.size();
    out.confidence = confidence;
    out.k_hat = solve_budget_k(prior, x0, utility, market, nodes).k;

    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    const AtomIntegrals ints = atom_integrals(prior.atoms(), log_f, out.k_hat, utility, market, nodes);
    out.denom = prior.weights().dot(ints.grad.rowwise().squaredNorm());
    out.sigma_sq = weighted_variance(ints.level, prior.weights());
    if (!(out.denom > 0.0)) throw NumericError("select_delta: degenerate gradient norm");

    if (std::holds_alternative<AnalyticQuantile>(mode)) {
        out.eta_q = out.sigma_sq * chi_squared1_quantile(confidence) / out.denom;
    } else {
        const auto& sample = std::get<SampleQuantile>(mode);
        if (sample.draws < 1) throw std::invalid_argument("select_delta: need at least one draw");
        const CounterRng rng(sample.seed, 0xCA11B);
        std::vector<double> upsilon(sample.draws);
        double z = 0.0;
        for (std::size_t i = 0; i < sample.draws; ++i) {
            rng.normals(i, std::span<double>(&z, 1));
            const double scaled = std::sqrt(out.sigma_sq) * z;
            upsilon[i] = scaled * scaled / out.denom;
        }
        // Inverse of the empirical distribution function.
        const auto rank = static_cast<std::size_t>(
            std::ceil(confidence * static_cast<double>(sample.draws)));
        const std::size_t idx = std::min(sample.draws - 1, rank == 0 ? 0 : rank - 1);
        std::nth_element(upsilon.begin(), upsilon.begin() + static_cast<std::ptrdiff_t>(idx), upsilon.end());
        out.eta_q = upsilon[idx];
    }
    out.delta = out.eta_q / static_cast<double>(out.n);
    return out;
}

}  // namespace drbc
