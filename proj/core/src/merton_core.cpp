#include "drbc/merton_core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "drbc/errors.hpp"

namespace drbc {

UtilitySpec::UtilitySpec(double alpha) : alpha_(alpha) {
    if (!(alpha < 1.0) || alpha == 0.0 || !std::isfinite(alpha)) {
        throw std::invalid_argument("UtilitySpec: alpha must satisfy alpha < 1 and alpha != 0");
    }
    beta_ = alpha_ / (1.0 - alpha_);
    power_ = 1.0 / (1.0 - alpha_);
}

double UtilitySpec::utility(double x) const {
    return std::pow(x, alpha_) / alpha_;
}

double UtilitySpec::inverse_marginal(double y) const {
    return std::pow(y, 1.0 / (alpha_ - 1.0));
}

double UtilitySpec::inverse_marginal_derivative(double y) const {
    return std::pow(y, (2.0 - alpha_) / (alpha_ - 1.0)) / (alpha_ - 1.0);
}

Vector log_sum_exp_rows(const Matrix& m) {
    Vector out(m.rows());
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
        const double mx = m.row(j).maxCoeff();
        out(j) = mx + std::log((m.row(j).array() - mx).exp().sum());
    }
    return out;
}

namespace {

double log_sum_exp(const Vector& v) {
    const double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

MixtureKernel::MixtureKernel(const EmpiricalPrior& prior, const MarketSpec& market) {
    if (prior.dim() != market.dim()) {
        throw std::invalid_argument("MixtureKernel: prior dimension " + std::to_string(prior.dim()) +
                                    " does not match market dimension " +
                                    std::to_string(market.dim()));
    }
    const Eigen::Index n = prior.size();
    theta_.resize(n, prior.dim());
    for (Eigen::Index k = 0; k < n; ++k) {
        theta_.row(k) = market.market_price_of_risk(prior.atom(k)).transpose();
    }
    theta_sq_ = theta_.rowwise().squaredNorm();
    log_w_ = prior.weights().array().log().matrix();
}

Vector MixtureKernel::log_terms(const Vector& y, double t) const {
    return log_w_ + theta_ * y - 0.5 * t * theta_sq_;
}

double MixtureKernel::log_F(const Vector& y, double t) const {
    return log_sum_exp(log_terms(y, t));
}

Vector MixtureKernel::grad_F(const Vector& y, double t) const {
    const Vector terms = log_terms(y, t);
    return theta_.transpose() * terms.array().exp().matrix();
}

double likelihood_ratio(const Vector& drift, const Vector& y, double t, const MarketSpec& market) {
    const Vector theta = market.market_price_of_risk(drift);
    return std::exp(theta.dot(y) - 0.5 * theta.squaredNorm() * t);
}

double mixture_F(const EmpiricalPrior& prior, const Vector& y, double t, const MarketSpec& market) {
    return std::exp(MixtureKernel(prior, market).log_F(y, t));
}

Vector grad_F(const EmpiricalPrior& prior, const Vector& y, double t, const MarketSpec& market) {
    return MixtureKernel(prior, market).grad_F(y, t);
}

Vector log_F_on_nodes(const MixtureKernel& kernel, const MarketSpec& market, const GaussianNodes& nodes) {
    if (nodes.dim() != kernel.dim()) {
        throw std::invalid_argument("log_F_on_nodes: node dimension does not match the prior");
    }
    const double T = market.horizon();
    Matrix exponents = std::sqrt(T) * (nodes.points * kernel.theta().transpose());
    const Vector base = kernel.log_weights() - 0.5 * T * kernel.theta_sq();
    exponents.rowwise() += base.transpose();
    return log_sum_exp_rows(exponents);
}

namespace {

// log int exp(q log F) phi_T with a max shift.
double log_power_moment(const Vector& log_f, const Vector& node_w, double q) {
    const Vector e = (q * log_f.array() + node_w.array().log()).matrix();
    return log_sum_exp(e);
}

void require_positive_x0(double x0) {
    if (!(x0 > 0.0) || !std::isfinite(x0)) {
        throw std::invalid_argument("initial wealth x0 must be positive");
    }
}

double budget_integral(const Vector& log_f, const Vector& node_w, double k,
                       const std::function<double(double)>& inverse_marginal, double rT) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < log_f.size(); ++j) {
        sum += node_w(j) * inverse_marginal(std::exp(std::log(k) - rT - log_f(j)));
    }
    return sum;
}

}  // namespace

double power_moment(const EmpiricalPrior& prior, double q, const MarketSpec& market,
                    const GaussianNodes& nodes) {
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    return std::exp(log_power_moment(log_f, nodes.weights, q));
}

double budget_map(const EmpiricalPrior& prior, double k, double s, const Vector& y,
                  const UtilitySpec& utility, const MarketSpec& market, const GaussianNodes& nodes) {
    if (!(k > 0.0)) throw std::invalid_argument("budget_map: k must be positive");
    if (s < 0.0) throw std::invalid_argument("budget_map: s must be nonnegative");
    const MixtureKernel kernel(prior, market);
    const double T = market.horizon();
    const double shift = std::log(k) - market.rate() * T;
    const double e = 1.0 / (utility.alpha() - 1.0);
    if (s < 1e-12) {
        return std::exp(e * (shift - kernel.log_F(y, T)));
    }
    double sum = 0.0;
    const double root_s = std::sqrt(s);
    for (Eigen::Index j = 0; j < nodes.size(); ++j) {
        const Vector z = y + root_s * nodes.points.row(j).transpose();
        sum += nodes.weights(j) * std::exp(e * (shift - kernel.log_F(z, T)));
    }
    return std::exp(-market.rate() * s) * sum;
}

BudgetSolution solve_budget_k(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                              const MarketSpec& market, const GaussianNodes& nodes) {
    require_positive_x0(x0);
    const double rT = market.rate() * market.horizon();
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    const double log_m = log_power_moment(log_f, nodes.weights, utility.power());
    const double log_k = rT + (1.0 - utility.alpha()) * (log_m - std::log(x0) - rT);

    BudgetSolution out;
    out.k = std::exp(log_k);
    out.x0 = x0;
    const double target = x0 * std::exp(rT);
    // int I(k e^{-rT}/F) phi_T = exp(log_k - rT)^{1/(alpha-1)} * int F^{1/(1-alpha)} phi_T
    const double achieved = std::exp((log_k - rT) / (utility.alpha() - 1.0) + log_m);
    out.residual = std::abs(achieved - target);
    return out;
}

BudgetSolution solve_budget_k_bracketing(const EmpiricalPrior& prior, double x0,
                                         const std::function<double(double)>& inverse_marginal,
                                         const MarketSpec& market, const GaussianNodes& nodes) {
    require_positive_x0(x0);
    const double rT = market.rate() * market.horizon();
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    const double log_target = std::log(x0) + rT;

    // Decreasing in log k.
    auto f = [&](double log_k) {
        return std::log(budget_integral(log_f, nodes.weights, std::exp(log_k), inverse_marginal, rT)) -
               log_target;
    };

    double lo = 0.0, hi = 0.0;
    double f_lo = f(lo), f_hi = f_lo;
    double step = 1.0;
    int doublings = 0;
    while (f_hi > 0.0) {
        if (++doublings > 200) throw NumericError("solve_budget_k: root bracket expansion failed");
        lo = hi;
        f_lo = f_hi;
        hi += step;
        step *= 2.0;
        f_hi = f(hi);
    }
    while (f_lo < 0.0) {
        if (++doublings > 200) throw NumericError("solve_budget_k: root bracket expansion failed");
        hi = lo;
        f_hi = f_lo;
        lo -= step;
        step *= 2.0;
        f_lo = f(lo);
    }
    if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) {
        throw NumericError("solve_budget_k: budget map is not finite on the bracket");
    }

    double log_k = lo;
    if (f_lo == 0.0) {
        log_k = lo;
    } else if (f_hi == 0.0) {
        log_k = hi;
    } else {
        std::uintmax_t max_iter = 300;
        const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(a)); };
        const auto bracket = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, tol, max_iter);
        log_k = 0.5 * (bracket.first + bracket.second);
    }

    BudgetSolution out;
    out.k = std::exp(log_k);
    out.x0 = x0;
    out.residual = std::abs(budget_integral(log_f, nodes.weights, out.k, inverse_marginal, rT) -
                            std::exp(log_target));
    return out;
}

BudgetSolution solve_budget_k_bracketing(const EmpiricalPrior& prior, double x0,
                                         const UtilitySpec& utility, const MarketSpec& market,
                                         const GaussianNodes& nodes) {
    return solve_budget_k_bracketing(
        prior, x0, [&utility](double y) { return utility.inverse_marginal(y); }, market, nodes);
}

double value_function(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                      const MarketSpec& market, const GaussianNodes& nodes) {
    require_positive_x0(x0);
    const double a = utility.alpha();
    const double rT = market.rate() * market.horizon();
    const double m = power_moment(prior, utility.power(), market, nodes);
    return std::pow(x0 * std::exp(rT), a) / a * std::pow(m, 1.0 - a);
}

double value_function_general(const EmpiricalPrior& prior, double x0, const UtilitySpec& utility,
                              const MarketSpec& market, const GaussianNodes& nodes) {
    const BudgetSolution budget = solve_budget_k(prior, x0, utility, market, nodes);
    const double rT = market.rate() * market.horizon();
    const Vector log_f = log_F_on_nodes(MixtureKernel(prior, market), market, nodes);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < log_f.size(); ++j) {
        const double f = std::exp(log_f(j));
        const double y = std::exp(std::log(budget.k) - rT - log_f(j));
        sum += nodes.weights(j) * f * utility.utility(utility.inverse_marginal(y));
    }
    return sum;
}

PolicyEvaluator::PolicyEvaluator(const EmpiricalPrior& prior, const UtilitySpec& utility,
                                 const MarketSpec& market, const GaussianNodes& nodes)
    : kernel_(prior, market), utility_(utility), market_(market) {
    if (nodes.dim() != prior.dim()) {
        throw std::invalid_argument("PolicyEvaluator: node dimension does not match the prior");
    }
    projections_ = nodes.points * kernel_.theta().transpose();
    log_node_w_ = nodes.weights.array().log().matrix();
    base_ = kernel_.log_weights() - 0.5 * market.horizon() * kernel_.theta_sq();
}

Vector PolicyEvaluator::fraction(double t, const Vector& observation) const {
    const double T = market_.horizon();
    if (!(t >= 0.0) || !(t < T)) {
        throw std::invalid_argument("optimal_fraction: t must satisfy 0 <= t < T");
    }
    if (observation.size() != kernel_.dim()) {
        throw std::invalid_argument("optimal_fraction: observation has the wrong dimension");
    }
    const double s = T - t;
    const double one_minus_alpha = 1.0 - utility_.alpha();
    Vector ratio;
    if (s < 1e-12) {
        // Point mass: grad F / ((1 - alpha) F) at Y.
        const Vector terms = kernel_.log_terms(observation, T);
        const double lf = log_sum_exp(terms);
        ratio = kernel_.theta().transpose() * (terms.array() - lf).exp().matrix() / one_minus_alpha;
    } else {
        // Per node: log F_j by log-sum-exp over atoms, and the atom posterior
        // pi_jk = w_k L_k / F_j. The numerator weight w_j F_j^beta w_k L_k
        // factors as rho_j pi_jk with rho_j = w_j F_j^{1/(1-alpha)}. Nodes are
        // processed in cache-sized blocks with a running max on log rho.
        const Vector shift = base_ + kernel_.theta() * observation;
        const double root_s = std::sqrt(s);
        const Eigen::Index n_nodes = projections_.rows();
        const Eigen::Index n_atoms = projections_.cols();
        constexpr Eigen::Index kBlock = 1024;
        Matrix block(kBlock, n_atoms);
        Vector atom_mass = Vector::Zero(n_atoms);
        double rho_sum = 0.0;
        double running_max = -std::numeric_limits<double>::infinity();
        Vector mx(kBlock), sums(kBlock), log_rho(kBlock);
        for (Eigen::Index first = 0; first < n_nodes; first += kBlock) {
            const Eigen::Index len = std::min(kBlock, n_nodes - first);
            auto b = block.topRows(len);
            auto m = mx.head(len);
            auto sm = sums.head(len);
            auto lr = log_rho.head(len);
            for (Eigen::Index k = 0; k < n_atoms; ++k) {
                b.col(k) = (root_s * projections_.middleRows(first, len).col(k)).array() + shift(k);
                m = k == 0 ? Vector(b.col(0)) : Vector(m.cwiseMax(b.col(k)));
            }
            for (Eigen::Index k = 0; k < n_atoms; ++k) b.col(k) = (b.col(k) - m).array().exp();
            sm = b.rowwise().sum();
            // log rho_j minus the posterior normaliser, so exp(lr_j) b.row(j) = rho_j pi_j.
            const Vector log_sums = sm.array().log();
            lr = log_node_w_.segment(first, len) + utility_.power() * (m + log_sums) - log_sums;
            const double block_max = (lr + log_sums).maxCoeff();
            if (block_max > running_max) {
                const double scale = std::exp(running_max - block_max);
                atom_mass *= scale;
                rho_sum *= scale;
                running_max = block_max;
            }
            const Vector scaled = (lr.array() - running_max).exp();
            atom_mass.noalias() += b.transpose() * scaled;
            rho_sum += scaled.dot(sm);
        }
        ratio = kernel_.theta().transpose() * atom_mass / (one_minus_alpha * rho_sum);
    }
    Vector out = market_.sigma_inv().transpose() * ratio;
    if (!out.allFinite()) throw NumericError("optimal_fraction: non-finite weights");
    return out;
}

Vector optimal_fraction(const EmpiricalPrior& prior, double t, const Vector& observation,
                        const UtilitySpec& utility, const MarketSpec& market,
                        const GaussianNodes& nodes) {
    return PolicyEvaluator(prior, utility, market, nodes).fraction(t, observation);
}

}  // namespace drbc
