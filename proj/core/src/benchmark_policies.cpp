#include "drbc/benchmark_policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "drbc/errors.hpp"

namespace drbc {

PolicyWeights budgeted(Vector weights) {
    PolicyWeights out;
    out.cash = 1.0 - weights.sum();
    out.weights = std::move(weights);
    return out;
}

PolicyWeights merton_plugin(const Vector& b_hat, const MarketSpec& market, const UtilitySpec& utility) {
    const Vector theta = market.market_price_of_risk(b_hat);
    return budgeted(market.sigma_inv().transpose() * theta / (1.0 - utility.alpha()));
}

PolicyWeights apply_short_cap(const PolicyWeights& weights, double cap) {
    if (!(cap >= 0.0)) throw std::invalid_argument("apply_short_cap: cap must be nonnegative");
    PolicyWeights out = weights;
    for (Eigen::Index i = 0; i < out.weights.size(); ++i) {
        if (out.weights(i) < -cap) {
            out.cash += out.weights(i) + cap;
            out.weights(i) = -cap;
        }
    }
    return out;
}

Vector drc_adversarial_drift(const Vector& b_hat, const MarketSpec& market, double delta_drc) {
    if (!(delta_drc >= 0.0)) throw std::invalid_argument("drc_policy: delta must be nonnegative");
    const Vector excess = (b_hat.array() - market.rate()).matrix();
    const double norm = market.market_price_of_risk(b_hat).norm();
    const double factor = norm > 0.0 ? std::max(0.0, 1.0 - std::sqrt(2.0 * delta_drc) / norm) : 0.0;
    return (excess * factor).array() + market.rate();
}

PolicyWeights drc_policy(const Vector& b_hat, const MarketSpec& market, const UtilitySpec& utility,
                         double delta_drc, double short_cap) {
    return apply_short_cap(merton_plugin(drc_adversarial_drift(b_hat, market, delta_drc), market, utility),
                           short_cap);
}

void DrmvProblem::validate() const {
    const Eigen::Index d = mu_hat.size();
    if (d < 1) throw std::invalid_argument("DrmvProblem: empty return vector");
    if (sigma_hat.rows() != d || sigma_hat.cols() != d) {
        throw std::invalid_argument("DrmvProblem: covariance shape does not match the return vector");
    }
    if (!mu_hat.allFinite() || !sigma_hat.allFinite()) {
        throw std::invalid_argument("DrmvProblem: non-finite inputs");
    }
    if ((sigma_hat - sigma_hat.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + sigma_hat.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("DrmvProblem: covariance is not symmetric");
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("DrmvProblem: delta must be nonnegative");
    if (!(p_norm >= 2.0) || !std::isfinite(p_norm)) {
        throw std::invalid_argument("DrmvProblem: p_norm must be finite and at least 2");
    }
}

namespace {

// |phi|_p with gradient and Hessian, p >= 2; phi != 0 on the budget plane.
struct NormParts {
    double value;
    Vector grad;
    Matrix hess;
};

NormParts p_norm_parts(const Vector& phi, double p) {
    const Eigen::Index d = phi.size();
    NormParts out;
    if (p == 2.0) {
        out.value = phi.norm();
        out.grad = phi / out.value;
        out.hess = (Matrix::Identity(d, d) - out.grad * out.grad.transpose()) / out.value;
        return out;
    }
    const Vector a = phi.cwiseAbs();
    const double scale = a.maxCoeff();
    out.value = scale * std::pow((a / scale).array().pow(p).sum(), 1.0 / p);
    const Vector ratio = a / out.value;
    out.grad = (ratio.array().pow(p - 1.0) * phi.array().sign()).matrix();
    out.hess = (p - 1.0) * (Matrix(ratio.array().pow(p - 2.0).matrix().asDiagonal()) / out.value -
                            out.grad * out.grad.transpose() / out.value);
    return out;
}

struct Affine {
    Vector origin;  // 1/d on every entry
    Matrix basis;   // d x (d-1), orthonormal basis of the complement of 1
};

Affine budget_plane(Eigen::Index d) {
    Affine out;
    out.origin = Vector::Constant(d, 1.0 / static_cast<double>(d));
    Matrix m = Matrix::Identity(d, d);
    m.col(0) = Vector::Ones(d);
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    out.basis = q.rightCols(d - 1);
    return out;
}

struct Evaluation {
    double f;          // objective
    Vector grad_f;
    Matrix hess_f;
    double g;          // alpha_bar + s |phi| - mu'phi
    Vector grad_g;
    Matrix hess_g;
};

Evaluation evaluate(const DrmvProblem& pb, const Vector& phi) {
    const double s = std::sqrt(pb.delta);
    Evaluation e;
    if (s > 0.0) {
        const NormParts np = p_norm_parts(phi, pb.p_norm);
        e.f = phi.dot(pb.sigma_hat * phi) + s * np.value;
        e.grad_f = 2.0 * pb.sigma_hat * phi + s * np.grad;
        e.hess_f = 2.0 * pb.sigma_hat + s * np.hess;
        e.g = pb.alpha_bar + s * np.value - pb.mu_hat.dot(phi);
        e.grad_g = s * np.grad - pb.mu_hat;
        e.hess_g = s * np.hess;
    } else {
        const Eigen::Index d = phi.size();
        e.f = phi.dot(pb.sigma_hat * phi);
        e.grad_f = 2.0 * pb.sigma_hat * phi;
        e.hess_f = 2.0 * pb.sigma_hat;
        e.g = pb.alpha_bar - pb.mu_hat.dot(phi);
        e.grad_g = -pb.mu_hat;
        e.hess_g = Matrix::Zero(d, d);
    }
    return e;
}

// Solves H x = -g in reduced coordinates, adding a ridge if H is not positive definite.
Vector newton_direction(const Matrix& h, const Vector& g) {
    const Eigen::Index m = h.rows();
    double ridge = 0.0;
    const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 30; ++attempt) {
        Eigen::LLT<Matrix> llt(h + ridge * Matrix::Identity(m, m));
        if (llt.info() == Eigen::Success) {
            const Vector x = llt.solve(-g);
            if (x.allFinite()) return x;
        }
        ridge = ridge == 0.0 ? 1e-12 * scale : ridge * 10.0;
    }
    return -g;
}

struct RobustReturnMax {
    double value;    // +inf if unbounded
    Vector phi;      // maximizer, or a point with robust return above any finite target when unbounded
};

// max mu'phi - s |phi|_p on the budget plane.
RobustReturnMax max_robust_return(const DrmvProblem& pb, const Affine& plane) {
    const Eigen::Index d = pb.mu_hat.size();
    const double s = std::sqrt(pb.delta);
    const Vector pmu = plane.basis * (plane.basis.transpose() * pb.mu_hat);
    const double m = pmu.norm();
    const double c = pb.mu_hat.dot(plane.origin);
    const double inf = std::numeric_limits<double>::infinity();

    if (d == 1) {
        const Vector phi = Vector::Ones(1);
        return {pb.mu_hat(0) - s, phi};
    }
    if (s == 0.0) {
        if (m > 0.0) return {inf, plane.origin + pmu / m};
        return {c, plane.origin};
    }
    if (pb.p_norm == 2.0) {
        // phi = 1/d + t e with e = P mu / |P mu|; h(t) = c + m t - s sqrt(1/d + t^2).
        if (m >= s) return {inf, plane.origin + (m > 0.0 ? Vector(pmu / m) : Vector::Zero(d))};
        const double inv_d = 1.0 / static_cast<double>(d);
        const double t = m > 0.0 ? m * std::sqrt(inv_d) / std::sqrt(s * s - m * m) : 0.0;
        const Vector phi = plane.origin + (m > 0.0 ? Vector(t * pmu / m) : Vector::Zero(d));
        return {c + m * t - s * std::sqrt(inv_d + t * t), phi};
    }

    // General p: damped Newton on -h in reduced coordinates.
    Vector u = Vector::Zero(d - 1);
    auto neg_h = [&](const Vector& uu) {
        const Vector phi = plane.origin + plane.basis * uu;
        return -(pb.mu_hat.dot(phi) - s * p_norm_parts(phi, pb.p_norm).value);
    };
    for (int it = 0; it < 200; ++it) {
        const Vector phi = plane.origin + plane.basis * u;
        const NormParts np = p_norm_parts(phi, pb.p_norm);
        const Vector grad = plane.basis.transpose() * (s * np.grad - pb.mu_hat);
        if (grad.norm() < 1e-13) break;
        const Matrix hess = plane.basis.transpose() * (s * np.hess) * plane.basis;
        const Vector step = newton_direction(hess, grad);
        double a = 1.0;
        const double f0 = neg_h(u);
        while (a > 1e-12 && neg_h(u + a * step) > f0 + 1e-4 * a * grad.dot(step)) a *= 0.5;
        u += a * step;
        if (u.norm() > 1e8) return {inf, plane.origin + plane.basis * u};
    }
    const Vector phi = plane.origin + plane.basis * u;
    return {-neg_h(u), phi};
}

double kkt_residual(const DrmvProblem& pb, const Affine& plane, const Vector& phi, double lambda) {
    const Evaluation e = evaluate(pb, phi);
    const double stat = (plane.basis.transpose() * (e.grad_f + lambda * e.grad_g)).norm();
    const double budget = std::abs(phi.sum() - 1.0);
    return std::max({stat, budget, std::max(0.0, e.g), std::abs(lambda * e.g)});
}

// Budget-only minimizer of the objective.
Vector unconstrained_min(const DrmvProblem& pb, const Affine& plane) {
    const Eigen::Index d = pb.mu_hat.size();
    Vector u = Vector::Zero(d - 1);
    auto f_at = [&](const Vector& uu) { return evaluate(pb, plane.origin + plane.basis * uu).f; };
    for (int it = 0; it < 200; ++it) {
        const Evaluation e = evaluate(pb, plane.origin + plane.basis * u);
        const Vector grad = plane.basis.transpose() * e.grad_f;
        if (grad.norm() < 1e-14) break;
        const Vector step = newton_direction(plane.basis.transpose() * e.hess_f * plane.basis, grad);
        double a = 1.0;
        while (a > 1e-14 && f_at(u + a * step) > e.f + 1e-4 * a * grad.dot(step)) a *= 0.5;
        u += a * step;
        if (a * step.norm() < 1e-15) break;
    }
    return plane.origin + plane.basis * u;
}

}  // namespace

DrmvSolution drmv_solve_detailed(const DrmvProblem& pb) {
    pb.validate();
    const Eigen::Index d = pb.mu_hat.size();
    const Affine plane = budget_plane(d);

    const RobustReturnMax best = max_robust_return(pb, plane);
    if (best.value < pb.alpha_bar) {
        throw InfeasibleTarget("drmv_solve: target return " + std::to_string(pb.alpha_bar) +
                                   " exceeds the maximal robust return " + std::to_string(best.value),
                               best.value, best.phi);
    }

    DrmvSolution out;
    if (d == 1) {
        out.policy = PolicyWeights{Vector::Ones(1), 0.0};
        out.objective = evaluate(pb, out.policy.weights).f;
        return out;
    }

    // Constraint inactive at the budget-only minimizer.
    const Vector phi_free = unconstrained_min(pb, plane);
    if (evaluate(pb, phi_free).g <= 1e-12) {
        out.policy = PolicyWeights{phi_free, 0.0};
        out.objective = evaluate(pb, phi_free).f;
        out.kkt_residual = kkt_residual(pb, plane, phi_free, 0.0);
        return out;
    }

    // Strictly feasible start.
    Vector phi = best.phi;
    if (std::isinf(best.value)) {
        const Vector dir = best.phi - plane.origin;
        double t = 1.0;
        while (evaluate(pb, plane.origin + t * dir).g >= 0.0 && t < 1e12) t *= 2.0;
        phi = plane.origin + t * dir;
    }
    double lambda = 0.0;
    if (evaluate(pb, phi).g < 0.0) {
        Vector u = plane.basis.transpose() * (phi - plane.origin);
        auto barrier = [&](const Vector& uu, double tb) {
            const Evaluation e = evaluate(pb, plane.origin + plane.basis * uu);
            if (!(e.g < 0.0)) return std::numeric_limits<double>::infinity();
            return tb * e.f - std::log(-e.g);
        };
        for (double tb = 1.0; tb < 1e13; tb *= 8.0) {
            for (int it = 0; it < 100; ++it) {
                const Evaluation e = evaluate(pb, plane.origin + plane.basis * u);
                const Vector grad_full = tb * e.grad_f + e.grad_g / (-e.g);
                const Matrix hess_full = tb * e.hess_f + e.hess_g / (-e.g) +
                                         e.grad_g * e.grad_g.transpose() / (e.g * e.g);
                const Vector grad = plane.basis.transpose() * grad_full;
                const Matrix hess = plane.basis.transpose() * hess_full * plane.basis;
                const Vector step = newton_direction(hess, grad);
                const double decrement = -grad.dot(step);
                if (decrement < 1e-14) break;
                const double b0 = barrier(u, tb);
                double a = 1.0;
                while (a > 1e-14 && !(barrier(u + a * step, tb) <= b0 - 1e-4 * a * decrement)) a *= 0.5;
                if (a <= 1e-14) break;
                u += a * step;
            }
            lambda = 1.0 / (tb * -evaluate(pb, plane.origin + plane.basis * u).g);
        }
        phi = plane.origin + plane.basis * u;
    }

    // Polish on the active constraint: reduced stationarity plus g = 0.
    Vector u = plane.basis.transpose() * (phi - plane.origin);
    double best_res = kkt_residual(pb, plane, phi, lambda);
    Vector best_phi = phi;
    double best_lambda = lambda;
    const Eigen::Index m = d - 1;
    for (int it = 0; it < 50 && best_res > 1e-13; ++it) {
        const Vector cur = plane.origin + plane.basis * u;
        const Evaluation e = evaluate(pb, cur);
        Matrix jac = Matrix::Zero(m + 1, m + 1);
        Vector rhs(m + 1);
        jac.topLeftCorner(m, m) = plane.basis.transpose() * (e.hess_f + lambda * e.hess_g) * plane.basis;
        const Vector gg = plane.basis.transpose() * e.grad_g;
        jac.topRightCorner(m, 1) = gg;
        jac.bottomLeftCorner(1, m) = gg.transpose();
        rhs.head(m) = -(plane.basis.transpose() * (e.grad_f + lambda * e.grad_g));
        rhs(m) = -e.g;
        const Vector step = jac.fullPivLu().solve(rhs);
        if (!step.allFinite()) break;
        u += step.head(m);
        lambda += step(m);
        const Vector next = plane.origin + plane.basis * u;
        const double res = kkt_residual(pb, plane, next, lambda);
        if (res < best_res && lambda >= 0.0) {
            best_res = res;
            best_phi = next;
            best_lambda = lambda;
        }
    }

    out.policy = PolicyWeights{best_phi, 0.0};
    out.objective = evaluate(pb, best_phi).f;
    out.kkt_residual = best_res;
    out.return_constraint_active = best_lambda > 0.0;
    if (!(best_res <= 1e-6)) {
        throw NumericError("drmv_solve: KKT residual " + std::to_string(best_res) + " above tolerance");
    }
    return out;
}

PolicyWeights drmv_solve(const DrmvProblem& problem) {
    return drmv_solve_detailed(problem).policy;
}

DrmvSolution drmv_rf_solve_detailed(const DrmvProblem& problem, double rate, double rf_noise) {
    problem.validate();
    if (!(rf_noise > 0.0)) throw std::invalid_argument("drmv_rf_solve: risk-free noise must be positive");
    const Eigen::Index d = problem.mu_hat.size();
    DrmvProblem aug = problem;
    aug.mu_hat.resize(d + 1);
    aug.mu_hat << problem.mu_hat, rate;
    aug.sigma_hat = Matrix::Zero(d + 1, d + 1);
    aug.sigma_hat.topLeftCorner(d, d) = problem.sigma_hat;
    aug.sigma_hat(d, d) = rf_noise;

    DrmvSolution sol = drmv_solve_detailed(aug);
    const Vector full = sol.policy.weights;
    sol.policy.weights = full.head(d);
    sol.policy.cash = full(d);
    return sol;
}

PolicyWeights drmv_rf_solve(const DrmvProblem& problem, double rate, double rf_noise) {
    return drmv_rf_solve_detailed(problem, rate, rf_noise).policy;
}

}  // namespace drbc
