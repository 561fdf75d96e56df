#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "drbc/merton_core.hpp"
#include "drbc/quadrature.hpp"
#include "drbc/robust_prior.hpp"

namespace drbc::testing {

inline GaussianNodes gh_nodes(int dim, int per_dim = 40) {
    QuadratureSpec q;
    q.method = GaussHermiteTensor{per_dim};
    return make_nodes(q, dim);
}

// Atoms N(centre, scale^2 I), Dirichlet-ish positive weights.
inline EmpiricalPrior random_prior(int dim, int atoms, std::uint64_t seed, double centre = 0.1,
                                   double scale = 0.3) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.2, 1.0);
    Matrix a(atoms, dim);
    Vector w(atoms);
    for (int k = 0; k < atoms; ++k) {
        for (int i = 0; i < dim; ++i) a(k, i) = centre + scale * normal(gen);
        w(k) = unif(gen);
    }
    return EmpiricalPrior(a, w / w.sum());
}

// Lower-triangular volatility with diagonal in [0.15, 0.45].
inline Matrix random_sigma(int dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> diag(0.15, 0.45);
    std::uniform_real_distribution<double> off(-0.08, 0.08);
    Matrix s = Matrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        s(i, i) = diag(gen);
        for (int j = 0; j < i; ++j) s(i, j) = off(gen);
    }
    return s;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Dense Gauss-Hermite atoms approximating N(0, gamma^2) in one dimension.
inline EmpiricalPrior gaussian_prior_1d(double gamma, int atoms) {
    Vector nodes, weights;
    gauss_hermite_normal(atoms, nodes, weights);
    return EmpiricalPrior(gamma * Matrix(nodes), weights);
}

// Central difference of J under translation of atom k, divided by its weight.
inline Vector gateaux_H(const EmpiricalPrior& p, Eigen::Index k, const UtilitySpec& u, const MarketSpec& m,
                        const GaussianNodes& nodes, double eps = 1e-4) {
    Vector out(p.dim());
    for (int i = 0; i < p.dim(); ++i) {
        Matrix plus = p.atoms(), minus = p.atoms();
        plus(k, i) += eps;
        minus(k, i) -= eps;
        const double jp = j_functional(EmpiricalPrior(plus, p.weights()), u, m, nodes);
        const double jm = j_functional(EmpiricalPrior(minus, p.weights()), u, m, nodes);
        out(i) = (jp - jm) / (2.0 * eps) / p.weights()(k);
    }
    return out;
}

// Markowitz with budget and return floor: min-variance point if it clears the
// floor, else the KKT system with both equalities.
inline Vector markowitz_oracle(const Vector& mu, const Matrix& cov, double floor) {
    const Eigen::Index d = mu.size();
    const Vector ones = Vector::Ones(d);
    const Vector s1 = cov.ldlt().solve(ones);
    const Vector mv = s1 / ones.dot(s1);
    if (mu.dot(mv) >= floor) return mv;
    Matrix kkt = Matrix::Zero(d + 2, d + 2);
    kkt.topLeftCorner(d, d) = 2.0 * cov;
    kkt.block(0, d, d, 1) = -ones;
    kkt.block(0, d + 1, d, 1) = -mu;
    kkt.block(d, 0, 1, d) = ones.transpose();
    kkt.block(d + 1, 0, 1, d) = mu.transpose();
    Vector rhs = Vector::Zero(d + 2);
    rhs(d) = 1.0;
    rhs(d + 1) = floor;
    return kkt.fullPivLu().solve(rhs).head(d);
}

}  // namespace drbc::testing
