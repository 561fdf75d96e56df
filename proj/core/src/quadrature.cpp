#include "drbc/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "drbc/rng.hpp"

namespace drbc {

namespace {

// Orthonormal Hermite recurrence: returns p_n(x) and p_{n-1}(x) normalised so
// that int p_j^2 e^{-x^2} dx = 1.
void hermite_orthonormal(int n, double x, double& pn, double& pn1) {
    double p0 = std::pow(std::numbers::pi, -0.25);
    double p1 = std::numbers::sqrt2 * x * p0;
    if (n == 0) {
        pn = p0;
        pn1 = 0.0;
        return;
    }
    for (int j = 2; j <= n; ++j) {
        const double pj = x * std::sqrt(2.0 / j) * p1 - std::sqrt((j - 1.0) / j) * p0;
        p0 = p1;
        p1 = pj;
    }
    pn = p1;
    pn1 = p0;
}

}  // namespace

QuadratureSpec QuadratureSpec::default_for(int dim, std::uint64_t seed) {
    QuadratureSpec spec;
    if (dim <= 3) {
        spec.method = GaussHermiteTensor{40};
    } else {
        spec.method = MonteCarlo{200000, seed};
    }
    return spec;
}

void QuadratureSpec::validate() const {
    if (!(variance_scale > 0.0) || !std::isfinite(variance_scale)) {
        throw std::invalid_argument("quadrature: variance_scale must be positive");
    }
    if (const auto* gh = std::get_if<GaussHermiteTensor>(&method)) {
        if (gh->nodes_per_dim < 5) {
            throw std::invalid_argument("quadrature: Gauss-Hermite needs at least 5 nodes per dimension");
        }
    } else if (std::get<MonteCarlo>(method).n_samples < 10000) {
        throw std::invalid_argument("quadrature: Monte Carlo needs at least 10^4 samples");
    }
}

void gauss_hermite_normal(int n, Vector& nodes, Vector& weights) {
    if (n < 1) throw std::invalid_argument("gauss_hermite_normal: n must be positive");

    // Golub-Welsch for starting values, then Newton polish on the
    // physicists' polynomial so the tail weights keep full relative accuracy.
    Matrix jacobi = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi, Eigen::EigenvaluesOnly);
    Vector x = eig.eigenvalues();

    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double xi = x(i);
        double pn = 0.0, pn1 = 0.0;
        for (int it = 0; it < 20; ++it) {
            hermite_orthonormal(n, xi, pn, pn1);
            const double dp = std::sqrt(2.0 * n) * pn1;
            const double step = pn / dp;
            xi -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(xi))) break;
        }
        hermite_orthonormal(n, xi, pn, pn1);
        const double dp = std::sqrt(2.0 * n) * pn1;
        // Physicists' weight is 2/dp^2; map e^{-x^2} to the N(0,1) density.
        nodes(i) = std::numbers::sqrt2 * xi;
        weights(i) = 2.0 / (dp * dp) / std::sqrt(std::numbers::pi);
    }
    weights /= weights.sum();
}

GaussianNodes make_nodes(const QuadratureSpec& spec, int dim) {
    spec.validate();
    if (dim < 1) throw std::invalid_argument("make_nodes: dimension must be positive");

    GaussianNodes out;
    if (const auto* gh = std::get_if<GaussHermiteTensor>(&spec.method)) {
        Vector x1, w1;
        gauss_hermite_normal(gh->nodes_per_dim, x1, w1);
        const int m = gh->nodes_per_dim;
        Eigen::Index total = 1;
        for (int k = 0; k < dim; ++k) total *= m;
        out.points.resize(total, dim);
        out.weights.resize(total);
        for (Eigen::Index j = 0; j < total; ++j) {
            Eigen::Index rem = j;
            double w = 1.0;
            for (int k = 0; k < dim; ++k) {
                const Eigen::Index idx = rem % m;
                rem /= m;
                out.points(j, k) = x1(idx);
                w *= w1(idx);
            }
            out.weights(j) = w;
        }
        return out;
    }

    // Antithetic pairs (z, -z): odd moments vanish exactly.
    const auto& mc = std::get<MonteCarlo>(spec.method);
    const Eigen::Index half = static_cast<Eigen::Index>((mc.n_samples + 1) / 2);
    out.points.resize(2 * half, dim);
    const CounterRng rng(mc.seed, 0x51A7u + static_cast<std::uint64_t>(dim));
    std::vector<double> buf(static_cast<std::size_t>(dim));
    for (Eigen::Index j = 0; j < half; ++j) {
        rng.normals(static_cast<std::uint64_t>(j), buf);
        for (int k = 0; k < dim; ++k) {
            out.points(j, k) = buf[static_cast<std::size_t>(k)];
            out.points(half + j, k) = -buf[static_cast<std::size_t>(k)];
        }
    }
    out.weights = Vector::Constant(2 * half, 1.0 / static_cast<double>(2 * half));
    return out;
}

double gaussian_integrate(const std::function<double(const Vector&)>& f,
                          const QuadratureSpec& spec, int dim) {
    const GaussianNodes nodes = make_nodes(spec, dim);
    const double scale = std::sqrt(spec.variance_scale);
    Vector values(nodes.size());
    Vector z(dim);
    for (Eigen::Index j = 0; j < nodes.size(); ++j) {
        z = scale * nodes.points.row(j).transpose();
        const double v = f(z);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "gaussian_integrate: non-finite integrand at node " << j << " (z = "
                << z.transpose() << ")";
            throw QuadratureError(msg.str(), z);
        }
        values(j) = v;
    }
    return nodes.weights.dot(values);
}

}  // namespace drbc
