#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>

#include "drbc/types.hpp"

namespace drbc {

struct GaussHermiteTensor {
    int nodes_per_dim = 40;
};

struct MonteCarlo {
    std::size_t n_samples = 200000;
    std::uint64_t seed = 0;
};

// How integrals against the Gaussian weight N(0, s I_d) are evaluated.
struct QuadratureSpec {
    std::variant<GaussHermiteTensor, MonteCarlo> method = GaussHermiteTensor{};
    double variance_scale = 1.0;

    // Tensor Gauss-Hermite for d <= 3, antithetic Monte Carlo above.
    static QuadratureSpec default_for(int dim, std::uint64_t seed = 0);

    void validate() const;
};

// Nodes and weights for the standard normal N(0, I_d). The weights sum to one,
// so an expectation under N(0, s I_d) is sum_j w_j f(sqrt(s) * points.row(j)).
struct GaussianNodes {
    Matrix points;
    Vector weights;

    int dim() const { return static_cast<int>(points.cols()); }
    Eigen::Index size() const { return points.rows(); }
};

GaussianNodes make_nodes(const QuadratureSpec& spec, int dim);

// One-dimensional Gauss-Hermite rule for the standard normal weight.
void gauss_hermite_normal(int n, Vector& nodes, Vector& weights);

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, Vector node)
        : std::runtime_error(what), node_(std::move(node)) {}
    const Vector& node() const { return node_; }

private:
    Vector node_;
};

// E[f(Z)] with Z ~ N(0, spec.variance_scale * I_dim). Throws QuadratureError
// naming the node if f is not finite there.
double gaussian_integrate(const std::function<double(const Vector&)>& f,
                          const QuadratureSpec& spec, int dim);

}  // namespace drbc
