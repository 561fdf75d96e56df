#pragma once

#include <filesystem>

#include "drbc/market_sim.hpp"
#include "drbc/types.hpp"

namespace drbc {

// Finite-atom drift prior: one row of `atoms` per support point.
class EmpiricalPrior {
public:
    EmpiricalPrior(Matrix atoms, Vector weights);

    static EmpiricalPrior uniform(Matrix atoms);
    static EmpiricalPrior dirac(const Vector& atom, int copies = 1);

    const Matrix& atoms() const { return atoms_; }
    const Vector& weights() const { return weights_; }
    Eigen::Index size() const { return atoms_.rows(); }
    int dim() const { return static_cast<int>(atoms_.cols()); }
    Vector atom(Eigen::Index k) const { return atoms_.row(k).transpose(); }
    Vector mean() const { return atoms_.transpose() * weights_; }

private:
    Matrix atoms_;
    Vector weights_;
};

enum class WindowMode { Consecutive, Type };

struct WindowingSpec {
    WindowMode mode = WindowMode::Consecutive;
    int window_len = 252;
    int n_windows = 10;
    int n_types = 10;

    int required_steps() const { return window_len * n_windows; }
};

// Endpoint log-return drift estimate over a price slice (rows = time).
Vector estimate_window_drift(const Eigen::Ref<const Matrix>& prices, const MarketSpec& market,
                             double window_span);

// Builds the prior from the trailing window_len * n_windows steps of `prices`.
EmpiricalPrior build_prior(const Eigen::Ref<const Matrix>& prices, const MarketSpec& market,
                           const WindowingSpec& windowing);

EmpiricalPrior clamp_atoms(const EmpiricalPrior& prior, const Vector& lower, const Vector& upper);

void write_prior_csv(const EmpiricalPrior& prior, const std::filesystem::path& file);

}  // namespace drbc
