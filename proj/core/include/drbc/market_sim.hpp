#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "drbc/types.hpp"

namespace drbc {

// Constant-coefficient market: d risky assets with volatility matrix sigma,
// risk-free rate r, plan horizon T and grid step dt (all in years).
class MarketSpec {
public:
    MarketSpec(double rate, Matrix sigma, double horizon, double dt,
               double max_condition = 1e12);

    int dim() const { return static_cast<int>(sigma_.rows()); }
    double rate() const { return rate_; }
    double horizon() const { return horizon_; }
    double dt() const { return dt_; }
    const Matrix& sigma() const { return sigma_; }
    const Matrix& sigma_inv() const { return sigma_inv_; }

    // 1/2 * ||sigma_{i.}||^2 per asset (the Ito correction of log prices).
    const Vector& ito_correction() const { return ito_; }

    // sigma^{-1} (b - r 1).
    Vector market_price_of_risk(const Vector& drift) const;

    MarketSpec with_horizon(double horizon) const;

private:
    double rate_;
    Matrix sigma_;
    Matrix sigma_inv_;
    Vector ito_;
    double horizon_;
    double dt_;
};

enum class KappaLaw { Smooth, Volatile };  // N(0,1) and N(12,10)

// B_i(t) = (B0/2) (1 + 2 cos(2 pi kappa_i t)).
struct SinusoidalDriftSpec {
    double b0 = 0.4;
    Vector kappa;

    static SinusoidalDriftSpec sample(int dim, double b0, KappaLaw law, std::uint64_t seed);
    void validate() const;
};

Vector drift_at(const SinusoidalDriftSpec& spec, double t);

using DriftModel = std::variant<SinusoidalDriftSpec, Vector>;

Vector drift_at(const DriftModel& model, double t);

struct PathGrid {
    std::vector<double> times;  // n_steps + 1 points starting at 0
    Matrix prices;              // (n_steps + 1) x d
    Matrix brownian;            // n_steps x d increments dW

    Eigen::Index steps() const { return prices.rows() - 1; }
    int dim() const { return static_cast<int>(prices.cols()); }
};

// Exact log-scheme with left-endpoint drift; draws for (path_id, step) come
// from their own counter-addressed substream.
PathGrid simulate_paths(const MarketSpec& market, const DriftModel& drift, int n_steps,
                        std::uint64_t seed, std::uint64_t path_id = 0,
                        double initial_price = 100.0);

// Y(t) = sigma^{-1} (log S(t) - log S(0) + (1/2 diag(sigma sigma^T) - r 1) t),
// one row per grid point, reconstructed from prices alone.
Matrix observation_Y(const PathGrid& path, const MarketSpec& market);

// Same quantity at a single grid time; refuses times that are not on the grid.
Vector observation_Y_at(const PathGrid& path, const MarketSpec& market, double t);

// Y over a price slice whose first row is the plan start; `elapsed` in years.
Vector observation_from_prices(const Eigen::Ref<const Vector>& start_prices,
                               const Eigen::Ref<const Vector>& prices, double elapsed,
                               const MarketSpec& market);

void write_path_csv(const PathGrid& path, const std::filesystem::path& file);
PathGrid read_path_csv(const std::filesystem::path& file);

}  // namespace drbc
