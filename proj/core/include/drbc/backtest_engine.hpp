#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drbc/benchmark_policies.hpp"
#include "drbc/market_sim.hpp"
#include "drbc/merton_core.hpp"
#include "drbc/prior_builder.hpp"
#include "drbc/quadrature.hpp"
#include "drbc/radius_calibration.hpp"

namespace drbc {

enum class Strategy { Bayesian, Drbc, DrmvNoRf, DrmvRf, Drc, MertonPlugin, RiskFree, Oracle };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

// A strategy plus the factor applied to the calibrated radius (DRBC and DRC only).
struct StrategySpec {
    Strategy kind = Strategy::Bayesian;
    double delta_scale = 1.0;
    std::string label;

    std::string name() const;
};

enum class ProjectionMode { Static, TimeVarying };

struct TradingProtocol {
    int lookback_steps = 2520;
    int rebalance_every = 22;
    int prior_update_every = 30;
    int eval_window = 252;
    int trade_steps = 252;
    // Plan horizon in years; 0 means prior_update_every * dt.
    double plan_horizon = 0.0;
    double eval_rate = 0.01;
    ProjectionMode projection = ProjectionMode::Static;
    // Weights use prices one step older and the first step of each plan holds cash.
    bool info_lag = false;
    double short_cap = 0.5;
    double x0 = 1.0;

    WindowingSpec windowing;
    std::optional<double> clamp_bound;
    double confidence = 0.95;
    QuantileMode quantile = AnalyticQuantile{};

    double drmv_delta = 1e-4;
    double drmv_target = 0.10;
    double drmv_rf_target = 0.105;
    double drmv_p = 2.0;
    // Negative: use the DRBC radius of the current prior update.
    double drc_delta = -1.0;

    void validate(const MarketSpec& market) const;
    double resolved_plan_horizon(double dt) const;
};

struct StrategyResult {
    std::string name;
    std::vector<double> wealth;  // trade_steps + 1 points
    Matrix weights;              // trade_steps x d
    Vector cash;                 // trade_steps
    double sharpe = 0.0;
    double terminal_utility = 0.0;
    bool bankrupt = false;
    double mean_leverage = 0.0;
    double max_leverage = 0.0;
    double cap_hit_rate = 0.0;
    int fallbacks = 0;  // prior updates that fell back to the non-robust prior
};

struct CalibrationRecord {
    int step = 0;
    bool ok = false;
    CalibrationResult result;
    std::string error;
};

struct BacktestReport {
    std::vector<double> times;  // trade_steps + 1 points
    std::vector<StrategyResult> strategies;
    std::vector<CalibrationRecord> calibrations;
};

// x (1 + r dt + sum_i w_i (R_i - r dt)).
double step_wealth(double x, const PolicyWeights& weights, const Vector& step_return, double rate, double dt);

// Annualized excess mean over annualized volatility of simple step returns.
double sharpe_ratio(const std::vector<double>& wealth, double r_eval, double periods_per_year);

double terminal_utility(double wealth_t, const UtilitySpec& utility);

// prices: rows are grid points spaced by market.dt(). The trading window
// starts at row lookback_steps. `truth` is required for Strategy::Oracle.
BacktestReport run_backtest(const Matrix& prices, const TradingProtocol& protocol,
                            const std::vector<StrategySpec>& strategies, const MarketSpec& market,
                            const UtilitySpec& utility, const QuadratureSpec& quadrature,
                            const std::optional<DriftModel>& truth = std::nullopt);

// time,cash,w_1..w_d
void write_weights_csv(const BacktestReport& report, const StrategyResult& result,
                       const std::filesystem::path& file);

}  // namespace drbc
