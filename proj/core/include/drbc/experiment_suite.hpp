#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drbc/backtest_engine.hpp"

namespace drbc {

// One row of the synthetic grid: drift scale B0, periods per day m
// (dt = 1 / (252 m)) and the frequency law.
struct SuiteCell {
    double b0 = 0.4;
    int m = 11;
    KappaLaw kappa_law = KappaLaw::Smooth;

    std::string label() const;
};

struct SyntheticMarket {
    int dim = 20;
    double vol = 0.3;  // sigma = vol * I
    double rate = 0.01;
    double alpha = -3.0;
    double initial_price = 100.0;

    MarketSpec market_for(const SuiteCell& cell, double horizon) const;
};

struct SuiteConfig {
    std::vector<SuiteCell> cells;
    int n_seeds = 100;
    std::uint64_t base_seed = 0;
    SyntheticMarket synthetic;
    TradingProtocol protocol;
    std::vector<StrategySpec> strategies;
    // Monte Carlo sample count used when dim > 3.
    std::size_t mc_samples = 20000;
    int gh_nodes = 40;
    int threads = 1;
};

struct SeedRow {
    std::size_t cell = 0;
    int seed_index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<StrategyResult> results;  // wealth paths dropped, metrics kept
    double base_delta = 0.0;              // mean calibrated radius over prior updates
};

struct CellSummary {
    std::size_t cell = 0;
    std::string strategy;
    int completed = 0;
    double sharpe_mean = 0.0;
    double sharpe_std = 0.0;
    double utility_mean = 0.0;
    double utility_std = 0.0;
    double leverage_mean = 0.0;
    double cap_hit_mean = 0.0;
};

struct SuiteResult {
    std::vector<SeedRow> rows;  // ordered by (cell, seed_index)
    std::vector<CellSummary> summary;
};

// Seed of the seed_index-th run; the same across cells so that cells share noise.
std::uint64_t run_seed(std::uint64_t base_seed, int seed_index);

QuadratureSpec suite_quadrature(int dim, std::size_t mc_samples, int gh_nodes, std::uint64_t seed);

// A fully specified synthetic market: the drift is either the sinusoidal
// family (kappa sampled from the law unless given) or a constant vector.
struct SyntheticScenario {
    MarketSpec market;
    double alpha = -3.0;
    double b0 = 0.4;
    KappaLaw kappa_law = KappaLaw::Smooth;
    std::optional<Vector> kappa;
    std::optional<Vector> constant_drift;
    double initial_price = 100.0;
};

DriftModel scenario_drift(const SyntheticScenario& scenario, std::uint64_t seed);

struct ScenarioRun {
    DriftModel drift;
    PathGrid path;
    BacktestReport report;
};

ScenarioRun run_scenario_backtest(const SyntheticScenario& scenario, std::uint64_t seed,
                                  const TradingProtocol& protocol, const std::vector<StrategySpec>& strategies,
                                  std::size_t mc_samples, int gh_nodes);

// Simulates one path for (cell, seed) and runs the backtest on it.
BacktestReport run_synthetic_backtest(const SuiteCell& cell, std::uint64_t seed, const SyntheticMarket& synthetic,
                                      const TradingProtocol& protocol, const std::vector<StrategySpec>& strategies,
                                      std::size_t mc_samples, int gh_nodes);

// Runs `count` jobs on `threads` workers; each job writes only its own slot.
void parallel_for(int count, int threads, const std::function<void(int)>& job);

SuiteResult run_experiment_suite(const SuiteConfig& config);

struct SweepConfig {
    SuiteCell cell;
    std::vector<double> scales{0.0, 0.25, 1.0, 4.0, 16.0};
    int n_seeds = 100;
    std::uint64_t base_seed = 0;
    SyntheticMarket synthetic;
    TradingProtocol protocol;
    std::size_t mc_samples = 20000;
    int gh_nodes = 40;
    int threads = 1;
};

struct SweepPoint {
    double scale = 0.0;
    std::string strategy;
    int completed = 0;
    double gap_mean = 0.0;  // mean of U(strategy) - U(oracle)
    double gap_std = 0.0;
};

struct SweepResult {
    std::vector<double> scales;
    // gaps[s][k]: seed s, scale k; NaN for failed seeds
    std::vector<std::vector<double>> drbc_gaps;
    std::vector<std::vector<double>> drc_gaps;
    std::vector<double> base_delta;
    std::vector<SweepPoint> points;
};

SweepResult run_radius_sweep(const SweepConfig& config);

}  // namespace drbc
