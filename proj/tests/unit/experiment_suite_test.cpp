#include <gtest/gtest.h>

#include <cmath>

#include "drbc/experiment_suite.hpp"

namespace drbc {
namespace {

TradingProtocol tiny_protocol() {
    TradingProtocol p;
    p.windowing.window_len = 40;
    p.windowing.n_windows = 10;
    p.lookback_steps = 400;
    p.trade_steps = 60;
    p.eval_window = 60;
    return p;
}

SyntheticMarket small_market() {
    SyntheticMarket s;
    s.dim = 2;
    s.vol = 0.05;
    return s;
}

TEST(ExperimentSuite, OneCellTwoSeeds) {
    SuiteConfig c;
    c.cells = {SuiteCell{0.4, 11, KappaLaw::Smooth}};
    c.n_seeds = 2;
    c.synthetic = small_market();
    c.protocol = tiny_protocol();
    c.strategies = {{Strategy::Bayesian}, {Strategy::Drbc}};
    c.gh_nodes = 16;
    const SuiteResult r = run_experiment_suite(c);
    ASSERT_EQ(r.rows.size(), 2u);
    ASSERT_EQ(r.summary.size(), 2u);
    for (const auto& s : r.summary) {
        EXPECT_EQ(s.completed, 2);
        EXPECT_TRUE(std::isfinite(s.sharpe_mean));
        EXPECT_TRUE(std::isfinite(s.sharpe_std));
    }
    EXPECT_NE(r.rows[0].seed, r.rows[1].seed);
}

TEST(ExperimentSuite, ThreadCountDoesNotChangeResults) {
    SuiteConfig c;
    c.cells = {SuiteCell{0.2, 6, KappaLaw::Volatile}, SuiteCell{0.4, 11, KappaLaw::Smooth}};
    c.n_seeds = 3;
    c.synthetic = small_market();
    c.protocol = tiny_protocol();
    c.strategies = {{Strategy::Bayesian}, {Strategy::Drbc}, {Strategy::DrmvRf}};
    c.gh_nodes = 12;
    const SuiteResult a = run_experiment_suite(c);
    c.threads = 3;
    const SuiteResult b = run_experiment_suite(c);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        for (std::size_t k = 0; k < a.rows[i].results.size(); ++k) {
            EXPECT_EQ(a.rows[i].results[k].sharpe, b.rows[i].results[k].sharpe);
            EXPECT_EQ(a.rows[i].results[k].terminal_utility, b.rows[i].results[k].terminal_utility);
        }
    }
}

TEST(RadiusSweep, ZeroScaleMatchesBayesian) {
    SweepConfig c;
    c.cell = SuiteCell{0.4, 11, KappaLaw::Smooth};
    c.scales = {0.0, 1.0};
    c.n_seeds = 2;
    c.synthetic = small_market();
    c.protocol = tiny_protocol();
    c.gh_nodes = 12;
    const SweepResult r = run_radius_sweep(c);
    for (int s = 0; s < 2; ++s) {
        const BacktestReport rep =
            run_synthetic_backtest(c.cell, run_seed(0, s), c.synthetic, c.protocol,
                                   {{Strategy::Oracle}, {Strategy::Bayesian}}, c.mc_samples, c.gh_nodes);
        const double gap = rep.strategies[1].terminal_utility - rep.strategies[0].terminal_utility;
        EXPECT_EQ(r.drbc_gaps[static_cast<std::size_t>(s)][0], gap);
    }
    ASSERT_EQ(r.points.size(), 4u);
    EXPECT_EQ(r.points[0].strategy, "drbc");
    EXPECT_EQ(r.points[2].strategy, "drc");
}

TEST(SyntheticScenario, ExplicitKappaAndConstantDrift) {
    SyntheticScenario s{MarketSpec(0.01, 0.3 * Matrix::Identity(2, 2), 1.0, 0.01), -3.0, 0.4, KappaLaw::Smooth,
                        Vector::Zero(2), std::nullopt, 100.0};
    EXPECT_NEAR(drift_at(scenario_drift(s, 1), 0.3)(0), 0.6, 1e-15);
    s.constant_drift = Vector::Constant(2, 0.07);
    EXPECT_EQ(drift_at(scenario_drift(s, 1), 0.3), Vector::Constant(2, 0.07));
    s.constant_drift = Vector::Constant(3, 0.07);
    EXPECT_THROW(scenario_drift(s, 1), std::invalid_argument);
}

}  // namespace
}  // namespace drbc
