#include "drbc/experiment_suite.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "drbc/rng.hpp"

namespace drbc {

std::string SuiteCell::label() const {
    std::ostringstream os;
    os << "b0=" << b0 << " m=" << m << " kappa=" << (kappa_law == KappaLaw::Smooth ? "smooth" : "volatile");
    return os.str();
}

MarketSpec SyntheticMarket::market_for(const SuiteCell& cell, double horizon) const {
    const double dt = 1.0 / (252.0 * cell.m);
    return MarketSpec(rate, vol * Matrix::Identity(dim, dim), horizon, dt);
}

std::uint64_t run_seed(std::uint64_t base_seed, int seed_index) {
    return splitmix64(base_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(seed_index) + 1);
}

QuadratureSpec suite_quadrature(int dim, std::size_t mc_samples, int gh_nodes, std::uint64_t seed) {
    QuadratureSpec q;
    if (dim <= 3) {
        q.method = GaussHermiteTensor{gh_nodes};
    } else {
        q.method = MonteCarlo{mc_samples, splitmix64(seed ^ 0x0DE5ULL)};
    }
    return q;
}

DriftModel scenario_drift(const SyntheticScenario& scenario, std::uint64_t seed) {
    const int d = scenario.market.dim();
    if (scenario.constant_drift) {
        if (scenario.constant_drift->size() != d) {
            throw std::invalid_argument("constant drift has the wrong dimension");
        }
        return DriftModel{*scenario.constant_drift};
    }
    SinusoidalDriftSpec spec;
    if (scenario.kappa) {
        spec.b0 = scenario.b0;
        spec.kappa = *scenario.kappa;
    } else {
        spec = SinusoidalDriftSpec::sample(d, scenario.b0, scenario.kappa_law, splitmix64(seed ^ 0xCAFEULL));
    }
    spec.validate();
    if (spec.kappa.size() != d) throw std::invalid_argument("kappa has the wrong dimension");
    return DriftModel{spec};
}

ScenarioRun run_scenario_backtest(const SyntheticScenario& scenario, std::uint64_t seed,
                                  const TradingProtocol& protocol, const std::vector<StrategySpec>& strategies,
                                  std::size_t mc_samples, int gh_nodes) {
    const MarketSpec& market = scenario.market;
    const UtilitySpec utility(scenario.alpha);
    const int steps = protocol.lookback_steps + (protocol.info_lag ? 1 : 0) + protocol.trade_steps;
    ScenarioRun run{scenario_drift(scenario, seed), PathGrid{}, BacktestReport{}};
    run.path = simulate_paths(market, run.drift, steps, seed, 0, scenario.initial_price);
    run.report = run_backtest(run.path.prices, protocol, strategies, market, utility,
                              suite_quadrature(market.dim(), mc_samples, gh_nodes, seed), run.drift);
    return run;
}

BacktestReport run_synthetic_backtest(const SuiteCell& cell, std::uint64_t seed, const SyntheticMarket& synthetic,
                                      const TradingProtocol& protocol, const std::vector<StrategySpec>& strategies,
                                      std::size_t mc_samples, int gh_nodes) {
    const double dt = 1.0 / (252.0 * cell.m);
    SyntheticScenario scenario{synthetic.market_for(cell, protocol.resolved_plan_horizon(dt)),
                               synthetic.alpha,
                               cell.b0,
                               cell.kappa_law,
                               std::nullopt,
                               std::nullopt,
                               synthetic.initial_price};
    return run_scenario_backtest(scenario, seed, protocol, strategies, mc_samples, gh_nodes).report;
}

void parallel_for(int count, int threads, const std::function<void(int)>& job) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next++; i < count; i = next++) job(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (v.empty()) {
        mean = sd = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

double mean_base_delta(const BacktestReport& report) {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : report.calibrations) {
        if (c.ok) {
            sum += c.result.delta;
            ++n;
        }
    }
    return n > 0 ? sum / n : 0.0;
}

}  // namespace

SuiteResult run_experiment_suite(const SuiteConfig& config) {
    if (config.cells.empty()) throw std::invalid_argument("run_experiment_suite: empty grid");
    if (config.n_seeds < 1) throw std::invalid_argument("run_experiment_suite: n_seeds must be positive");
    if (config.strategies.empty()) throw std::invalid_argument("run_experiment_suite: no strategies");

    const int n_cells = static_cast<int>(config.cells.size());
    const int total = n_cells * config.n_seeds;
    SuiteResult out;
    out.rows.resize(static_cast<std::size_t>(total));

    parallel_for(total, config.threads, [&](int job) {
        SeedRow& row = out.rows[static_cast<std::size_t>(job)];
        row.cell = static_cast<std::size_t>(job / config.n_seeds);
        row.seed_index = job % config.n_seeds;
        row.seed = run_seed(config.base_seed, row.seed_index);
        try {
            BacktestReport rep = run_synthetic_backtest(config.cells[row.cell], row.seed, config.synthetic,
                                                        config.protocol, config.strategies, config.mc_samples,
                                                        config.gh_nodes);
            row.base_delta = mean_base_delta(rep);
            for (auto& r : rep.strategies) {
                r.wealth = {r.wealth.front(), r.wealth.back()};
                r.weights.resize(0, 0);
                r.cash.resize(0);
                row.results.push_back(std::move(r));
            }
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
            spdlog::warn("seed {} of cell {} failed: {}", row.seed_index, config.cells[row.cell].label(), e.what());
        }
    });

    for (std::size_t c = 0; c < config.cells.size(); ++c) {
        for (std::size_t s = 0; s < config.strategies.size(); ++s) {
            std::vector<double> sharpe, util, lev, hits;
            for (const auto& row : out.rows) {
                if (row.cell != c || !row.ok) continue;
                const auto& r = row.results[s];
                if (std::isfinite(r.sharpe)) sharpe.push_back(r.sharpe);
                util.push_back(r.terminal_utility);
                lev.push_back(r.mean_leverage);
                hits.push_back(r.cap_hit_rate);
            }
            CellSummary cs;
            cs.cell = c;
            cs.strategy = config.strategies[s].name();
            cs.completed = static_cast<int>(util.size());
            double unused = 0.0;
            mean_std(sharpe, cs.sharpe_mean, cs.sharpe_std);
            mean_std(util, cs.utility_mean, cs.utility_std);
            mean_std(lev, cs.leverage_mean, unused);
            mean_std(hits, cs.cap_hit_mean, unused);
            out.summary.push_back(cs);
        }
    }
    return out;
}

SweepResult run_radius_sweep(const SweepConfig& config) {
    if (config.scales.empty()) throw std::invalid_argument("run_radius_sweep: empty scale list");
    if (config.n_seeds < 1) throw std::invalid_argument("run_radius_sweep: n_seeds must be positive");

    std::vector<StrategySpec> specs{{Strategy::Oracle, 1.0, "oracle"}};
    for (double s : config.scales) {
        std::ostringstream os;
        os << s;
        specs.push_back({Strategy::Drbc, s, "drbc_x" + os.str()});
        specs.push_back({Strategy::Drc, s, "drc_x" + os.str()});
    }
    TradingProtocol protocol = config.protocol;
    protocol.drc_delta = -1.0;

    const std::size_t n_scales = config.scales.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SweepResult out;
    out.scales = config.scales;
    out.drbc_gaps.assign(static_cast<std::size_t>(config.n_seeds), std::vector<double>(n_scales, nan));
    out.drc_gaps = out.drbc_gaps;
    out.base_delta.assign(static_cast<std::size_t>(config.n_seeds), nan);

    parallel_for(config.n_seeds, config.threads, [&](int s) {
        const std::size_t si = static_cast<std::size_t>(s);
        try {
            const BacktestReport rep =
                run_synthetic_backtest(config.cell, run_seed(config.base_seed, s), config.synthetic, protocol,
                                       specs, config.mc_samples, config.gh_nodes);
            const double oracle = rep.strategies[0].terminal_utility;
            for (std::size_t k = 0; k < n_scales; ++k) {
                out.drbc_gaps[si][k] = rep.strategies[1 + 2 * k].terminal_utility - oracle;
                out.drc_gaps[si][k] = rep.strategies[2 + 2 * k].terminal_utility - oracle;
            }
            out.base_delta[si] = mean_base_delta(rep);
        } catch (const std::exception& e) {
            spdlog::warn("sweep seed {} failed: {}", s, e.what());
        }
    });

    for (const auto* table : {&out.drbc_gaps, &out.drc_gaps}) {
        const std::string name = table == &out.drbc_gaps ? "drbc" : "drc";
        for (std::size_t k = 0; k < n_scales; ++k) {
            std::vector<double> v;
            for (const auto& row : *table) {
                if (std::isfinite(row[k])) v.push_back(row[k]);
            }
            SweepPoint pt;
            pt.scale = config.scales[k];
            pt.strategy = name;
            pt.completed = static_cast<int>(v.size());
            mean_std(v, pt.gap_mean, pt.gap_std);
            out.points.push_back(pt);
        }
    }
    return out;
}

}  // namespace drbc
