#include "drbc_cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include <spdlog/spdlog.h>

#include "drbc/csv_io.hpp"
#include "drbc/errors.hpp"
#include "drbc/rng.hpp"
#include "drbc/robust_prior.hpp"

namespace drbc::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt_d(double v) { return format_double(v); }

void write_manifest(const json& cfg, const std::string& command, const fs::path& out,
                    const std::vector<std::string>& outputs, const json& extra = json::object()) {
    json manifest{{"manifest_version", 1}, {"command", command}, {"config", cfg}, {"outputs", outputs}};
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
    auto os = open_for_write(out / "manifest.json");
    os << manifest.dump(2) << "\n";
}

void write_json(const json& doc, const fs::path& file) {
    auto os = open_for_write(file);
    os << doc.dump(2) << "\n";
}

json vector_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

json drift_json(const DriftModel& drift) {
    if (const auto* c = std::get_if<Vector>(&drift)) return json{{"constant", vector_json(*c)}};
    const auto& s = std::get<SinusoidalDriftSpec>(drift);
    return json{{"b0", s.b0}, {"kappa", vector_json(s.kappa)}};
}

// Prices from data.prices when set, otherwise one simulated path long enough
// for `steps` increments.
struct PriceSource {
    Matrix prices;
    std::optional<DriftModel> truth;
    json provenance;
};

PriceSource load_prices(const json& cfg, const MarketSpec& market, int steps, std::uint64_t seed) {
    const json& file = cfg.at("data").at("prices");
    if (!file.is_null()) {
        if (!file.is_string()) throw ConfigError("data.prices must be a file path");
        const LabeledTable table = read_labeled_csv(file.get<std::string>());
        if (table.values.cols() != market.dim()) {
            throw DataError("price file has " + std::to_string(table.values.cols()) + " assets, market.dim is " +
                            std::to_string(market.dim()));
        }
        if ((table.values.array() <= 0.0).any() || !table.values.allFinite()) {
            throw DataError("price file contains non-positive or non-finite prices");
        }
        return {table.values, std::nullopt, json{{"prices", file}}};
    }
    const SyntheticScenario scenario = scenario_from(cfg, market.horizon());
    DriftModel drift = scenario_drift(scenario, seed);
    PathGrid path = simulate_paths(market, drift, steps, seed, 0, scenario.initial_price);
    return {std::move(path.prices), drift, json{{"drift", drift_json(drift)}}};
}

std::uint64_t cfg_seed(const json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }
int cfg_threads(const json& cfg) { return std::max(1, cfg.at("threads").get<int>()); }

}  // namespace

json resolve_for(const CommandOptions& options, const std::map<std::string, std::string>& env) {
    json user = json::object();
    if (options.config_file) user = load_json_file(*options.config_file);
    json cfg = resolve_config(user, env);
    if (options.seed) cfg["seed"] = *options.seed;
    if (options.threads) {
        if (*options.threads < 1) throw ConfigError("--threads must be positive");
        cfg["threads"] = *options.threads;
    }
    return cfg;
}

std::vector<int> histogram_counts(const std::vector<double>& values, int bins, double lo, double hi) {
    if (bins < 1 || !(hi > lo)) throw ConfigError("histogram needs bins >= 1 and hist_max > hist_min");
    std::vector<int> counts(static_cast<std::size_t>(bins) + 1, 0);
    const double width = (hi - lo) / bins;
    for (double v : values) {
        if (!std::isfinite(v)) {
            ++counts.back();
            continue;
        }
        int b = static_cast<int>(std::floor((v - lo) / width));
        b = std::clamp(b, 0, bins - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    return counts;
}

void cmd_simulate(const json& cfg, const fs::path& out) {
    const json& sim = cfg.at("simulate");
    const int n_steps = sim.at("n_steps").get<int>();
    const int n_paths = sim.at("n_paths").get<int>();
    if (n_steps < 1 || n_paths < 1) throw ConfigError("simulate.n_steps and simulate.n_paths must be positive");
    const double dt = cfg.at("market").at("dt").get<double>();
    const MarketSpec market = market_from(cfg, n_steps * dt);
    const SyntheticScenario scenario = scenario_from(cfg, market.horizon());
    const std::uint64_t seed = cfg_seed(cfg);
    const DriftModel drift = scenario_drift(scenario, seed);

    fs::create_directories(out);
    std::vector<std::string> outputs;
    std::vector<PathGrid> paths(static_cast<std::size_t>(n_paths));
    parallel_for(n_paths, cfg_threads(cfg), [&](int p) {
        paths[static_cast<std::size_t>(p)] =
            simulate_paths(market, drift, n_steps, seed, static_cast<std::uint64_t>(p), scenario.initial_price);
    });
    for (int p = 0; p < n_paths; ++p) {
        char name[32];
        std::snprintf(name, sizeof(name), "path_%03d.csv", p);
        write_path_csv(paths[static_cast<std::size_t>(p)], out / name);
        outputs.emplace_back(name);
    }
    write_manifest(cfg, "simulate", out, outputs, json{{"drift", drift_json(drift)}});
    std::cout << "wrote " << n_paths << " path(s) of " << n_steps << " steps to " << out.string() << "\n";
}

void cmd_calibrate(const json& cfg, const fs::path& out) {
    const TradingProtocol protocol = protocol_from(cfg, 1);
    const double dt = cfg.at("market").at("dt").get<double>();
    const json& horizon_cfg = cfg.at("calibration").at("horizon");
    const double horizon =
        horizon_cfg.is_null() ? protocol.resolved_plan_horizon(dt) : horizon_cfg.get<double>();
    const MarketSpec market = market_from(cfg, horizon);
    const UtilitySpec utility = utility_from(cfg);
    const std::uint64_t seed = cfg_seed(cfg);

    const WindowingSpec windowing = protocol.windowing;
    const int needed = windowing.required_steps();
    const PriceSource source = load_prices(cfg, market, needed, seed);
    if (source.prices.rows() < needed + 1) {
        throw DataError("prices cover " + std::to_string(source.prices.rows() - 1) + " steps, the prior needs " +
                        std::to_string(needed));
    }
    EmpiricalPrior prior = build_prior(source.prices, market, windowing);
    if (protocol.clamp_bound) {
        const Vector bound = Vector::Constant(market.dim(), *protocol.clamp_bound);
        prior = clamp_atoms(prior, -bound, bound);
    }

    const GaussianNodes nodes = make_nodes(quadrature_from(cfg, market.dim(), seed), market.dim());
    const json& cal = cfg.at("calibration");
    const CalibrationResult result =
        select_delta(prior, cal.at("x0").get<double>(), utility, market, nodes, protocol.confidence, protocol.quantile);

    RobustSpec robust;
    robust.delta = result.delta * cal.at("delta_scale").get<double>();
    robust.tau = cal.at("tau").get<double>();
    const PerturbationResult pert = perturb_prior(prior, robust, utility, market, nodes);

    fs::create_directories(out);
    json atoms = json::array();
    for (Eigen::Index k = 0; k < prior.size(); ++k) atoms.push_back(vector_json(prior.atom(k)));
    const json doc{
        {"k_hat", result.k_hat},
        {"sigma_sq", result.sigma_sq},
        {"denom", result.denom},
        {"eta_q", result.eta_q},
        {"delta", result.delta},
        {"n", result.n},
        {"confidence", result.confidence},
        {"horizon", horizon},
        {"applied_delta", robust.delta},
        {"h_norm", pert.h_norm},
        {"sign", pert.sign},
        {"predicted_value_shift", pert.predicted_value_shift},
        {"atoms", atoms},
        {"weights", vector_json(prior.weights())},
    };
    write_json(doc, out / "calibration.json");
    write_prior_csv(prior, out / "prior.csv");
    write_perturbation_csv(prior, pert, out / "perturbation.csv");
    write_manifest(cfg, "calibrate", out, {"calibration.json", "prior.csv", "perturbation.csv"}, source.provenance);

    std::cout << "n=" << result.n << " k=" << fmt_d(result.k_hat) << " sigma2=" << fmt_d(result.sigma_sq)
              << " denom=" << fmt_d(result.denom) << " delta=" << fmt_d(result.delta) << "\n";
}

void cmd_backtest(const json& cfg, const fs::path& out) {
    const bool from_file = !cfg.at("data").at("prices").is_null();
    const double dt = cfg.at("market").at("dt").get<double>();
    const int lag = cfg.at("protocol").at("info_lag").get<bool>() ? 1 : 0;

    int available = -1;
    LabeledTable table;
    if (from_file) {
        const json& file = cfg.at("data").at("prices");
        if (!file.is_string()) throw ConfigError("data.prices must be a file path");
        table = read_labeled_csv(file.get<std::string>());
        available = static_cast<int>(table.values.rows()) - 1 - cfg.at("protocol").at("lookback_steps").get<int>() - lag;
        if (available < 1) throw DataError("price file is shorter than the lookback");
    }
    const TradingProtocol protocol = protocol_from(cfg, available);
    const MarketSpec market = market_from(cfg, protocol.resolved_plan_horizon(dt));
    protocol.validate(market);
    const UtilitySpec utility = utility_from(cfg);
    const std::vector<StrategySpec> strategies = strategies_from(cfg);
    const std::uint64_t base_seed = cfg_seed(cfg);
    const int n_seeds = from_file ? 1 : cfg.at("backtest").at("n_seeds").get<int>();
    if (n_seeds < 1) throw ConfigError("backtest.n_seeds must be positive");
    for (const auto& s : strategies) {
        if (from_file && s.kind == Strategy::Oracle) throw ConfigError("the oracle strategy needs synthetic data");
    }

    const int steps = protocol.lookback_steps + lag + protocol.trade_steps;
    std::vector<BacktestReport> reports(static_cast<std::size_t>(n_seeds));
    std::vector<json> provenance(static_cast<std::size_t>(n_seeds));
    parallel_for(n_seeds, cfg_threads(cfg), [&](int s) {
        const std::uint64_t seed = from_file ? base_seed : run_seed(base_seed, s);
        PriceSource source;
        if (from_file) {
            if (table.values.cols() != market.dim()) {
                throw DataError("price file has " + std::to_string(table.values.cols()) +
                                " assets, market.dim is " + std::to_string(market.dim()));
            }
            source.prices = table.values;
        } else {
            source = load_prices(cfg, market, steps, seed);
        }
        reports[static_cast<std::size_t>(s)] =
            run_backtest(source.prices, protocol, strategies, market, utility,
                         quadrature_from(cfg, market.dim(), seed), source.truth);
        provenance[static_cast<std::size_t>(s)] = source.provenance;
    });

    fs::create_directories(out);
    std::vector<std::string> outputs{"report.csv", "summary.csv", "calibrations.csv", "hist_sharpe.csv", "wealth.csv"};
    {
        auto os = open_for_write(out / "report.csv");
        write_csv_row(os, {"seed_index", "seed", "strategy", "sharpe", "terminal_utility", "terminal_wealth",
                           "bankrupt", "mean_leverage", "max_leverage", "cap_hit_rate", "fallbacks"});
        for (int s = 0; s < n_seeds; ++s) {
            const std::uint64_t seed = from_file ? base_seed : run_seed(base_seed, s);
            for (const auto& r : reports[static_cast<std::size_t>(s)].strategies) {
                write_csv_row(os, {std::to_string(s), std::to_string(seed), r.name, fmt_d(r.sharpe),
                                   fmt_d(r.terminal_utility), fmt_d(r.wealth.back()), r.bankrupt ? "1" : "0",
                                   fmt_d(r.mean_leverage), fmt_d(r.max_leverage), fmt_d(r.cap_hit_rate),
                                   std::to_string(r.fallbacks)});
            }
        }
    }
    {
        auto os = open_for_write(out / "calibrations.csv");
        write_csv_row(os, {"seed_index", "step", "ok", "k_hat", "sigma_sq", "denom", "eta_q", "delta", "n", "error"});
        for (int s = 0; s < n_seeds; ++s) {
            for (const auto& c : reports[static_cast<std::size_t>(s)].calibrations) {
                write_csv_row(os, {std::to_string(s), std::to_string(c.step), c.ok ? "1" : "0", fmt_d(c.result.k_hat),
                                   fmt_d(c.result.sigma_sq), fmt_d(c.result.denom), fmt_d(c.result.eta_q),
                                   fmt_d(c.result.delta), std::to_string(c.result.n), c.error});
            }
        }
    }

    const json& hist = cfg.at("backtest");
    const int bins = hist.at("hist_bins").get<int>();
    const double lo = hist.at("hist_min").get<double>();
    const double hi = hist.at("hist_max").get<double>();
    std::vector<std::vector<int>> counts;
    {
        auto os = open_for_write(out / "summary.csv");
        write_csv_row(os, {"strategy", "completed", "sharpe_mean", "sharpe_std", "utility_mean", "utility_std",
                           "mean_leverage", "cap_hit_rate", "fallbacks"});
        for (std::size_t k = 0; k < strategies.size(); ++k) {
            std::vector<double> sharpe, util;
            double lev = 0.0, hits = 0.0;
            int fallbacks = 0;
            for (const auto& rep : reports) {
                const auto& r = rep.strategies[k];
                sharpe.push_back(r.sharpe);
                util.push_back(r.terminal_utility);
                lev += r.mean_leverage;
                hits += r.cap_hit_rate;
                fallbacks += r.fallbacks;
            }
            auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
                std::vector<double> f;
                for (double x : v) {
                    if (std::isfinite(x)) f.push_back(x);
                }
                mean = sd = std::numeric_limits<double>::quiet_NaN();
                if (f.empty()) return;
                mean = 0.0;
                for (double x : f) mean += x;
                mean /= static_cast<double>(f.size());
                if (f.size() < 2) return;
                sd = 0.0;
                for (double x : f) sd += (x - mean) * (x - mean);
                sd = std::sqrt(sd / static_cast<double>(f.size() - 1));
            };
            double sm, ss, um, us;
            stats(sharpe, sm, ss);
            stats(util, um, us);
            const double n = static_cast<double>(n_seeds);
            write_csv_row(os, {strategies[k].name(), std::to_string(n_seeds), fmt_d(sm), fmt_d(ss), fmt_d(um),
                               fmt_d(us), fmt_d(lev / n), fmt_d(hits / n), std::to_string(fallbacks)});
            counts.push_back(histogram_counts(sharpe, bins, lo, hi));
        }
    }
    {
        auto os = open_for_write(out / "hist_sharpe.csv");
        std::vector<std::string> header{"bin_lo", "bin_hi"};
        for (const auto& s : strategies) header.push_back(s.name());
        write_csv_row(os, header);
        const double width = (hi - lo) / bins;
        for (int b = 0; b <= bins; ++b) {
            std::vector<std::string> row;
            if (b < bins) {
                row = {fmt_d(lo + b * width), fmt_d(b + 1 == bins ? hi : lo + (b + 1) * width)};
            } else {
                row = {"nan", "nan"};
            }
            for (const auto& c : counts) row.push_back(std::to_string(c[static_cast<std::size_t>(b)]));
            write_csv_row(os, row);
        }
    }

    const BacktestReport& first = reports.front();
    {
        auto os = open_for_write(out / "wealth.csv");
        std::vector<std::string> header{"time"};
        for (const auto& r : first.strategies) header.push_back(r.name);
        write_csv_row(os, header);
        for (std::size_t i = 0; i < first.times.size(); ++i) {
            std::vector<std::string> row{fmt_d(first.times[i])};
            for (const auto& r : first.strategies) row.push_back(fmt_d(r.wealth[i]));
            write_csv_row(os, row);
        }
    }
    for (const auto& r : first.strategies) {
        const std::string name = "weights_" + r.name + ".csv";
        write_weights_csv(first, r, out / name);
        outputs.push_back(name);
    }
    write_manifest(cfg, "backtest", out, outputs, json{{"seed_0", provenance.front()}});
    std::cout << "backtest: " << n_seeds << " seed(s), " << strategies.size() << " strategies, "
              << protocol.trade_steps << " trade steps -> " << out.string() << "\n";
}

void cmd_sweep(const json& cfg, const fs::path& out) {
    const json& sw = cfg.at("sweep");
    const json& sig = require(cfg, "market.sigma");
    if (!sig.is_number()) throw ConfigError("sweep needs market.sigma as a scalar volatility");

    SyntheticMarket synthetic;
    synthetic.dim = cfg.at("market").at("dim").get<int>();
    synthetic.vol = sig.get<double>();
    synthetic.rate = cfg.at("market").at("rate").get<double>();
    synthetic.alpha = utility_from(cfg).alpha();
    synthetic.initial_price = cfg.at("simulate").at("initial_price").get<double>();
    const TradingProtocol protocol = protocol_from(cfg);
    const std::size_t mc = cfg.at("quadrature").at("n_samples").get<std::size_t>();
    const int gh = cfg.at("quadrature").at("nodes_per_dim").get<int>();
    const int threads = cfg_threads(cfg);
    const std::uint64_t seed = cfg_seed(cfg);

    // Validates every cell's market before the long runs start.
    const std::vector<SuiteCell> cells = cells_from(cfg);
    for (const auto& c : cells) protocol.validate(synthetic.market_for(c, protocol.resolved_plan_horizon(1.0 / (252.0 * c.m))));

    fs::create_directories(out);
    std::vector<std::string> outputs;

    if (sw.at("run_grid").get<bool>()) {
        SuiteConfig suite;
        suite.cells = cells;
        suite.n_seeds = sw.at("n_seeds").get<int>();
        suite.base_seed = seed;
        suite.synthetic = synthetic;
        suite.protocol = protocol;
        suite.strategies = strategies_from(cfg);
        suite.mc_samples = mc;
        suite.gh_nodes = gh;
        suite.threads = threads;
        const SuiteResult res = run_experiment_suite(suite);

        auto os = open_for_write(out / "summary.csv");
        write_csv_row(os, {"cell", "b0", "m", "kappa_law", "strategy", "completed", "sharpe_mean", "sharpe_std",
                           "utility_mean", "utility_std", "mean_leverage", "cap_hit_rate"});
        for (const auto& s : res.summary) {
            const SuiteCell& c = cells[s.cell];
            write_csv_row(os, {std::to_string(s.cell), fmt_d(c.b0), std::to_string(c.m),
                               c.kappa_law == KappaLaw::Smooth ? "smooth" : "volatile", s.strategy,
                               std::to_string(s.completed), fmt_d(s.sharpe_mean), fmt_d(s.sharpe_std),
                               fmt_d(s.utility_mean), fmt_d(s.utility_std), fmt_d(s.leverage_mean),
                               fmt_d(s.cap_hit_mean)});
        }
        auto rows = open_for_write(out / "seeds.csv");
        write_csv_row(rows, {"cell", "seed_index", "seed", "ok", "strategy", "sharpe", "terminal_utility",
                             "base_delta", "error"});
        for (const auto& r : res.rows) {
            if (!r.ok) {
                write_csv_row(rows, {std::to_string(r.cell), std::to_string(r.seed_index), std::to_string(r.seed), "0",
                                     "", "", "", "", r.error});
                continue;
            }
            for (const auto& x : r.results) {
                write_csv_row(rows, {std::to_string(r.cell), std::to_string(r.seed_index), std::to_string(r.seed),
                                     "1", x.name, fmt_d(x.sharpe), fmt_d(x.terminal_utility), fmt_d(r.base_delta),
                                     ""});
            }
        }
        outputs.insert(outputs.end(), {"summary.csv", "seeds.csv"});
    }

    if (sw.at("run_radius").get<bool>()) {
        SweepConfig sc;
        const json& rc = sw.at("radius_cell");
        if (!rc.is_object()) throw ConfigError("sweep.radius_cell must be an object");
        json one = cfg;
        one["sweep"]["cells"] = json::array({rc});
        sc.cell = cells_from(one).front();
        sc.scales.clear();
        for (const auto& v : sw.at("scales")) {
            if (!v.is_number() || v.get<double>() < 0.0) throw ConfigError("sweep.scales must be non-negative numbers");
            sc.scales.push_back(v.get<double>());
        }
        sc.n_seeds = sw.at("radius_n_seeds").get<int>();
        sc.base_seed = seed;
        sc.synthetic = synthetic;
        sc.protocol = protocol;
        sc.protocol.trade_steps = sw.at("radius_trade_steps").get<int>();
        if (cfg.at("protocol").at("eval_window").get<int>() == 0) sc.protocol.eval_window = sc.protocol.trade_steps;
        sc.mc_samples = mc;
        sc.gh_nodes = gh;
        sc.threads = threads;
        const SweepResult res = run_radius_sweep(sc);

        auto os = open_for_write(out / "radius_sweep.csv");
        write_csv_row(os, {"scale", "strategy", "completed", "gap_mean", "gap_std"});
        for (const auto& p : res.points) {
            write_csv_row(os, {fmt_d(p.scale), p.strategy, std::to_string(p.completed), fmt_d(p.gap_mean),
                               fmt_d(p.gap_std)});
        }
        auto gaps = open_for_write(out / "radius_gaps.csv");
        write_csv_row(gaps, {"seed_index", "scale", "drbc_gap", "drc_gap", "base_delta"});
        for (std::size_t s = 0; s < res.drbc_gaps.size(); ++s) {
            for (std::size_t k = 0; k < res.scales.size(); ++k) {
                write_csv_row(gaps, {std::to_string(s), fmt_d(res.scales[k]), fmt_d(res.drbc_gaps[s][k]),
                                     fmt_d(res.drc_gaps[s][k]), fmt_d(res.base_delta[s])});
            }
        }
        outputs.insert(outputs.end(), {"radius_sweep.csv", "radius_gaps.csv"});
    }
    if (outputs.empty()) throw ConfigError("sweep: both sweep.run_grid and sweep.run_radius are false");
    write_manifest(cfg, "sweep", out, outputs);
    std::cout << "sweep outputs written to " << out.string() << "\n";
}

int run_command(const std::string& command, const CommandOptions& options,
                const std::map<std::string, std::string>& env) {
    try {
        const json cfg = resolve_for(options, env);
        if (command == "simulate") {
            cmd_simulate(cfg, options.out_dir);
        } else if (command == "calibrate") {
            cmd_calibrate(cfg, options.out_dir);
        } else if (command == "backtest") {
            cmd_backtest(cfg, options.out_dir);
        } else if (command == "sweep") {
            cmd_sweep(cfg, options.out_dir);
        } else {
            throw ConfigError("unknown command '" + command + "'");
        }
        return ExitCode::Ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ExitCode::ConfigFailure;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return ExitCode::DataFailure;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return ExitCode::NumericFailure;
    } catch (const QuadratureError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return ExitCode::NumericFailure;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ExitCode::ConfigFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ExitCode::ConfigFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ExitCode::OtherFailure;
    }
}

}  // namespace drbc::cli
