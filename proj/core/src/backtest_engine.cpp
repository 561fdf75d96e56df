#include "drbc/backtest_engine.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "drbc/covariance.hpp"
#include "drbc/csv_io.hpp"
#include "drbc/errors.hpp"
#include "drbc/robust_prior.hpp"

namespace drbc {

namespace {

constexpr double kWealthFloor = 1e-12;

const std::vector<std::pair<Strategy, std::string>>& strategy_names() {
    static const std::vector<std::pair<Strategy, std::string>> names{
        {Strategy::Bayesian, "bayesian"}, {Strategy::Drbc, "drbc"},
        {Strategy::DrmvNoRf, "drmv_no_rf"}, {Strategy::DrmvRf, "drmv_rf"},
        {Strategy::Drc, "drc"},         {Strategy::MertonPlugin, "merton_plugin"},
        {Strategy::RiskFree, "risk_free"}, {Strategy::Oracle, "oracle"},
    };
    return names;
}

}  // namespace

std::string strategy_name(Strategy s) {
    for (const auto& [k, v] : strategy_names()) {
        if (k == s) return v;
    }
    throw std::invalid_argument("unknown strategy");
}

Strategy parse_strategy(const std::string& name) {
    for (const auto& [k, v] : strategy_names()) {
        if (v == name) return k;
    }
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string StrategySpec::name() const {
    return label.empty() ? strategy_name(kind) : label;
}

double TradingProtocol::resolved_plan_horizon(double dt) const {
    return plan_horizon > 0.0 ? plan_horizon : prior_update_every * dt;
}

void TradingProtocol::validate(const MarketSpec& market) const {
    if (lookback_steps < 1 || rebalance_every < 1 || prior_update_every < 1 || eval_window < 1 ||
        trade_steps < 1) {
        throw std::invalid_argument("TradingProtocol: step counts must be positive");
    }
    if (eval_window > trade_steps) {
        throw std::invalid_argument("TradingProtocol: eval_window exceeds trade_steps");
    }
    if (lookback_steps < windowing.required_steps()) {
        throw std::invalid_argument("TradingProtocol: lookback_steps " + std::to_string(lookback_steps) +
                                    " is shorter than the windowing requirement " +
                                    std::to_string(windowing.required_steps()));
    }
    const double T = resolved_plan_horizon(market.dt());
    const int last_plan_step = prior_update_every - 1;
    if (!(T > last_plan_step * market.dt() + 1e-12 * market.dt()) || !(T > market.dt())) {
        throw std::invalid_argument("TradingProtocol: plan_horizon must exceed the prior update interval");
    }
    if (!(short_cap >= 0.0)) throw std::invalid_argument("TradingProtocol: short_cap must be nonnegative");
    if (!(x0 > 0.0)) throw std::invalid_argument("TradingProtocol: x0 must be positive");
    if (clamp_bound && !(*clamp_bound > 0.0)) {
        throw std::invalid_argument("TradingProtocol: clamp bound must be positive");
    }
}

double step_wealth(double x, const PolicyWeights& weights, const Vector& step_return, double rate, double dt) {
    if (!(x > 0.0)) throw std::invalid_argument("step_wealth: wealth must be positive");
    const double rdt = rate * dt;
    return x * (1.0 + rdt + weights.weights.dot((step_return.array() - rdt).matrix()));
}

double sharpe_ratio(const std::vector<double>& wealth, double r_eval, double periods_per_year) {
    if (wealth.size() < 3) throw std::invalid_argument("sharpe_ratio: need at least 3 wealth points");
    const std::size_t n = wealth.size() - 1;
    std::vector<double> ret(n);
    for (std::size_t i = 0; i < n; ++i) ret[i] = wealth[i + 1] / wealth[i] - 1.0;
    const double mean = std::accumulate(ret.begin(), ret.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : ret) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double excess = mean - r_eval / periods_per_year;
    // Constant step returns up to rounding.
    if (sd <= 1e-13) {
        if (std::abs(excess) <= 1e-13) return 0.0;
        throw NumericError("sharpe_ratio: zero return variance with nonzero excess mean");
    }
    return excess * periods_per_year / (sd * std::sqrt(periods_per_year));
}

double terminal_utility(double wealth_t, const UtilitySpec& utility) {
    if (!(wealth_t > 0.0)) throw std::invalid_argument("terminal_utility: wealth must be positive");
    return utility.utility(wealth_t);
}

namespace {

struct StrategyState {
    StrategySpec spec;
    StrategyResult result;
    PolicyWeights current;
    double x = 1.0;
    double leverage_sum = 0.0;
    int cap_hits = 0;
    // Merton-type evaluator valid for the current plan (Bayesian / DRBC).
    std::shared_ptr<const PolicyEvaluator> evaluator;
    bool robust_ok = false;
};

PolicyWeights capped(Vector w, double cap, bool& hit) {
    hit = (w.array() < -cap).any();
    return apply_short_cap(budgeted(std::move(w)), cap);
}

Matrix step_returns(const Matrix& prices, Eigen::Index first, Eigen::Index steps) {
    const Matrix a = prices.middleRows(first, steps);
    const Matrix b = prices.middleRows(first + 1, steps);
    return (b.array() / a.array() - 1.0).matrix();
}

PolicyWeights drmv_weights(const Matrix& prices, Eigen::Index first, Eigen::Index steps,
                           const TradingProtocol& p, const MarketSpec& market, bool with_rf) {
    const Matrix r = step_returns(prices, first, steps);
    DrmvProblem pb;
    pb.mu_hat = r.colwise().mean().transpose() / market.dt();
    pb.sigma_hat = ledoit_wolf(r) / market.dt();
    pb.delta = p.drmv_delta;
    pb.alpha_bar = with_rf ? p.drmv_rf_target : p.drmv_target;
    pb.p_norm = p.drmv_p;
    try {
        return with_rf ? drmv_rf_solve(pb, market.rate()) : drmv_solve(pb);
    } catch (const InfeasibleTarget& e) {
        spdlog::warn("{}; holding the robust-return maximizer", e.what());
        const Vector& m = e.maximizer();
        if (with_rf) {
            return PolicyWeights{m.head(m.size() - 1), m(m.size() - 1)};
        }
        return PolicyWeights{m, 0.0};
    }
}

}  // namespace

BacktestReport run_backtest(const Matrix& prices, const TradingProtocol& p,
                            const std::vector<StrategySpec>& strategies, const MarketSpec& market,
                            const UtilitySpec& utility, const QuadratureSpec& quadrature,
                            const std::optional<DriftModel>& truth) {
    p.validate(market);
    const int d = market.dim();
    if (prices.cols() != d) throw DataError("run_backtest: price columns do not match the market dimension");
    const Eigen::Index L = p.lookback_steps;
    const Eigen::Index lag = p.info_lag ? 1 : 0;
    const Eigen::Index needed = L + lag + p.trade_steps + 1;
    if (prices.rows() < needed) {
        throw DataError("run_backtest: need " + std::to_string(needed) + " price rows, got " +
                        std::to_string(prices.rows()));
    }
    if ((prices.array() <= 0.0).any() || !prices.allFinite()) {
        throw DataError("run_backtest: prices must be finite and strictly positive");
    }
    if (strategies.empty()) throw std::invalid_argument("run_backtest: no strategies requested");

    const double dt = market.dt();
    const double plan_T = p.resolved_plan_horizon(dt);
    const MarketSpec plan_market = market.with_horizon(plan_T);
    const GaussianNodes nodes = make_nodes(quadrature, d);
    const double periods = 1.0 / dt;

    std::vector<StrategyState> states;
    for (const auto& spec : strategies) {
        if (spec.kind == Strategy::Oracle && !truth) {
            throw std::invalid_argument("run_backtest: the oracle strategy needs the true drift");
        }
        if (!(spec.delta_scale >= 0.0)) throw std::invalid_argument("run_backtest: delta_scale must be nonnegative");
        StrategyState st;
        st.spec = spec;
        st.result.name = spec.name();
        st.result.wealth.assign(static_cast<std::size_t>(p.trade_steps) + 1, 0.0);
        st.result.wealth[0] = p.x0;
        st.result.weights = Matrix::Zero(p.trade_steps, d);
        st.result.cash = Vector::Zero(p.trade_steps);
        st.current = PolicyWeights{Vector::Zero(d), 1.0};
        st.x = p.x0;
        states.push_back(std::move(st));
    }

    BacktestReport report;
    report.times.resize(static_cast<std::size_t>(p.trade_steps) + 1);
    for (int j = 0; j <= p.trade_steps; ++j) {
        report.times[static_cast<std::size_t>(j)] = static_cast<double>(L + lag + j) * dt;
    }

    std::optional<EmpiricalPrior> prior;
    std::shared_ptr<const PolicyEvaluator> nominal;
    double base_delta = 0.0;
    bool calibrated = false;
    Eigen::Index plan_start = 0;
    std::map<double, std::shared_ptr<const PolicyEvaluator>> robust_cache;

    for (int j = 0; j < p.trade_steps; ++j) {
        const Eigen::Index i = L + lag + j;
        const Eigen::Index info = i - lag;
        const Eigen::Index hist_first = info - L;

        if (j % p.prior_update_every == 0) {
            plan_start = info;
            EmpiricalPrior built = build_prior(prices.middleRows(hist_first, info - hist_first + 1), market,
                                               p.windowing);
            if (p.clamp_bound) {
                built = clamp_atoms(built, Vector::Constant(d, -*p.clamp_bound), Vector::Constant(d, *p.clamp_bound));
            }
            prior = built;
            nominal = std::make_shared<PolicyEvaluator>(*prior, utility, plan_market, nodes);
            robust_cache.clear();

            CalibrationRecord rec;
            rec.step = j;
            try {
                rec.result = select_delta(*prior, p.x0, utility, plan_market, nodes, p.confidence, p.quantile);
                rec.ok = true;
            } catch (const std::exception& e) {
                rec.error = e.what();
                spdlog::warn("calibration failed at trade step {}: {}; falling back to the nominal prior", j,
                             e.what());
            }
            calibrated = rec.ok;
            base_delta = rec.ok ? rec.result.delta : 0.0;
            report.calibrations.push_back(rec);

            for (auto& st : states) {
                if (st.spec.kind == Strategy::Bayesian) {
                    st.evaluator = nominal;
                } else if (st.spec.kind == Strategy::Drbc) {
                    st.robust_ok = calibrated;
                    if (!calibrated) ++st.result.fallbacks;
                    const double delta = st.spec.delta_scale * base_delta;
                    if (!calibrated || delta == 0.0) {
                        st.evaluator = nominal;
                        continue;
                    }
                    auto it = robust_cache.find(delta);
                    if (it == robust_cache.end()) {
                        const PerturbationResult pert =
                            perturb_prior(*prior, RobustSpec{delta, 1.0, 0}, utility, plan_market, nodes);
                        it = robust_cache
                                 .emplace(delta, std::make_shared<PolicyEvaluator>(pert.perturbed, utility,
                                                                                   plan_market, nodes))
                                 .first;
                    }
                    st.evaluator = it->second;
                }
            }
        }

        const double t = static_cast<double>(info - plan_start) * dt;
        const Vector y = observation_from_prices(prices.row(plan_start).transpose(), prices.row(info).transpose(),
                                                 t, market);
        const bool hold_cash = p.info_lag && info == plan_start;
        const bool rebalance = j % p.rebalance_every == 0;

        Vector b_hat;
        if (rebalance) {
            b_hat = estimate_window_drift(prices.middleRows(hist_first, info - hist_first + 1), market,
                                          static_cast<double>(info - hist_first) * dt);
            if (p.clamp_bound) b_hat = b_hat.cwiseMax(-*p.clamp_bound).cwiseMin(*p.clamp_bound);
        }

        const Vector step_ret =
            (prices.row(i + 1).array() / prices.row(i).array() - 1.0).matrix().transpose();

        for (auto& st : states) {
            bool hit = false;
            switch (st.spec.kind) {
                case Strategy::Bayesian:
                case Strategy::Drbc: {
                    if (st.spec.kind == Strategy::Drbc && p.projection == ProjectionMode::TimeVarying &&
                        st.robust_ok && st.spec.delta_scale * base_delta > 0.0 && t > 0.0 &&
                        plan_T - t > dt) {
                        const MarketSpec remaining = market.with_horizon(plan_T - t);
                        const PerturbationResult pert = perturb_prior(
                            *prior, RobustSpec{st.spec.delta_scale * base_delta, 1.0, 0}, utility, remaining,
                            nodes);
                        st.evaluator = std::make_shared<PolicyEvaluator>(pert.perturbed, utility, plan_market, nodes);
                    }
                    st.current = capped(st.evaluator->fraction(t, y), p.short_cap, hit);
                    break;
                }
                case Strategy::MertonPlugin:
                    if (rebalance) st.current = capped(merton_plugin(b_hat, market, utility).weights, p.short_cap, hit);
                    break;
                case Strategy::Drc:
                    if (rebalance) {
                        const double delta = p.drc_delta >= 0.0 ? p.drc_delta : st.spec.delta_scale * base_delta;
                        const Vector w = merton_plugin(drc_adversarial_drift(b_hat, market, delta), market, utility).weights;
                        st.current = capped(w, p.short_cap, hit);
                    }
                    break;
                case Strategy::DrmvNoRf:
                case Strategy::DrmvRf:
                    if (rebalance) {
                        st.current = drmv_weights(prices, hist_first, info - hist_first, p, market,
                                                  st.spec.kind == Strategy::DrmvRf);
                    }
                    break;
                case Strategy::RiskFree:
                    st.current = PolicyWeights{Vector::Zero(d), 1.0};
                    break;
                case Strategy::Oracle:
                    st.current = merton_plugin(drift_at(*truth, static_cast<double>(i) * dt), market, utility);
                    break;
            }

            PolicyWeights applied = st.current;
            if (hold_cash || st.result.bankrupt) applied = PolicyWeights{Vector::Zero(d), 1.0};

            const std::size_t js = static_cast<std::size_t>(j);
            st.result.weights.row(j) = applied.weights.transpose();
            st.result.cash(j) = applied.cash;
            const double lev = applied.weights.cwiseAbs().sum();
            st.leverage_sum += lev;
            st.result.max_leverage = std::max(st.result.max_leverage, lev);
            if (hit) ++st.cap_hits;

            if (st.result.bankrupt) {
                st.result.wealth[js + 1] = st.x;
                continue;
            }
            double next = step_wealth(st.x, applied, step_ret, market.rate(), dt);
            if (!(next > kWealthFloor)) {
                next = kWealthFloor;
                st.result.bankrupt = true;
            }
            st.x = next;
            st.result.wealth[js + 1] = next;
        }
    }

    for (auto& st : states) {
        auto& r = st.result;
        r.mean_leverage = st.leverage_sum / p.trade_steps;
        r.cap_hit_rate = static_cast<double>(st.cap_hits) / p.trade_steps;
        const std::vector<double> tail(r.wealth.end() - (p.eval_window + 1), r.wealth.end());
        try {
            r.sharpe = sharpe_ratio(tail, p.eval_rate, periods);
        } catch (const NumericError&) {
            r.sharpe = std::nan("");
        }
        r.terminal_utility = terminal_utility(r.wealth.back(), utility);
        report.strategies.push_back(std::move(r));
    }
    return report;
}

void write_weights_csv(const BacktestReport& report, const StrategyResult& result,
                       const std::filesystem::path& file) {
    auto os = open_for_write(file);
    std::vector<std::string> header{"time", "cash"};
    for (Eigen::Index k = 1; k <= result.weights.cols(); ++k) header.push_back("w_" + std::to_string(k));
    write_csv_row(os, header);
    for (Eigen::Index j = 0; j < result.weights.rows(); ++j) {
        std::vector<std::string> row{format_double(report.times[static_cast<std::size_t>(j)]),
                                     format_double(result.cash(j))};
        for (Eigen::Index k = 0; k < result.weights.cols(); ++k) row.push_back(format_double(result.weights(j, k)));
        write_csv_row(os, row);
    }
}

}  // namespace drbc
