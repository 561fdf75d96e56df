#include "drbc_cli/config.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace drbc::cli {

json default_config() {
    return json{
        {"seed", 0},
        {"threads", 1},
        {"preset", nullptr},
        {"market",
         {{"dim", 20},
          {"rate", 0.01},
          {"sigma", nullptr},
          {"dt", 1.0 / 2772.0},
          {"max_condition", 1e12}}},
        {"utility", {{"alpha", -3.0}}},
        {"drift",
         {{"b0", 0.4}, {"kappa_law", "smooth"}, {"kappa", nullptr}, {"constant", nullptr}}},
        {"simulate", {{"n_steps", 2772}, {"n_paths", 1}, {"initial_price", 100.0}}},
        {"windowing",
         {{"mode", "consecutive"},
          {"window_len", 252},
          {"n_windows", 10},
          {"n_types", 10},
          {"clamp_bound", nullptr}}},
        {"quadrature", {{"method", "auto"}, {"nodes_per_dim", 40}, {"n_samples", 20000}}},
        {"calibration",
         {{"confidence", 0.95},
          {"mode", "analytic"},
          {"draws", 100000},
          {"x0", 1.0},
          {"delta_scale", 1.0},
          {"tau", 1.0},
          {"horizon", nullptr}}},
        {"protocol",
         {{"lookback_steps", 2520},
          {"rebalance_every", 22},
          {"prior_update_every", 30},
          {"eval_window", 252},
          {"trade_steps", 252},
          {"plan_horizon", 0.0},
          {"eval_rate", 0.01},
          {"projection", "static"},
          {"info_lag", false},
          {"short_cap", 0.5},
          {"x0", 1.0},
          {"drmv_delta", 1e-4},
          {"drmv_target", 0.10},
          {"drmv_rf_target", 0.105},
          {"drmv_p", 2.0},
          {"drc_delta", -1.0}}},
        {"strategies", {"bayesian", "drbc", "drmv_no_rf", "drmv_rf", "drc"}},
        {"data", {{"prices", nullptr}}},
        {"backtest", {{"n_seeds", 1}, {"hist_bins", 20}, {"hist_min", -10.0}, {"hist_max", 10.0}}},
        {"sweep",
         {{"cells",
           json::array({
               {{"b0", 0.2}, {"m", 6}, {"kappa_law", "smooth"}},
               {{"b0", 0.2}, {"m", 11}, {"kappa_law", "smooth"}},
               {{"b0", 0.4}, {"m", 6}, {"kappa_law", "smooth"}},
               {{"b0", 0.4}, {"m", 11}, {"kappa_law", "smooth"}},
               {{"b0", 0.2}, {"m", 6}, {"kappa_law", "volatile"}},
               {{"b0", 0.2}, {"m", 11}, {"kappa_law", "volatile"}},
               {{"b0", 0.4}, {"m", 6}, {"kappa_law", "volatile"}},
               {{"b0", 0.4}, {"m", 11}, {"kappa_law", "volatile"}},
           })},
          {"n_seeds", 100},
          {"run_grid", true},
          {"run_radius", true},
          {"scales", {0.0, 0.25, 1.0, 4.0, 16.0}},
          {"radius_cell", {{"b0", 0.4}, {"m", 11}, {"kappa_law", "smooth"}}},
          {"radius_n_seeds", 100},
          {"radius_trade_steps", 504}}},
    };
}

json preset(const std::string& name) {
    if (name == "real_data_monthly") {
        // Monthly rolling on daily data: five years of history, two-month
        // plan, flat 5% trading rate, 4% evaluation rate, first day of each
        // month skipped.
        return json{
            {"market", {{"rate", 0.05}, {"dt", 1.0 / 252.0}}},
            {"windowing", {{"mode", "consecutive"}, {"window_len", 126}, {"n_windows", 10}, {"clamp_bound", 5.0}}},
            {"protocol",
             {{"lookback_steps", 1260},
              {"rebalance_every", 21},
              {"prior_update_every", 21},
              {"plan_horizon", 2.0 / 12.0},
              {"eval_rate", 0.04},
              {"eval_window", 0},
              {"trade_steps", 0},
              {"info_lag", true},
              {"short_cap", 0.5},
              {"drmv_rf_target", 0.105}}},
        };
    }
    throw ConfigError("unknown preset '" + name + "'");
}

namespace {

std::string kind_of(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

bool compatible(const json& def, const json& val) {
    if (def.is_null() || val.is_null()) return true;
    if (def.is_number_integer()) return val.is_number_integer();
    if (def.is_number()) return val.is_number();
    return kind_of(def) == kind_of(val);
}

// Overlays `src` onto `dst` following the schema in `schema`.
void overlay(json& dst, const json& src, const json& schema, const std::string& path) {
    if (!src.is_object()) throw ConfigError("config section '" + path + "' must be an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!schema.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        const json& def = schema.at(it.key());
        if (def.is_object() && !def.empty()) {
            overlay(dst[it.key()], it.value(), def, key);
            continue;
        }
        if (!compatible(def, it.value())) {
            throw ConfigError("config key '" + key + "' expects " + kind_of(def) + ", got " + kind_of(it.value()));
        }
        dst[it.key()] = it.value();
    }
}

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::map<std::string, std::string> environment_overrides(char** envp) {
    std::map<std::string, std::string> out;
    const std::string prefix = "DRBC_";
    for (char** e = envp; e && *e; ++e) {
        const std::string entry(*e);
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        out[entry.substr(prefix.size(), eq - prefix.size())] = entry.substr(eq + 1);
    }
    return out;
}

json resolve_config(const json& user_in, const std::map<std::string, std::string>& env) {
    json user = user_in;
    if (user.is_object() && user.contains("manifest_version")) {
        if (!user.contains("config")) throw ConfigError("manifest has no 'config' block");
        user = user.at("config");
    }
    if (!user.is_object()) throw ConfigError("config must be a JSON object");

    const json schema = default_config();
    json cfg = schema;

    std::optional<std::string> preset_name;
    if (user.contains("preset") && user.at("preset").is_string()) preset_name = user.at("preset").get<std::string>();
    if (auto it = env.find("PRESET"); it != env.end()) preset_name = it->second;
    if (preset_name) {
        overlay(cfg, preset(*preset_name), schema, "");
        cfg["preset"] = *preset_name;
    }
    overlay(cfg, user, schema, "");

    for (const auto& [name, value] : env) {
        if (name == "PRESET") continue;
        // SECTION__KEY or top-level KEY.
        std::vector<std::string> parts;
        std::string rest = lower(name);
        for (std::size_t pos; (pos = rest.find("__")) != std::string::npos;) {
            parts.push_back(rest.substr(0, pos));
            rest = rest.substr(pos + 2);
        }
        parts.push_back(rest);
        json patch = parse_scalar(value);
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
        overlay(cfg, patch, schema, "");
    }
    return cfg;
}

json load_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
}

const json& require(const json& cfg, const std::string& dotted) {
    const json* node = &cfg;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part) || node->at(part).is_null()) {
            throw ConfigError("missing required config field '" + dotted + "'");
        }
        node = &node->at(part);
    }
    return *node;
}

namespace {

Vector vector_from(const json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError("'" + key + "' must be an array of numbers");
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
}

}  // namespace

MarketSpec market_from(const json& cfg, double horizon) {
    const json& m = cfg.at("market");
    const int d = m.at("dim").get<int>();
    if (d < 1) throw ConfigError("market.dim must be positive");
    const json& sig = require(cfg, "market.sigma");
    Matrix sigma;
    if (sig.is_number()) {
        sigma = sig.get<double>() * Matrix::Identity(d, d);
    } else if (sig.is_array()) {
        if (static_cast<int>(sig.size()) != d) {
            throw ConfigError("market.sigma must have market.dim = " + std::to_string(d) + " rows");
        }
        sigma.resize(d, d);
        for (int i = 0; i < d; ++i) {
            const Vector row = vector_from(sig[static_cast<std::size_t>(i)], "market.sigma");
            if (row.size() != d) throw ConfigError("market.sigma must be square");
            sigma.row(i) = row.transpose();
        }
    } else {
        throw ConfigError("market.sigma must be a number (scaled identity) or a matrix");
    }
    try {
        return MarketSpec(m.at("rate").get<double>(), sigma, horizon, m.at("dt").get<double>(),
                          m.at("max_condition").get<double>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

UtilitySpec utility_from(const json& cfg) {
    try {
        return UtilitySpec(cfg.at("utility").at("alpha").get<double>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

WindowingSpec windowing_from(const json& cfg) {
    const json& w = cfg.at("windowing");
    WindowingSpec out;
    const auto mode = w.at("mode").get<std::string>();
    if (mode == "consecutive") {
        out.mode = WindowMode::Consecutive;
    } else if (mode == "type") {
        out.mode = WindowMode::Type;
    } else {
        throw ConfigError("windowing.mode must be 'consecutive' or 'type'");
    }
    out.window_len = w.at("window_len").get<int>();
    out.n_windows = w.at("n_windows").get<int>();
    out.n_types = w.at("n_types").get<int>();
    if (out.window_len < 1 || out.n_windows < 1 || out.n_types < 1) {
        throw ConfigError("windowing counts must be positive");
    }
    return out;
}

QuadratureSpec quadrature_from(const json& cfg, int dim, std::uint64_t seed) {
    const json& q = cfg.at("quadrature");
    const auto method = q.at("method").get<std::string>();
    const int nodes = q.at("nodes_per_dim").get<int>();
    const auto samples = q.at("n_samples").get<std::size_t>();
    QuadratureSpec out;
    if (method == "auto") {
        out = suite_quadrature(dim, samples, nodes, seed);
    } else if (method == "gauss_hermite") {
        out.method = GaussHermiteTensor{nodes};
    } else if (method == "monte_carlo") {
        out.method = MonteCarlo{samples, seed};
    } else {
        throw ConfigError("quadrature.method must be 'auto', 'gauss_hermite' or 'monte_carlo'");
    }
    try {
        out.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return out;
}

QuantileMode quantile_from(const json& cfg, std::uint64_t seed) {
    const json& c = cfg.at("calibration");
    const auto mode = c.at("mode").get<std::string>();
    if (mode == "analytic") return AnalyticQuantile{};
    if (mode == "sample") return SampleQuantile{c.at("draws").get<std::size_t>(), seed};
    throw ConfigError("calibration.mode must be 'analytic' or 'sample'");
}

TradingProtocol protocol_from(const json& cfg, int available_trade_steps) {
    const json& p = cfg.at("protocol");
    TradingProtocol out;
    out.lookback_steps = p.at("lookback_steps").get<int>();
    out.rebalance_every = p.at("rebalance_every").get<int>();
    out.prior_update_every = p.at("prior_update_every").get<int>();
    out.trade_steps = p.at("trade_steps").get<int>();
    out.eval_window = p.at("eval_window").get<int>();
    if (out.trade_steps == 0) {
        if (available_trade_steps < 1) {
            throw ConfigError("protocol.trade_steps = 0 (use all data) needs a price file");
        }
        out.trade_steps = available_trade_steps;
    }
    if (out.eval_window == 0) out.eval_window = out.trade_steps;
    out.plan_horizon = p.at("plan_horizon").get<double>();
    out.eval_rate = p.at("eval_rate").get<double>();
    const auto proj = p.at("projection").get<std::string>();
    if (proj == "static") {
        out.projection = ProjectionMode::Static;
    } else if (proj == "time_varying") {
        out.projection = ProjectionMode::TimeVarying;
    } else {
        throw ConfigError("protocol.projection must be 'static' or 'time_varying'");
    }
    out.info_lag = p.at("info_lag").get<bool>();
    out.short_cap = p.at("short_cap").get<double>();
    out.x0 = p.at("x0").get<double>();
    out.drmv_delta = p.at("drmv_delta").get<double>();
    out.drmv_target = p.at("drmv_target").get<double>();
    out.drmv_rf_target = p.at("drmv_rf_target").get<double>();
    out.drmv_p = p.at("drmv_p").get<double>();
    out.drc_delta = p.at("drc_delta").get<double>();
    out.windowing = windowing_from(cfg);
    const json& clamp = cfg.at("windowing").at("clamp_bound");
    if (!clamp.is_null()) {
        if (!clamp.is_number()) throw ConfigError("windowing.clamp_bound must be a number");
        out.clamp_bound = clamp.get<double>();
    }
    out.confidence = cfg.at("calibration").at("confidence").get<double>();
    out.quantile = quantile_from(cfg, cfg.at("seed").get<std::uint64_t>());
    return out;
}

std::vector<StrategySpec> strategies_from(const json& cfg) {
    const json& list = cfg.at("strategies");
    const double scale = cfg.at("calibration").at("delta_scale").get<double>();
    std::vector<StrategySpec> out;
    for (const auto& item : list) {
        if (!item.is_string()) throw ConfigError("strategies must be a list of names");
        try {
            out.push_back(StrategySpec{parse_strategy(item.get<std::string>()), scale, ""});
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (out.empty()) throw ConfigError("strategies must not be empty");
    return out;
}

KappaLaw kappa_law_from(const std::string& name) {
    if (name == "smooth") return KappaLaw::Smooth;
    if (name == "volatile") return KappaLaw::Volatile;
    throw ConfigError("kappa_law must be 'smooth' or 'volatile'");
}

SyntheticScenario scenario_from(const json& cfg, double horizon) {
    const json& d = cfg.at("drift");
    SyntheticScenario s{market_from(cfg, horizon),
                        utility_from(cfg).alpha(),
                        d.at("b0").get<double>(),
                        kappa_law_from(d.at("kappa_law").get<std::string>()),
                        std::nullopt,
                        std::nullopt,
                        cfg.at("simulate").at("initial_price").get<double>()};
    if (!d.at("kappa").is_null()) s.kappa = vector_from(d.at("kappa"), "drift.kappa");
    if (!d.at("constant").is_null()) s.constant_drift = vector_from(d.at("constant"), "drift.constant");
    if (!(s.b0 > 0.0)) throw ConfigError("drift.b0 must be positive");
    return s;
}

std::vector<SuiteCell> cells_from(const json& cfg) {
    std::vector<SuiteCell> out;
    for (const auto& c : cfg.at("sweep").at("cells")) {
        if (!c.is_object()) throw ConfigError("sweep.cells entries must be objects");
        for (auto it = c.begin(); it != c.end(); ++it) {
            if (it.key() != "b0" && it.key() != "m" && it.key() != "kappa_law") {
                throw ConfigError("unknown config key 'sweep.cells." + it.key() + "'");
            }
        }
        SuiteCell cell;
        cell.b0 = c.value("b0", 0.4);
        cell.m = c.value("m", 11);
        cell.kappa_law = kappa_law_from(c.value("kappa_law", std::string("smooth")));
        if (!(cell.b0 > 0.0) || cell.m < 1) throw ConfigError("sweep cell needs b0 > 0 and m >= 1");
        out.push_back(cell);
    }
    if (out.empty()) throw ConfigError("sweep.cells must not be empty");
    return out;
}

}  // namespace drbc::cli
