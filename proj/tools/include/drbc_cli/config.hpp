#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "drbc/backtest_engine.hpp"
#include "drbc/experiment_suite.hpp"

namespace drbc::cli {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every accepted key with its default; null marks a field without a default.
json default_config();

// Named parameter bundles applied between the defaults and the user file.
json preset(const std::string& name);

// DRBC_<SECTION>__<KEY>=value pairs from the process environment.
std::map<std::string, std::string> environment_overrides(char** envp);

// defaults <- preset <- user <- env, with unknown keys and type mismatches
// rejected. A manifest written by a previous run is accepted as `user`.
json resolve_config(const json& user, const std::map<std::string, std::string>& env);

json load_json_file(const std::filesystem::path& file);

// Typed views of a resolved config.
MarketSpec market_from(const json& cfg, double horizon);
UtilitySpec utility_from(const json& cfg);
WindowingSpec windowing_from(const json& cfg);
QuadratureSpec quadrature_from(const json& cfg, int dim, std::uint64_t seed);
TradingProtocol protocol_from(const json& cfg, int available_trade_steps = -1);
std::vector<StrategySpec> strategies_from(const json& cfg);
SyntheticScenario scenario_from(const json& cfg, double horizon);
QuantileMode quantile_from(const json& cfg, std::uint64_t seed);
std::vector<SuiteCell> cells_from(const json& cfg);
KappaLaw kappa_law_from(const std::string& name);

// The key that is missing or malformed, e.g. "market.sigma".
const json& require(const json& cfg, const std::string& dotted);

}  // namespace drbc::cli
