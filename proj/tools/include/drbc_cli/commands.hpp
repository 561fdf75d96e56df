#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "drbc_cli/config.hpp"

namespace drbc::cli {

struct CommandOptions {
    std::optional<std::filesystem::path> config_file;
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

enum ExitCode : int { Ok = 0, ConfigFailure = 2, DataFailure = 3, NumericFailure = 4, OtherFailure = 1 };

// Resolves the config (file, env, flags) for `command`.
json resolve_for(const CommandOptions& options, const std::map<std::string, std::string>& env);

void cmd_simulate(const json& cfg, const std::filesystem::path& out);
void cmd_calibrate(const json& cfg, const std::filesystem::path& out);
void cmd_backtest(const json& cfg, const std::filesystem::path& out);
void cmd_sweep(const json& cfg, const std::filesystem::path& out);

// Resolves, dispatches and maps exceptions to exit codes.
int run_command(const std::string& command, const CommandOptions& options,
                const std::map<std::string, std::string>& env);

// Equal-width bins over [lo, hi]; values outside land in the edge bins and
// non-finite values in a trailing bin.
std::vector<int> histogram_counts(const std::vector<double>& values, int bins, double lo, double hi);

}  // namespace drbc::cli
