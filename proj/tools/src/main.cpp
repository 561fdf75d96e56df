#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "drbc_cli/commands.hpp"

extern char** environ;

int main(int argc, char** argv) {
    CLI::App app{"Robust Bayesian portfolio experiments"};
    app.require_subcommand(1);

    drbc::cli::CommandOptions options;
    std::string config_file;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    for (const char* name : {"simulate", "calibrate", "backtest", "sweep"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_file, "JSON config or manifest");
        sub->add_option("--out", options.out_dir, "output directory")->default_val(".");
        sub->add_option("--seed", seed, "base seed");
        sub->add_option("--threads", threads, "worker threads");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : drbc::cli::ExitCode::ConfigFailure;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    CLI::App* sub = app.get_subcommands().front();
    if (!config_file.empty()) options.config_file = config_file;
    if (sub->count("--seed") > 0) options.seed = seed;
    if (sub->count("--threads") > 0) options.threads = threads;
    return drbc::cli::run_command(sub->get_name(), options, drbc::cli::environment_overrides(environ));
}
