#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "drbc_cli/commands.hpp"

namespace drbc::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("drbc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path write_config(const std::string& name, const json& cfg) {
        const fs::path file = root_ / name;
        std::ofstream(file) << cfg.dump();
        return file;
    }

    int run(const std::string& command, const json& cfg, const std::string& out,
            const std::map<std::string, std::string>& env = {}, std::optional<int> threads = std::nullopt) {
        CommandOptions o;
        o.config_file = write_config(out + ".json", cfg);
        o.out_dir = root_ / out;
        o.threads = threads;
        return run_command(command, o, env);
    }

    static std::string slurp(const fs::path& file) {
        std::ifstream in(file);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static std::vector<std::string> lines(const fs::path& file) {
        std::ifstream in(file);
        std::vector<std::string> out;
        for (std::string l; std::getline(in, l);) out.push_back(l);
        return out;
    }

    fs::path root_;
};

json small_market() { return json{{"dim", 2}, {"sigma", 0.3}}; }

json small_backtest() {
    return json{{"market", small_market()},
                {"windowing", {{"window_len", 40}, {"n_windows", 10}}},
                {"protocol", {{"lookback_steps", 400}, {"trade_steps", 60}, {"eval_window", 60}}},
                {"quadrature", {{"nodes_per_dim", 16}}},
                {"strategies", {"bayesian", "drbc"}},
                {"backtest", {{"n_seeds", 3}}}};
}

TEST_F(CliTest, SimulateWritesPathAndManifest) {
    const json cfg{{"market", small_market()}, {"simulate", {{"n_steps", 50}}}};
    ASSERT_EQ(run("simulate", cfg, "a"), 0);
    EXPECT_TRUE(fs::exists(root_ / "a" / "path_000.csv"));
    EXPECT_TRUE(fs::exists(root_ / "a" / "manifest.json"));
    EXPECT_EQ(lines(root_ / "a" / "path_000.csv").size(), 52u);
    ASSERT_EQ(run("simulate", cfg, "b"), 0);
    EXPECT_EQ(slurp(root_ / "a" / "path_000.csv"), slurp(root_ / "b" / "path_000.csv"));
    EXPECT_EQ(slurp(root_ / "a" / "manifest.json"), slurp(root_ / "b" / "manifest.json"));
}

TEST_F(CliTest, MissingSigmaNamesTheField) {
    try {
        const json cfg = resolve_config(json{{"market", {{"dim", 2}}}}, {});
        market_from(cfg, 1.0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("market.sigma"), std::string::npos);
    }
    EXPECT_EQ(run("simulate", json{{"market", {{"dim", 2}}}}, "x"), ExitCode::ConfigFailure);
}

TEST_F(CliTest, SchemaRejectsUnknownKeysAndWrongTypes) {
    EXPECT_THROW(resolve_config(json{{"market", {{"sigmaa", 0.3}}}}, {}), ConfigError);
    EXPECT_THROW(resolve_config(json{{"bogus", 1}}, {}), ConfigError);
    EXPECT_THROW(resolve_config(json{{"market", {{"dim", "two"}}}}, {}), ConfigError);
    EXPECT_THROW(resolve_config(json{{"market", {{"dim", 2.5}}}}, {}), ConfigError);
    EXPECT_THROW(resolve_config(json{{"preset", "nope"}}, {}), ConfigError);
    EXPECT_NO_THROW(resolve_config(json{{"market", {{"rate", 1}}}}, {}));
}

TEST_F(CliTest, EnvironmentOverridesFile) {
    const json cfg = resolve_config(json{{"market", small_market()}},
                                    {{"MARKET__SIGMA", "0.2"}, {"SEED", "7"}, {"WINDOWING__MODE", "type"}});
    EXPECT_EQ(cfg["market"]["sigma"], 0.2);
    EXPECT_EQ(cfg["seed"], 7);
    EXPECT_EQ(cfg["windowing"]["mode"], "type");
    EXPECT_THROW(resolve_config(json::object(), {{"MARKET__NOPE", "1"}}), ConfigError);
}

TEST_F(CliTest, PresetSitsBelowUserValues) {
    const json cfg = resolve_config(json{{"preset", "real_data_monthly"}, {"protocol", {{"eval_rate", 0.03}}}}, {});
    EXPECT_EQ(cfg["protocol"]["lookback_steps"], 1260);
    EXPECT_EQ(cfg["protocol"]["info_lag"], true);
    EXPECT_EQ(cfg["protocol"]["eval_rate"], 0.03);
    EXPECT_EQ(cfg["market"]["rate"], 0.05);
}

TEST_F(CliTest, ManifestReproducesRun) {
    json cfg{{"market", small_market()}, {"simulate", {{"n_steps", 30}, {"n_paths", 2}}}, {"seed", 11}};
    ASSERT_EQ(run("simulate", cfg, "first"), 0);
    CommandOptions o;
    o.config_file = root_ / "first" / "manifest.json";
    o.out_dir = root_ / "second";
    ASSERT_EQ(run_command("simulate", o, {}), 0);
    EXPECT_EQ(slurp(root_ / "first" / "path_001.csv"), slurp(root_ / "second" / "path_001.csv"));
    EXPECT_EQ(slurp(root_ / "first" / "manifest.json"), slurp(root_ / "second" / "manifest.json"));
}

TEST_F(CliTest, CalibrateWritesResult) {
    json cfg{{"market", small_market()}, {"windowing", {{"window_len", 60}, {"n_windows", 8}}}};
    ASSERT_EQ(run("calibrate", cfg, "cal"), 0);
    const json doc = json::parse(slurp(root_ / "cal" / "calibration.json"));
    EXPECT_EQ(doc["n"], 8);
    EXPECT_EQ(doc["atoms"].size(), 8u);
    EXPECT_DOUBLE_EQ(doc["delta"].get<double>(), doc["eta_q"].get<double>() / 8.0);
    EXPECT_EQ(lines(root_ / "cal" / "perturbation.csv").size(), 9u);
    EXPECT_EQ(lines(root_ / "cal" / "prior.csv").size(), 9u);
}

TEST_F(CliTest, CalibrateSingleAtomIsConfigError) {
    json cfg{{"market", small_market()}, {"windowing", {{"window_len", 60}, {"n_windows", 1}}}};
    EXPECT_EQ(run("calibrate", cfg, "cal"), ExitCode::ConfigFailure);
}

TEST_F(CliTest, MissingPriceFileIsDataError) {
    json cfg = small_backtest();
    cfg["data"] = {{"prices", (root_ / "none.csv").string()}};
    EXPECT_EQ(run("backtest", cfg, "bt"), ExitCode::DataFailure);
}

TEST_F(CliTest, BacktestReportAndHistogram) {
    ASSERT_EQ(run("backtest", small_backtest(), "bt"), 0);
    const auto report = lines(root_ / "bt" / "report.csv");
    EXPECT_EQ(report.size(), 7u);  // header + 2 strategies x 3 seeds
    const auto hist = lines(root_ / "bt" / "hist_sharpe.csv");
    EXPECT_EQ(hist.front(), "bin_lo,bin_hi,bayesian,drbc");
    int total_b = 0, total_d = 0;
    for (std::size_t i = 1; i < hist.size(); ++i) {
        std::stringstream ss(hist[i]);
        std::string lo, hi, b, d;
        std::getline(ss, lo, ',');
        std::getline(ss, hi, ',');
        std::getline(ss, b, ',');
        std::getline(ss, d, ',');
        total_b += std::stoi(b);
        total_d += std::stoi(d);
    }
    EXPECT_EQ(total_b, 3);
    EXPECT_EQ(total_d, 3);
    EXPECT_TRUE(fs::exists(root_ / "bt" / "weights_drbc.csv"));
    EXPECT_EQ(lines(root_ / "bt" / "calibrations.csv").size(), 1u + 3u * 2u);
}

TEST_F(CliTest, BacktestIndependentOfThreads) {
    ASSERT_EQ(run("backtest", small_backtest(), "one", {}, 1), 0);
    ASSERT_EQ(run("backtest", small_backtest(), "three", {}, 3), 0);
    for (const char* f : {"report.csv", "summary.csv", "hist_sharpe.csv", "wealth.csv", "weights_bayesian.csv"}) {
        EXPECT_EQ(slurp(root_ / "one" / f), slurp(root_ / "three" / f)) << f;
    }
}

TEST_F(CliTest, BacktestFromPriceFile) {
    json sim{{"market", small_market()}, {"simulate", {{"n_steps", 470}}}};
    ASSERT_EQ(run("simulate", sim, "sim"), 0);
    json cfg = small_backtest();
    cfg["data"] = {{"prices", (root_ / "sim" / "path_000.csv").string()}};
    cfg["protocol"]["trade_steps"] = 0;
    cfg["protocol"]["eval_window"] = 0;
    ASSERT_EQ(run("backtest", cfg, "bt"), 0);
    EXPECT_EQ(lines(root_ / "bt" / "report.csv").size(), 3u);
    EXPECT_EQ(lines(root_ / "bt" / "wealth.csv").size(), 72u);  // header + 71 points
}

TEST_F(CliTest, SweepZeroScaleMatchesBayesian) {
    json cfg = small_backtest();
    cfg["market"]["dim"] = 2;
    cfg["sweep"] = {{"cells", json::array({{{"b0", 0.4}, {"m", 11}, {"kappa_law", "smooth"}}})},
                    {"n_seeds", 2},
                    {"scales", {0.0}},
                    {"radius_cell", {{"b0", 0.4}, {"m", 11}, {"kappa_law", "smooth"}}},
                    {"radius_n_seeds", 2},
                    {"radius_trade_steps", 60}};
    ASSERT_EQ(run("sweep", cfg, "sw"), 0);
    const auto summary = lines(root_ / "sw" / "summary.csv");
    ASSERT_EQ(summary.size(), 3u);
    // same Sharpe and utility columns for the two strategies
    auto tail = [](const std::string& row) {
        std::stringstream ss(row);
        std::vector<std::string> c;
        for (std::string x; std::getline(ss, x, ',');) c.push_back(x);
        return std::vector<std::string>(c.begin() + 5, c.end());
    };
    json cfg0 = cfg;
    cfg0["calibration"] = {{"delta_scale", 0.0}};
    ASSERT_EQ(run("sweep", cfg0, "sw0"), 0);
    const auto zero = lines(root_ / "sw0" / "summary.csv");
    EXPECT_EQ(tail(zero[1]), tail(zero[2]));
    EXPECT_TRUE(fs::exists(root_ / "sw" / "radius_sweep.csv"));
}

TEST(Histogram, CountsEverything) {
    const auto c = histogram_counts({-100.0, 0.5, 0.6, 9.99, 100.0, std::nan("")}, 4, 0.0, 10.0);
    ASSERT_EQ(c.size(), 5u);
    EXPECT_EQ(c[0], 3);
    EXPECT_EQ(c[3], 2);
    EXPECT_EQ(c[4], 1);
}

}  // namespace
}  // namespace drbc::cli
