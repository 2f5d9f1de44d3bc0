#pragma once

#include "ddqn/evaluation.hpp"
#include "ddqn/market_data.hpp"
#include "ddqn/trading_env.hpp"
#include "ddqn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ddqn::cli {

// Everything a command needs. Defaults reproduce the reference setup, so an
// empty config file is valid.
struct RunConfig {
    data::ModelId model = data::ModelId::M0;
    std::map<std::string, std::filesystem::path> data_paths; // asset id -> CSV
    data::FeatureOptions features{};

    std::optional<data::SplitSpec> split_dates;
    std::size_t test_days = 504;

    std::string cost_preset = "paper";
    std::optional<double> trading_cost; // overrides the preset
    std::optional<double> time_cost;

    training::TrainConfig train{};
    agent::EpsilonSchedule epsilon{};
    std::optional<std::size_t> eps_linear_until; // defaults to episodes / 2

    data::SynthSpec synth{};

    std::optional<std::filesystem::path> checkpoint;
    std::vector<std::string> report_inputs; // "name=dir" or "dir"

    std::filesystem::path out_dir = "out";
    bool force = false;

    env::CostModel resolved_costs() const;
    training::TrainConfig resolved_train() const;
    void validate() const;
};

// Flat `key = value` lines; `#` starts a comment. Unknown keys, malformed
// values and out-of-range hyperparameters throw ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Command-line overrides, applied after the file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> model;
    std::optional<std::string> costs;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> checkpoint;
    bool force = false;
};

void apply(RunConfig& config, const Overrides& overrides);

enum ExitCode : int { kOk = 0, kConfigFailure = 2, kRuntimeFailure = 3 };

// Fixed output layout under out_dir.
namespace layout {
inline constexpr std::string_view kTrainFrame = "train_frame.csv";
inline constexpr std::string_view kTestFrame = "test_frame.csv";
inline constexpr std::string_view kProvenance = "provenance.json";
inline constexpr std::string_view kTrainLog = "train_log.csv";
inline constexpr std::string_view kTrainSummary = "train_summary.json";
inline constexpr std::string_view kCheckpoint = "checkpoint.json";
inline constexpr std::string_view kReport = "report.json";
inline constexpr std::string_view kNavCurves = "nav_curves.csv";
inline constexpr std::string_view kBacktestTrace = "backtest_trace.csv";
} // namespace layout

// Each command validates everything it can before writing any file.
void cmd_synth(const RunConfig& config);
data::FrameSplit cmd_prepare(const RunConfig& config);
training::TrainLog cmd_train(const RunConfig& config);
eval::Report cmd_evaluate(const RunConfig& config);
eval::Report cmd_report(const RunConfig& config);

// Runs a command by name, mapping failures to exit codes and messages on stderr.
int run_command(std::string_view command, const RunConfig& config);

} // namespace ddqn::cli
