#pragma once

#include "ddqn/agent.hpp"
#include "ddqn/market_data.hpp"
#include "ddqn/trading_env.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ddqn::eval {

using env::Action;

struct BacktestResult {
    std::vector<data::Date> dates; // settlement date of each step
    std::vector<Action> actions;
    std::vector<int> positions;
    std::vector<double> rewards;
    std::vector<double> market_returns;
    std::vector<double> agent_nav;
    std::vector<double> market_nav;
    std::vector<env::TraceRow> trace;

    std::size_t size() const noexcept { return rewards.size(); }
};

using Policy = std::function<Action(std::size_t step, std::span<const double> observation)>;

// One pass over the whole frame (rows - 1 steps, starting at row 0).
BacktestResult run_policy(const Policy& policy, const data::FeatureFrame& frame, const env::CostModel& costs);

// Greedy (epsilon = 0, eval mode) pass of the agent; nothing is learned or stored.
BacktestResult run_backtest(const agent::Agent& agent, const data::FeatureFrame& frame, const env::CostModel& costs);

// Replays a fixed action sequence through the environment.
BacktestResult replay_actions(std::span<const Action> actions, const data::FeatureFrame& frame,
                              const env::CostModel& costs);

inline constexpr double kTradingDaysPerYear = 252.0;

struct Annualized {
    double e_r = 0.0;
    double std_r = 0.0;
    std::optional<double> sharpe; // empty when std_r == 0
};

// E(R) = 252 * mean, std(R) = sqrt(252) * sample std (n - 1), Sharpe = E/std.
Annualized annualized_metrics(std::span<const double> daily_returns);

// Reward of an action sequence where actions[t] is settled with returns[t],
// starting from `initial_position`. Summed front to back.
double total_reward(std::span<const Action> actions, std::span<const double> returns, const env::CostModel& costs,
                    int initial_position = 0);

// Hindsight-optimal actions by backward dynamic programming over positions
// {-1, 0, +1}. Ties prefer Neutral, then the lower position.
std::vector<Action> oracle_actions(std::span<const double> returns, const env::CostModel& costs,
                                   int initial_position = 0);

struct ActionScore {
    double mse = 0.0;      // mean squared difference of action codes {0, 1, 2}
    double accuracy = 0.0; // share of exact matches
};

ActionScore score_actions(std::span<const Action> actions, std::span<const Action> oracle);

struct ReportRow {
    std::string model;
    Annualized metrics;
    ActionScore score;
    std::size_t n_days = 0;
};

struct ModelResult {
    std::string model;
    BacktestResult backtest;
};

struct Report {
    std::vector<ReportRow> rows; // models in input order, then "market"
    std::vector<std::string> nav_models;
    std::vector<data::Date> dates;
    std::vector<std::vector<double>> navs; // parallel to nav_models
};

// Scores every model against the oracle of its window and appends the
// always-long market row. All models must share the same window.
Report build_report(std::span<const ModelResult> models, const env::CostModel& costs);

// Sorted keys, fixed 6-decimal numbers; byte-stable for identical inputs.
std::string report_json(const Report& report);
// `date,model,nav`
std::string nav_curves_csv(const Report& report);

void emit_report(const Report& report, const std::filesystem::path& json_path,
                 const std::filesystem::path& nav_csv_path);

} // namespace ddqn::eval
