#pragma once

#include "ddqn/market_data.hpp"
#include "ddqn/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ddqn::env {

enum class Action : std::uint8_t { Short = 0, Neutral = 1, Long = 2 };

inline constexpr std::size_t kActionCount = 3;

constexpr int position_of(Action a) noexcept { return static_cast<int>(a) - 1; }
constexpr int index_of(Action a) noexcept { return static_cast<int>(a); }
Action action_from_index(int index);
std::string_view action_name(Action a);

struct CostModel {
    double trading_cost = 1e-4; // per unit of position change
    double time_cost = 1e-5;    // per step without a position change
};

// "paper" (1e-4 / 1e-5), "none" (0 / 0), "high" (1e-3 / 1e-4).
CostModel cost_preset(std::string_view name);

// Cost of moving from one position to another: trades * trading_cost when the
// position changes, time_cost otherwise. Never both.
double transition_cost(int from_position, int to_position, const CostModel& costs) noexcept;

enum class StartMode { Random, Fixed };

struct EnvConfig {
    std::size_t episode_length = 252;
    CostModel costs{};
    StartMode start_mode = StartMode::Random;
    std::size_t fixed_start = 0;
};

struct EnvState {
    std::size_t t = 0;
    std::size_t start = 0;
    std::size_t cursor = 0;
    int position = 0;
    double agent_nav = 0.0;
    double market_nav = 0.0;
    std::size_t trade_count = 0;
    double cost_paid = 0.0;
    bool done = false;
};

struct StepInfo {
    int position = 0;
    std::size_t trade_count = 0; // cumulative unit position changes this episode
    double cost_paid = 0.0;      // cost charged on this step
    double market_return = 0.0;
};

struct StepResult {
    std::span<const double> observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

struct TraceRow {
    std::size_t step = 0;
    data::Date date;
    Action action = Action::Neutral;
    int position = 0;
    double market_return = 0.0;
    double cost = 0.0;
    double reward = 0.0;
    double agent_nav = 0.0;
    double market_nav = 0.0;
};

// Daily single-asset simulator. The action chosen after observing row k is
// settled with the traded asset's raw return on row k+1; NAVs are additive
// in log returns.
class TradingEnv {
public:
    // The frame must outlive the environment.
    TradingEnv(const data::FeatureFrame& frame, EnvConfig config);

    // Neutral position, zero NAVs; start row drawn uniformly from
    // [0, rows - 1 - T] in random mode.
    std::span<const double> reset(Rng& rng);
    std::span<const double> reset_at(std::size_t start);

    StepResult step(Action action);

    const EnvState& state() const noexcept { return state_; }
    const EnvConfig& config() const noexcept { return config_; }
    const data::FeatureFrame& frame() const noexcept { return *frame_; }
    const std::vector<TraceRow>& trace() const noexcept { return trace_; }

    // Largest admissible random start index.
    std::size_t max_start() const noexcept { return frame_->rows() - 1 - config_.episode_length; }

private:
    const data::FeatureFrame* frame_;
    EnvConfig config_;
    EnvState state_{};
    std::vector<TraceRow> trace_;
    bool started_ = false;
};

// Prefix sums of rewards and market returns.
std::pair<std::vector<double>, std::vector<double>> nav_curves(std::span<const TraceRow> trace);

// `step,date,action,position,market_return,cost,reward,agent_nav,market_nav`
void write_trace_csv(std::span<const TraceRow> trace, const std::filesystem::path& path);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

} // namespace ddqn::env
