#pragma once

#include "ddqn/agent.hpp"
#include "ddqn/market_data.hpp"
#include "ddqn/trading_env.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ddqn::training {

struct TrainConfig {
    std::size_t episodes = 1000;
    env::EnvConfig env{};
    agent::AgentConfig agent{};
    std::optional<agent::EpsilonSchedule> schedule; // defaults to EpsilonSchedule::for_episodes(episodes)
    std::size_t early_stop_streak = 25;
    std::size_t ma_window = 50;
    std::uint64_t seed = 0;

    agent::EpsilonSchedule resolved_schedule() const;
    void validate() const;
};

struct EpisodeRecord {
    std::size_t episode = 0; // 1-based
    double epsilon = 0.0;
    double agent_nav = 0.0;
    double market_nav = 0.0;
    bool outperformed = false; // agent_nav > market_nav, strictly
    std::size_t steps = 0;
    std::uint64_t gradient_steps = 0; // cumulative
    std::size_t start_row = 0;
    double mean_loss = 0.0; // over non-skipped train steps of the episode
};

struct Termination {
    enum class Kind { Completed, EarlyStop };
    Kind kind = Kind::Completed;
    std::size_t episode = 0; // last episode run

    std::string describe() const;
};

struct TrainLog {
    std::vector<EpisodeRecord> records;
    Termination termination;
    std::string config_snapshot;
    double wall_seconds = 0.0;

    std::size_t total_env_steps() const;
};

struct StepContext {
    std::size_t episode = 0;
    std::size_t t = 0;
    double epsilon = 0.0;
    const env::TradingEnv* env = nullptr;
};

// Replaces the agent's epsilon-greedy choice; used for scripted baselines.
using ActionOverride = std::function<env::Action(const StepContext&, std::span<const double> observation)>;

struct TrainHooks {
    ActionOverride policy;
    bool learn = true; // store transitions and run train steps
    std::function<void(const EpisodeRecord&)> on_episode;
};

struct TrainResult {
    TrainLog log;
    agent::Agent agent;
};

// Runs episodes of T steps from random starts in the frame until all
// episodes are done or the agent beats the market early_stop_streak
// episodes in a row. Deterministic for a given (config, frame).
TrainResult run_training(const TrainConfig& config, const data::FeatureFrame& train_frame,
                         const TrainHooks& hooks = {});

// Element k = share of outperforming episodes among the last `window`
// episodes ending at k (fewer at the start).
std::vector<double> outperformance_ma(const TrainLog& log, std::size_t window = 50);

// `episode,epsilon,agent_nav,market_nav,outperformed`
std::string log_csv(const TrainLog& log);
void write_log_csv(const TrainLog& log, const std::filesystem::path& path);
std::string summary_json(const TrainLog& log);

std::string config_snapshot(const TrainConfig& config);
std::string config_hash(const std::string& snapshot);

inline constexpr int kAgentFormatVersion = 1;

// Networks, Adam state and counters; the replay buffer is not saved, so a
// resumed agent starts with an empty buffer.
void save_checkpoint(const agent::Agent& agent, const std::filesystem::path& path);
agent::Agent load_checkpoint(const std::filesystem::path& path);

} // namespace ddqn::training
