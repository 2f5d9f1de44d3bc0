#pragma once

#include "ddqn/neural_net.hpp"
#include "ddqn/rng.hpp"
#include "ddqn/trading_env.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ddqn::agent {

using env::Action;

// Linear from eps_start to eps_knee over [0, linear_until), then geometric
// decay reaching eps_end exactly at total_episodes.
struct EpsilonSchedule {
    double eps_start = 1.0;
    double eps_knee = 0.1;
    double eps_end = 0.01;
    std::size_t linear_until = 500;
    std::size_t total_episodes = 1000;

    static EpsilonSchedule for_episodes(std::size_t total_episodes);
    void validate() const;
};

double epsilon_at(const EpsilonSchedule& schedule, std::size_t episode);

struct Transition {
    std::vector<double> state;
    Action action = Action::Neutral;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

// Fixed-capacity ring of transitions; the oldest entry is overwritten once full.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t state_dim);

    void store(std::span<const double> state, Action action, double reward, std::span<const double> next_state,
               bool done);
    void store(const Transition& t) { store(t.state, t.action, t.reward, t.next_state, t.done); }

    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t state_dim() const noexcept { return dim_; }

    // Entry i in insertion order, 0 = oldest still held.
    Transition at(std::size_t i) const;

    // Slot indices drawn uniformly with replacement.
    std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

    struct Batch {
        nn::Matrix states;
        std::vector<std::uint8_t> actions;
        std::vector<double> rewards;
        nn::Matrix next_states;
        std::vector<std::uint8_t> dones;

        std::size_t size() const noexcept { return rewards.size(); }
    };

    Batch gather(std::span<const std::size_t> slots) const;
    Batch sample(std::size_t batch_size, Rng& rng) const { return gather(sample_indices(batch_size, rng)); }

private:
    std::size_t capacity_;
    std::size_t dim_;
    std::size_t size_ = 0;
    std::size_t cursor_ = 0;
    std::vector<double> states_;
    std::vector<double> next_states_;
    std::vector<std::uint8_t> actions_;
    std::vector<double> rewards_;
    std::vector<std::uint8_t> dones_;
};

enum class SyncUnit { GradientSteps, Episodes };

struct AgentConfig {
    double gamma = 0.9;
    double lr = 1e-4;
    std::size_t batch_size = 4096;
    std::size_t replay_capacity = 1'000'000;
    std::size_t target_sync_every = 100;
    SyncUnit sync_unit = SyncUnit::GradientSteps;
    std::optional<std::size_t> warmup; // defaults to batch_size
    nn::NetConfig net{};

    std::size_t warmup_size() const noexcept { return warmup.value_or(batch_size); }
    void validate() const;
};

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(const Eigen::RowVectorXd& q);

struct TrainStepResult {
    bool skipped = true;
    double loss = 0.0;
    bool synced = false;
};

class Agent {
public:
    explicit Agent(AgentConfig config);
    Agent(AgentConfig config, nn::NetParams online, nn::NetParams target, nn::AdamState adam,
          std::uint64_t gradient_steps);

    // Epsilon-greedy over eval-mode Q-values. One uniform draw decides
    // exploration; a second picks the random action.
    Action select_action(std::span<const double> observation, double epsilon, Rng& rng) const;
    Action greedy_action(std::span<const double> observation) const;

    void store(std::span<const double> state, Action action, double reward, std::span<const double> next_state,
               bool done) {
        buffer_.store(state, action, reward, next_state, done);
    }

    // y = r + gamma * Q_target(s', argmax_a Q_online(s', a)), or y = r when done.
    std::vector<double> compute_targets(const ReplayBuffer::Batch& batch) const;

    // Skipped until the buffer holds warmup transitions; otherwise one Adam
    // step on a sampled batch, followed by a target sync every
    // target_sync_every gradient steps.
    TrainStepResult train_step(Rng& replay_rng, Rng& dropout_rng);

    // Copies online weights into the target network.
    void sync_target() { target_ = online_; }

    // Episode-unit sync hook used when sync_unit == Episodes.
    void end_episode(std::size_t episodes_done);

    const AgentConfig& config() const noexcept { return config_; }
    const nn::NetParams& online() const noexcept { return online_; }
    const nn::NetParams& target() const noexcept { return target_; }
    const nn::AdamState& adam() const noexcept { return adam_; }
    const ReplayBuffer& buffer() const noexcept { return buffer_; }
    ReplayBuffer& buffer() noexcept { return buffer_; }
    std::uint64_t gradient_steps() const noexcept { return gradient_steps_; }

    nn::NetParams& mutable_online() noexcept { return online_; }
    nn::NetParams& mutable_target() noexcept { return target_; }

private:
    AgentConfig config_;
    nn::NetParams online_;
    nn::NetParams target_;
    nn::AdamState adam_;
    ReplayBuffer buffer_;
    std::uint64_t gradient_steps_ = 0;
};

// Double-Q and max-form targets evaluated directly from two networks; used by
// tests and diagnostics.
std::vector<double> double_q_targets(const nn::NetParams& online, const nn::NetParams& target,
                                     const ReplayBuffer::Batch& batch, double gamma);
std::vector<double> max_q_targets(const nn::NetParams& target, const ReplayBuffer::Batch& batch, double gamma);

} // namespace ddqn::agent
