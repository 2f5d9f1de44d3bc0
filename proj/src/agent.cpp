#include "ddqn/agent.hpp"

#include "ddqn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ddqn::agent {

EpsilonSchedule EpsilonSchedule::for_episodes(std::size_t total_episodes) {
    EpsilonSchedule s;
    s.total_episodes = total_episodes;
    s.linear_until = total_episodes / 2;
    return s;
}

void EpsilonSchedule::validate() const {
    if (!(eps_start >= eps_knee && eps_knee >= eps_end && eps_end > 0.0 && eps_start <= 1.0)) {
        throw ConfigError("epsilon schedule needs 1 >= eps_start >= eps_knee >= eps_end > 0");
    }
    if (linear_until > total_episodes) throw ConfigError("epsilon linear phase exceeds the episode count");
}

double epsilon_at(const EpsilonSchedule& s, std::size_t episode) {
    if (episode >= s.total_episodes) return s.eps_end;
    double eps;
    if (episode < s.linear_until) {
        const double frac = static_cast<double>(episode) / static_cast<double>(s.linear_until);
        eps = s.eps_start + (s.eps_knee - s.eps_start) * frac;
    } else {
        const double span = static_cast<double>(s.total_episodes - s.linear_until);
        const double frac = static_cast<double>(episode - s.linear_until) / span;
        eps = s.eps_knee * std::pow(s.eps_end / s.eps_knee, frac);
    }
    return std::clamp(eps, s.eps_end, s.eps_start);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim) : capacity_(capacity), dim_(state_dim) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    if (state_dim == 0) throw ConfigError("replay state width must be positive");
}

void ReplayBuffer::store(std::span<const double> state, Action action, double reward,
                         std::span<const double> next_state, bool done) {
    if (state.size() != dim_ || next_state.size() != dim_) {
        throw ConfigError("transition width does not match replay buffer width " + std::to_string(dim_));
    }
    if (size_ < capacity_) {
        states_.insert(states_.end(), state.begin(), state.end());
        next_states_.insert(next_states_.end(), next_state.begin(), next_state.end());
        actions_.push_back(static_cast<std::uint8_t>(action));
        rewards_.push_back(reward);
        dones_.push_back(done ? 1 : 0);
        ++size_;
        cursor_ = size_ % capacity_;
        return;
    }
    std::ranges::copy(state, states_.begin() + static_cast<std::ptrdiff_t>(cursor_ * dim_));
    std::ranges::copy(next_state, next_states_.begin() + static_cast<std::ptrdiff_t>(cursor_ * dim_));
    actions_[cursor_] = static_cast<std::uint8_t>(action);
    rewards_[cursor_] = reward;
    dones_[cursor_] = done ? 1 : 0;
    cursor_ = (cursor_ + 1) % capacity_;
}

Transition ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw StateError("replay index out of range");
    const std::size_t slot = size_ < capacity_ ? i : (cursor_ + i) % capacity_;
    const auto first = states_.begin() + static_cast<std::ptrdiff_t>(slot * dim_);
    const auto next_first = next_states_.begin() + static_cast<std::ptrdiff_t>(slot * dim_);
    return {{first, first + static_cast<std::ptrdiff_t>(dim_)},
            static_cast<Action>(actions_[slot]),
            rewards_[slot],
            {next_first, next_first + static_cast<std::ptrdiff_t>(dim_)},
            dones_[slot] != 0};
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (size_ < batch_size) {
        throw StateError("replay holds " + std::to_string(size_) + " transitions, batch needs " +
                         std::to_string(batch_size));
    }
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, size_));
    return idx;
}

ReplayBuffer::Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
    Batch b;
    const auto n = static_cast<Eigen::Index>(slots.size());
    const auto d = static_cast<Eigen::Index>(dim_);
    b.states.resize(n, d);
    b.next_states.resize(n, d);
    b.actions.reserve(slots.size());
    b.rewards.reserve(slots.size());
    b.dones.reserve(slots.size());
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t slot = slots[static_cast<std::size_t>(r)];
        if (slot >= size_) throw StateError("replay slot out of range");
        for (Eigen::Index c = 0; c < d; ++c) {
            b.states(r, c) = states_[slot * dim_ + static_cast<std::size_t>(c)];
            b.next_states(r, c) = next_states_[slot * dim_ + static_cast<std::size_t>(c)];
        }
        b.actions.push_back(actions_[slot]);
        b.rewards.push_back(rewards_[slot]);
        b.dones.push_back(dones_[slot]);
    }
    return b;
}

void AgentConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("discount factor must lie in [0, 1]");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (target_sync_every == 0) throw ConfigError("target sync interval must be >= 1");
    if (batch_size > replay_capacity) throw ConfigError("batch size exceeds replay capacity");
    if (warmup_size() < batch_size) throw ConfigError("warmup must hold at least one batch");
    if (net.output_dim != env::kActionCount) throw ConfigError("Q-network must have one output per action");
    net.validate();
}

std::size_t argmax(const Eigen::RowVectorXd& q) {
    std::size_t best = 0;
    for (Eigen::Index a = 1; a < q.size(); ++a)
        if (q(a) > q(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(a);
    return best;
}

Agent::Agent(AgentConfig config)
    : config_(config),
      online_((config_.validate(), nn::init(config_.net))),
      target_(online_),
      adam_(nn::adam_init(config_.net)),
      buffer_(config_.replay_capacity, config_.net.input_dim) {}

Agent::Agent(AgentConfig config, nn::NetParams online, nn::NetParams target, nn::AdamState adam,
             std::uint64_t gradient_steps)
    : config_(config),
      online_(std::move(online)),
      target_(std::move(target)),
      adam_(std::move(adam)),
      buffer_(config_.replay_capacity, config_.net.input_dim),
      gradient_steps_(gradient_steps) {
    config_.validate();
    if (!online_.config.same_shape(config_.net) || !target_.config.same_shape(config_.net)) {
        throw ConfigError("online/target network shapes do not match the agent configuration");
    }
}

Action Agent::greedy_action(std::span<const double> observation) const {
    return static_cast<Action>(argmax(nn::q_values(online_, observation)));
}

Action Agent::select_action(std::span<const double> observation, double epsilon, Rng& rng) const {
    if (observation.size() != config_.net.input_dim) {
        throw ConfigError("observation width " + std::to_string(observation.size()) +
                          " does not match network input width " + std::to_string(config_.net.input_dim));
    }
    if (uniform01(rng) < epsilon) return static_cast<Action>(uniform_index(rng, env::kActionCount));
    return greedy_action(observation);
}

std::vector<double> double_q_targets(const nn::NetParams& online, const nn::NetParams& target,
                                     const ReplayBuffer::Batch& batch, double gamma) {
    const auto q_online = nn::forward(online, batch.next_states, nn::Mode::Eval).q;
    const auto q_target = nn::forward(target, batch.next_states, nn::Mode::Eval).q;
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch.dones[i]) {
            y[i] = batch.rewards[i];
            continue;
        }
        const auto r = static_cast<Eigen::Index>(i);
        const auto best = static_cast<Eigen::Index>(argmax(q_online.row(r)));
        y[i] = batch.rewards[i] + gamma * q_target(r, best);
    }
    return y;
}

std::vector<double> max_q_targets(const nn::NetParams& target, const ReplayBuffer::Batch& batch, double gamma) {
    const auto q_target = nn::forward(target, batch.next_states, nn::Mode::Eval).q;
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        y[i] = batch.dones[i] ? batch.rewards[i]
                              : batch.rewards[i] + gamma * q_target.row(static_cast<Eigen::Index>(i)).maxCoeff();
    }
    return y;
}

std::vector<double> Agent::compute_targets(const ReplayBuffer::Batch& batch) const {
    return double_q_targets(online_, target_, batch, config_.gamma);
}

TrainStepResult Agent::train_step(Rng& replay_rng, Rng& dropout_rng) {
    if (buffer_.size() < config_.warmup_size()) return {};
    const auto batch = buffer_.sample(config_.batch_size, replay_rng);
    const auto targets = compute_targets(batch);
    auto result = nn::loss_and_grads(online_, batch.states, batch.actions, targets, &dropout_rng);
    nn::adam_step(online_, result.grads, adam_, config_.lr);
    if (!online_.all_finite()) {
        throw NumericError("online network diverged at gradient step " + std::to_string(gradient_steps_ + 1));
    }
    ++gradient_steps_;
    TrainStepResult out{false, result.loss, false};
    if (config_.sync_unit == SyncUnit::GradientSteps && gradient_steps_ % config_.target_sync_every == 0) {
        sync_target();
        out.synced = true;
    }
    return out;
}

void Agent::end_episode(std::size_t episodes_done) {
    if (config_.sync_unit == SyncUnit::Episodes && episodes_done % config_.target_sync_every == 0) sync_target();
}

} // namespace ddqn::agent
