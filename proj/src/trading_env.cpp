#include "ddqn/trading_env.hpp"

#include "ddqn/errors.hpp"
#include "text_util.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace ddqn::env {

Action action_from_index(int index) {
    if (index < 0 || index > 2) throw ConfigError("action index must be 0, 1 or 2, got " + std::to_string(index));
    return static_cast<Action>(index);
}

std::string_view action_name(Action a) {
    switch (a) {
    case Action::Short: return "short";
    case Action::Neutral: return "neutral";
    case Action::Long: return "long";
    }
    return "?";
}

CostModel cost_preset(std::string_view name) {
    if (name == "paper") return {1e-4, 1e-5};
    if (name == "none") return {0.0, 0.0};
    if (name == "high") return {1e-3, 1e-4};
    throw ConfigError("unknown cost preset '" + std::string(name) + "' (paper|none|high)");
}

double transition_cost(int from_position, int to_position, const CostModel& costs) noexcept {
    const int trades = std::abs(to_position - from_position);
    return trades > 0 ? trades * costs.trading_cost : costs.time_cost;
}

TradingEnv::TradingEnv(const data::FeatureFrame& frame, EnvConfig config)
    : frame_(&frame), config_(config) {
    if (config_.episode_length < 1) throw ConfigError("episode length must be >= 1");
    if (config_.costs.trading_cost < 0.0 || config_.costs.time_cost < 0.0) {
        throw ConfigError("trading and time costs must be >= 0");
    }
    if (frame.rows() < config_.episode_length + 1) {
        throw DataError("frame of " + std::to_string(frame.rows()) + " rows is too short for " +
                        std::to_string(config_.episode_length) + "-step episodes");
    }
}

std::span<const double> TradingEnv::reset(Rng& rng) {
    if (config_.start_mode == StartMode::Fixed) return reset_at(config_.fixed_start);
    return reset_at(static_cast<std::size_t>(uniform_index(rng, max_start() + 1)));
}

std::span<const double> TradingEnv::reset_at(std::size_t start) {
    if (start > max_start()) {
        throw ConfigError("start row " + std::to_string(start) + " leaves fewer than " +
                          std::to_string(config_.episode_length) + " steps");
    }
    state_ = EnvState{};
    state_.start = start;
    state_.cursor = start;
    trace_.clear();
    trace_.reserve(config_.episode_length);
    started_ = true;
    return frame_->row(start);
}

StepResult TradingEnv::step(Action action) {
    if (!started_) throw StateError("step called before reset");
    if (state_.done) throw StateError("step called on a finished episode");

    const int new_position = position_of(action);
    const int trades = std::abs(new_position - state_.position);
    const double cost = transition_cost(state_.position, new_position, config_.costs);
    const double market_return = frame_->target_returns[state_.cursor + 1];
    const double reward = market_return * new_position - cost;
    if (!std::isfinite(reward)) throw NumericError("non-finite reward at row " + std::to_string(state_.cursor + 1));

    state_.position = new_position;
    state_.trade_count += static_cast<std::size_t>(trades);
    state_.cost_paid += cost;
    state_.agent_nav += reward;
    state_.market_nav += market_return;
    ++state_.cursor;
    ++state_.t;
    state_.done = state_.t == config_.episode_length;

    trace_.push_back({state_.t, frame_->dates[state_.cursor], action, new_position, market_return, cost, reward,
                      state_.agent_nav, state_.market_nav});

    return {frame_->row(state_.cursor), reward, state_.done,
            StepInfo{new_position, state_.trade_count, cost, market_return}};
}

std::pair<std::vector<double>, std::vector<double>> nav_curves(std::span<const TraceRow> trace) {
    std::vector<double> agent, market;
    agent.reserve(trace.size());
    market.reserve(trace.size());
    double a = 0.0, m = 0.0;
    for (const auto& row : trace) {
        a += row.reward;
        m += row.market_return;
        agent.push_back(a);
        market.push_back(m);
    }
    return {std::move(agent), std::move(market)};
}

void write_trace_csv(std::span<const TraceRow> trace, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "step,date,action,position,market_return,cost,reward,agent_nav,market_nav\n";
    for (const auto& r : trace) {
        os << r.step << ',' << data::format_date(r.date) << ',' << index_of(r.action) << ',' << r.position << ','
           << util::exact(r.market_return) << ',' << util::exact(r.cost) << ',' << util::exact(r.reward) << ','
           << util::exact(r.agent_nav) << ',' << util::exact(r.market_nav) << '\n';
    }
    util::write_file(path, os.str());
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
    std::istringstream in(util::read_file(path));
    std::string line;
    if (!std::getline(in, line) || util::strip_cr(line) != "step,date,action,position,market_return,cost,reward,agent_nav,market_nav") {
        throw DataError(path.string() + ": not an episode trace CSV");
    }
    std::vector<TraceRow> out;
    while (std::getline(in, line)) {
        const auto s = util::strip_cr(line);
        if (util::trim(s).empty()) continue;
        std::vector<std::string_view> f;
        std::size_t start = 0;
        while (true) {
            const auto pos = s.find(',', start);
            f.push_back(s.substr(start, pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        TraceRow r;
        int action = 0;
        if (f.size() != 9 || !util::parse_int(f[0], r.step) || !util::parse_int(f[2], action) ||
            !util::parse_int(f[3], r.position) || !util::parse_double(f[4], r.market_return) ||
            !util::parse_double(f[5], r.cost) || !util::parse_double(f[6], r.reward) ||
            !util::parse_double(f[7], r.agent_nav) || !util::parse_double(f[8], r.market_nav)) {
            throw DataError(path.string() + ": malformed trace row '" + std::string(s) + "'");
        }
        r.date = data::parse_date(f[1]);
        r.action = action_from_index(action);
        out.push_back(r);
    }
    return out;
}

} // namespace ddqn::env
