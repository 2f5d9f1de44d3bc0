#include "ddqn/evaluation.hpp"

#include "ddqn/errors.hpp"
#include "text_util.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ddqn::eval {

namespace {

BacktestResult collect(const env::TradingEnv& environment) {
    BacktestResult out;
    out.trace = environment.trace();
    for (const auto& row : out.trace) {
        out.dates.push_back(row.date);
        out.actions.push_back(row.action);
        out.positions.push_back(row.position);
        out.rewards.push_back(row.reward);
        out.market_returns.push_back(row.market_return);
        out.agent_nav.push_back(row.agent_nav);
        out.market_nav.push_back(row.market_nav);
    }
    return out;
}

env::EnvConfig single_pass(const data::FeatureFrame& frame, const env::CostModel& costs) {
    if (frame.rows() < 2) throw DataError("backtest needs at least 2 frame rows");
    return {frame.rows() - 1, costs, env::StartMode::Fixed, 0};
}

} // namespace

BacktestResult run_policy(const Policy& policy, const data::FeatureFrame& frame, const env::CostModel& costs) {
    env::TradingEnv environment(frame, single_pass(frame, costs));
    auto obs = environment.reset_at(0);
    for (std::size_t step = 0; !environment.state().done; ++step) obs = environment.step(policy(step, obs)).observation;
    return collect(environment);
}

BacktestResult run_backtest(const agent::Agent& agent, const data::FeatureFrame& frame, const env::CostModel& costs) {
    if (frame.width() != agent.config().net.input_dim) {
        throw ConfigError("agent expects " + std::to_string(agent.config().net.input_dim) +
                          " features but the frame has " + std::to_string(frame.width()));
    }
    return run_policy([&](std::size_t, std::span<const double> obs) { return agent.greedy_action(obs); }, frame,
                      costs);
}

BacktestResult replay_actions(std::span<const Action> actions, const data::FeatureFrame& frame,
                              const env::CostModel& costs) {
    if (frame.rows() < 2 || actions.size() != frame.rows() - 1) {
        throw ConfigError("action sequence length must equal frame rows - 1");
    }
    return run_policy([&](std::size_t step, std::span<const double>) { return actions[step]; }, frame, costs);
}

Annualized annualized_metrics(std::span<const double> daily) {
    if (daily.size() < 2) throw DataError("annualized metrics need at least 2 observations");
    const double n = static_cast<double>(daily.size());
    const double mean = std::accumulate(daily.begin(), daily.end(), 0.0) / n;
    const auto [lo, hi] = std::ranges::minmax(daily);
    double var = 0.0;
    if (lo != hi) {
        for (const double x : daily) var += (x - mean) * (x - mean);
        var /= n - 1.0;
    }
    Annualized out;
    out.e_r = kTradingDaysPerYear * mean;
    out.std_r = std::sqrt(kTradingDaysPerYear * var);
    if (out.std_r > 0.0) out.sharpe = out.e_r / out.std_r;
    return out;
}

double total_reward(std::span<const Action> actions, std::span<const double> returns, const env::CostModel& costs,
                    int initial_position) {
    if (actions.size() != returns.size()) throw ConfigError("actions and returns differ in length");
    double total = 0.0;
    int pos = initial_position;
    for (std::size_t t = 0; t < actions.size(); ++t) {
        const int next = env::position_of(actions[t]);
        total += returns[t] * next - env::transition_cost(pos, next, costs);
        pos = next;
    }
    return total;
}

std::vector<Action> oracle_actions(std::span<const double> returns, const env::CostModel& costs,
                                   int initial_position) {
    if (initial_position < -1 || initial_position > 1) throw ConfigError("initial position must be -1, 0 or 1");
    const std::size_t T = returns.size();
    // Candidate order encodes the tie preference: Neutral, then Short, then Long.
    constexpr std::array<int, 3> order{0, -1, 1};
    auto slot = [](int pos) { return static_cast<std::size_t>(pos + 1); };

    std::array<double, 3> value_next{0.0, 0.0, 0.0};
    std::vector<std::array<int, 3>> choice(T);
    for (std::size_t t = T; t-- > 0;) {
        std::array<double, 3> value{};
        for (int prev = -1; prev <= 1; ++prev) {
            double best = 0.0;
            int best_pos = 0;
            bool first = true;
            for (const int p : order) {
                const double v = returns[t] * p - env::transition_cost(prev, p, costs) + value_next[slot(p)];
                if (first || v > best) {
                    best = v;
                    best_pos = p;
                    first = false;
                }
            }
            value[slot(prev)] = best;
            choice[t][slot(prev)] = best_pos;
        }
        value_next = value;
    }

    std::vector<Action> path;
    path.reserve(T);
    int pos = initial_position;
    for (std::size_t t = 0; t < T; ++t) {
        pos = choice[t][slot(pos)];
        path.push_back(static_cast<Action>(pos + 1));
    }
    return path;
}

ActionScore score_actions(std::span<const Action> actions, std::span<const Action> oracle) {
    if (actions.size() != oracle.size()) {
        throw ConfigError("cannot score " + std::to_string(actions.size()) + " actions against " +
                          std::to_string(oracle.size()) + " oracle actions");
    }
    if (actions.empty()) return {0.0, 1.0};
    double sq = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const double d = env::index_of(actions[i]) - env::index_of(oracle[i]);
        sq += d * d;
        hits += actions[i] == oracle[i] ? 1 : 0;
    }
    const double n = static_cast<double>(actions.size());
    return {sq / n, static_cast<double>(hits) / n};
}

Report build_report(std::span<const ModelResult> models, const env::CostModel& costs) {
    if (models.empty()) throw ConfigError("report needs at least one model result");
    const auto& ref = models.front().backtest;
    for (const auto& m : models) {
        if (m.backtest.dates != ref.dates) throw DataError("model '" + m.model + "' covers a different window");
    }
    const auto oracle = oracle_actions(ref.market_returns, costs);

    Report report;
    report.dates = ref.dates;
    for (const auto& m : models) {
        report.rows.push_back({m.model, annualized_metrics(m.backtest.rewards),
                               score_actions(m.backtest.actions, oracle), m.backtest.size()});
        report.nav_models.push_back(m.model);
        report.navs.push_back(m.backtest.agent_nav);
    }
    const std::vector<Action> always_long(ref.size(), Action::Long);
    report.rows.push_back(
        {"market", annualized_metrics(ref.market_returns), score_actions(always_long, oracle), ref.size()});
    report.nav_models.emplace_back("market");
    report.navs.push_back(ref.market_nav);
    return report;
}

std::string report_json(const Report& report) {
    std::ostringstream os;
    os << "{\n  \"rows\": [\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& r = report.rows[i];
        os << "    {\"accuracy\": " << util::fixed(r.score.accuracy) << ", \"e_r\": " << util::fixed(r.metrics.e_r)
           << ", \"model\": \"" << r.model << "\", \"mse\": " << util::fixed(r.score.mse)
           << ", \"n_days\": " << r.n_days
           << ", \"sharpe\": " << (r.metrics.sharpe ? util::fixed(*r.metrics.sharpe) : std::string("null"))
           << ", \"std_r\": " << util::fixed(r.metrics.std_r) << "}" << (i + 1 < report.rows.size() ? "," : "")
           << "\n";
    }
    os << "  ]\n}\n";
    return os.str();
}

std::string nav_curves_csv(const Report& report) {
    std::ostringstream os;
    os << "date,model,nav\n";
    for (std::size_t m = 0; m < report.nav_models.size(); ++m) {
        for (std::size_t i = 0; i < report.dates.size(); ++i) {
            os << data::format_date(report.dates[i]) << ',' << report.nav_models[m] << ','
               << util::fixed(report.navs[m][i]) << '\n';
        }
    }
    return os.str();
}

void emit_report(const Report& report, const std::filesystem::path& json_path,
                 const std::filesystem::path& nav_csv_path) {
    util::write_file(json_path, report_json(report));
    util::write_file(nav_csv_path, nav_curves_csv(report));
}

} // namespace ddqn::eval
