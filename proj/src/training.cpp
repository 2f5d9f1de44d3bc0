#include "ddqn/training.hpp"

#include "ddqn/errors.hpp"
#include "json_codec.hpp"
#include "text_util.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace ddqn::training {

using codec::json;

agent::EpsilonSchedule TrainConfig::resolved_schedule() const {
    return schedule.value_or(agent::EpsilonSchedule::for_episodes(episodes));
}

void TrainConfig::validate() const {
    if (episodes < 1) throw ConfigError("episode count must be >= 1");
    if (early_stop_streak < 1) throw ConfigError("early-stop streak must be >= 1");
    if (ma_window < 1) throw ConfigError("moving-average window must be >= 1");
    if (env.episode_length < 1) throw ConfigError("episode length must be >= 1");
    agent.validate();
    resolved_schedule().validate();
}

std::string Termination::describe() const {
    return kind == Kind::Completed ? "completed" : "early_stop(" + std::to_string(episode) + ")";
}

std::size_t TrainLog::total_env_steps() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.steps;
    return n;
}

TrainResult run_training(const TrainConfig& config_in, const data::FeatureFrame& train_frame,
                         const TrainHooks& hooks) {
    TrainConfig config = config_in;
    config.agent.net.input_dim = train_frame.width();
    config.agent.net.seed = config.seed;
    config.validate();

    const auto started = std::chrono::steady_clock::now();
    const auto schedule = config.resolved_schedule();

    env::TradingEnv environment(train_frame, config.env);
    agent::Agent learner(config.agent);

    Rng env_rng = make_stream(config.seed, Stream::EnvStart);
    Rng explore_rng = make_stream(config.seed, Stream::Exploration);
    Rng dropout_rng = make_stream(config.seed, Stream::Dropout);
    Rng replay_rng = make_stream(config.seed, Stream::Replay);

    TrainLog log;
    log.config_snapshot = config_snapshot(config);
    log.records.reserve(config.episodes);

    std::size_t streak = 0;
    for (std::size_t episode = 1; episode <= config.episodes; ++episode) {
        const double eps = agent::epsilon_at(schedule, episode);
        auto obs = environment.reset(env_rng);
        EpisodeRecord rec;
        rec.episode = episode;
        rec.epsilon = eps;
        rec.start_row = environment.state().start;

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        try {
            while (!environment.state().done) {
                const StepContext ctx{episode, environment.state().t, eps, &environment};
                const env::Action action =
                    hooks.policy ? hooks.policy(ctx, obs) : learner.select_action(obs, eps, explore_rng);
                const auto result = environment.step(action);
                if (hooks.learn) {
                    learner.store(obs, action, result.reward, result.observation, result.done);
                    const auto ts = learner.train_step(replay_rng, dropout_rng);
                    if (!ts.skipped) {
                        loss_sum += ts.loss;
                        ++loss_count;
                    }
                }
                obs = result.observation;
            }
        } catch (const NumericError& e) {
            throw NumericError("training aborted in episode " + std::to_string(episode) + ": " + e.what());
        }
        learner.end_episode(episode);

        const auto& st = environment.state();
        rec.agent_nav = st.agent_nav;
        rec.market_nav = st.market_nav;
        rec.outperformed = st.agent_nav > st.market_nav;
        rec.steps = st.t;
        rec.gradient_steps = learner.gradient_steps();
        rec.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        log.records.push_back(rec);
        if (hooks.on_episode) hooks.on_episode(rec);

        streak = rec.outperformed ? streak + 1 : 0;
        log.termination.episode = episode;
        if (streak >= config.early_stop_streak) {
            log.termination.kind = Termination::Kind::EarlyStop;
            break;
        }
    }

    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(log), std::move(learner)};
}

std::vector<double> outperformance_ma(const TrainLog& log, std::size_t window) {
    if (window < 1) throw ConfigError("moving-average window must be >= 1");
    std::vector<double> out;
    out.reserve(log.records.size());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        hits += log.records[k].outperformed ? 1 : 0;
        if (k >= window && log.records[k - window].outperformed) --hits;
        const std::size_t n = std::min(k + 1, window);
        out.push_back(static_cast<double>(hits) / static_cast<double>(n));
    }
    return out;
}

std::string log_csv(const TrainLog& log) {
    std::ostringstream os;
    os << "episode,epsilon,agent_nav,market_nav,outperformed\n";
    for (const auto& r : log.records) {
        os << r.episode << ',' << util::exact(r.epsilon) << ',' << util::exact(r.agent_nav) << ','
           << util::exact(r.market_nav) << ',' << (r.outperformed ? 1 : 0) << '\n';
    }
    return os.str();
}

void write_log_csv(const TrainLog& log, const std::filesystem::path& path) { util::write_file(path, log_csv(log)); }

std::string summary_json(const TrainLog& log) {
    const auto ma = outperformance_ma(log, 50);
    json j{{"termination", log.termination.describe()},
           {"episodes_run", log.records.size()},
           {"env_steps", log.total_env_steps()},
           {"gradient_steps", log.records.empty() ? 0 : log.records.back().gradient_steps},
           {"final_outperformance_ma", ma.empty() ? 0.0 : ma.back()},
           {"wall_seconds", log.wall_seconds},
           {"config_hash", config_hash(log.config_snapshot)}};
    return j.dump(2) + "\n";
}

std::string config_snapshot(const TrainConfig& c) {
    const auto s = c.resolved_schedule();
    std::ostringstream os;
    os << "episodes=" << c.episodes << '\n'
       << "episode_length=" << c.env.episode_length << '\n'
       << "trading_cost=" << util::exact(c.env.costs.trading_cost) << '\n'
       << "time_cost=" << util::exact(c.env.costs.time_cost) << '\n'
       << "gamma=" << util::exact(c.agent.gamma) << '\n'
       << "lr=" << util::exact(c.agent.lr) << '\n'
       << "batch_size=" << c.agent.batch_size << '\n'
       << "replay_capacity=" << c.agent.replay_capacity << '\n'
       << "target_sync_every=" << c.agent.target_sync_every << '\n'
       << "sync_unit=" << (c.agent.sync_unit == agent::SyncUnit::GradientSteps ? "steps" : "episodes") << '\n'
       << "warmup=" << c.agent.warmup_size() << '\n'
       << "input_dim=" << c.agent.net.input_dim << '\n'
       << "dropout=" << util::exact(c.agent.net.dropout_rate) << '\n'
       << "l2_activity=" << util::exact(c.agent.net.l2_activity) << '\n'
       << "eps_linear_until=" << s.linear_until << '\n'
       << "early_stop_streak=" << c.early_stop_streak << '\n'
       << "seed=" << c.seed << '\n';
    return os.str();
}

std::string config_hash(const std::string& snapshot) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : snapshot) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_checkpoint(const agent::Agent& a, const std::filesystem::path& path) {
    const auto& c = a.config();
    json j;
    j["format"] = "ddqn-agent";
    j["version"] = kAgentFormatVersion;
    j["agent"] = {{"gamma", c.gamma},
                  {"lr", c.lr},
                  {"batch_size", c.batch_size},
                  {"replay_capacity", c.replay_capacity},
                  {"target_sync_every", c.target_sync_every},
                  {"sync_unit", c.sync_unit == agent::SyncUnit::GradientSteps ? "steps" : "episodes"},
                  {"warmup", c.warmup_size()}};
    j["net"] = codec::to_json(c.net);
    j["online"] = codec::layers_to_json(a.online());
    j["target"] = codec::layers_to_json(a.target());
    j["adam"] = codec::to_json(a.adam());
    j["gradient_steps"] = a.gradient_steps();
    util::write_file(path, j.dump(1));
}

agent::Agent load_checkpoint(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": corrupt checkpoint (" + e.what() + ")");
    }
    if (!j.is_object() || j.value("format", "") != "ddqn-agent") {
        throw VersionError(path.string() + ": not an agent checkpoint");
    }
    if (!j.contains("version") || j["version"] != kAgentFormatVersion) {
        throw VersionError(path.string() + ": unsupported checkpoint version " +
                           (j.contains("version") ? j["version"].dump() : std::string("<missing>")) + ", expected " +
                           std::to_string(kAgentFormatVersion));
    }
    try {
        agent::AgentConfig c;
        const auto& ja = j.at("agent");
        c.gamma = ja.at("gamma").get<double>();
        c.lr = ja.at("lr").get<double>();
        c.batch_size = ja.at("batch_size").get<std::size_t>();
        c.replay_capacity = ja.at("replay_capacity").get<std::size_t>();
        c.target_sync_every = ja.at("target_sync_every").get<std::size_t>();
        c.sync_unit = ja.at("sync_unit").get<std::string>() == "episodes" ? agent::SyncUnit::Episodes
                                                                          : agent::SyncUnit::GradientSteps;
        c.warmup = ja.at("warmup").get<std::size_t>();
        c.net = codec::net_config_from_json(j.at("net"));
        auto online = codec::params_from_json(j.at("online"), c.net);
        auto target = codec::params_from_json(j.at("target"), c.net);
        auto adam = codec::adam_from_json(j.at("adam"), c.net);
        return agent::Agent(c, std::move(online), std::move(target), std::move(adam),
                            j.at("gradient_steps").get<std::uint64_t>());
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": corrupt checkpoint (" + e.what() + ")");
    }
}

} // namespace ddqn::training
