#include "ddqn/errors.hpp"
#include "ddqn/training.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace ddqn;
using namespace ddqn::training;
using Catch::Approx;
using ddqn::testing::frame_from_returns;
using ddqn::testing::random_returns;

namespace {

TrainConfig quick(std::size_t episodes, std::size_t T = 20) {
    TrainConfig c;
    c.episodes = episodes;
    c.env.episode_length = T;
    c.env.costs = {0.0, 0.0};
    c.agent.batch_size = 16;
    c.agent.replay_capacity = 512;
    c.agent.target_sync_every = 10;
    c.agent.net.hidden_dims = {16, 16};
    c.seed = 11;
    return c;
}

std::vector<double> all_positive(std::size_t n) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = 0.001 + 0.0001 * static_cast<double>(i % 5);
    return r;
}

} // namespace

TEST_CASE("always long never beats the market in a rising tape") {
    const auto f = frame_from_returns(all_positive(100));
    TrainHooks hooks;
    hooks.policy = [](const StepContext&, std::span<const double>) { return env::Action::Long; };
    hooks.learn = false;
    const auto res = run_training(quick(30), f, hooks);
    CHECK(res.log.records.size() == 30);
    CHECK(res.log.termination.kind == Termination::Kind::Completed);
    CHECK(res.log.termination.describe() == "completed");
    for (const auto& r : res.log.records) {
        CHECK_FALSE(r.outperformed);
        CHECK(r.agent_nav == r.market_nav);
    }
}

TEST_CASE("a policy that peeks at the next return stops early after the streak") {
    const auto f = frame_from_returns(random_returns(200, 0.01, 3));
    TrainHooks hooks;
    hooks.learn = false;
    hooks.policy = [&](const StepContext& ctx, std::span<const double>) {
        const double next = f.target_returns[ctx.env->state().cursor + 1];
        return next > 0 ? env::Action::Long : env::Action::Short;
    };
    auto cfg = quick(100);
    const auto res = run_training(cfg, f, hooks);
    CHECK(res.log.records.size() == 25);
    CHECK(res.log.termination.kind == Termination::Kind::EarlyStop);
    CHECK(res.log.termination.episode == 25);
    CHECK(res.log.termination.describe() == "early_stop(25)");
}

TEST_CASE("a streak broken by one bad episode resets") {
    const auto f = frame_from_returns(random_returns(200, 0.01, 3));
    TrainHooks hooks;
    hooks.learn = false;
    hooks.policy = [&](const StepContext& ctx, std::span<const double>) {
        if (ctx.episode == 20) return env::Action::Long;
        const double next = f.target_returns[ctx.env->state().cursor + 1];
        return next > 0 ? env::Action::Long : env::Action::Short;
    };
    const auto res = run_training(quick(100), f, hooks);
    CHECK(res.log.termination.kind == Termination::Kind::EarlyStop);
    CHECK(res.log.termination.episode == 45);
}

TEST_CASE("training records one row per episode with the scheduled epsilon") {
    const auto f = frame_from_returns(random_returns(120, 0.01, 5));
    auto cfg = quick(3);
    cfg.early_stop_streak = 1000;
    const auto res = run_training(cfg, f);
    REQUIRE(res.log.records.size() == 3);
    const auto sched = agent::EpsilonSchedule::for_episodes(3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& r = res.log.records[i];
        CHECK(r.episode == i + 1);
        CHECK(r.epsilon == agent::epsilon_at(sched, i + 1));
        CHECK(r.steps == 20);
        CHECK(r.start_row <= 120 - 1 - 20);
    }
    CHECK(res.log.records.back().epsilon == 0.01);
    CHECK(res.log.total_env_steps() == 60);
    // Warmup of one batch (16) passes during episode 1: 20 - 16 + 1 steps learn.
    CHECK(res.log.records[0].gradient_steps == 5);
    CHECK(res.log.records[2].gradient_steps == 45);
    CHECK(res.agent.online().config.input_dim == 2);
}

TEST_CASE("outperformance moving average") {
    TrainLog log;
    const bool outcome[] = {true, false, true, true};
    for (std::size_t i = 0; i < 4; ++i) {
        EpisodeRecord r;
        r.episode = i + 1;
        r.outperformed = outcome[i];
        log.records.push_back(r);
    }
    const auto ma = outperformance_ma(log, 2);
    REQUIRE(ma.size() == 4);
    CHECK(ma[0] == 1.0);
    CHECK(ma[1] == 0.5);
    CHECK(ma[2] == 0.5);
    CHECK(ma[3] == 1.0);
    const auto wide = outperformance_ma(log, 50);
    CHECK(wide[3] == 0.75);
}

TEST_CASE("training is reproducible byte for byte") {
    const auto f = frame_from_returns(random_returns(150, 0.01, 8), 4);
    auto cfg = quick(4);
    cfg.env.costs = {1e-4, 1e-5};
    const auto a = run_training(cfg, f);
    const auto b = run_training(cfg, f);
    CHECK(log_csv(a.log) == log_csv(b.log));
    CHECK(log_csv(a.log).starts_with("episode,epsilon,agent_nav,market_nav,outperformed\n"));
    CHECK(a.agent.online().layers[0].weights == b.agent.online().layers[0].weights);

    cfg.seed = 12;
    const auto c = run_training(cfg, f);
    CHECK(log_csv(a.log) != log_csv(c.log));
    CHECK(config_hash(a.log.config_snapshot) != config_hash(c.log.config_snapshot));

    const auto summary = summary_json(a.log);
    CHECK(summary.find("\"termination\"") != std::string::npos);
    CHECK(summary.find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("invalid training configuration") {
    const auto f = frame_from_returns(random_returns(150, 0.01, 8));
    auto cfg = quick(0);
    CHECK_THROWS_AS(run_training(cfg, f), ConfigError);
    cfg = quick(2);
    cfg.agent.batch_size = 1024;
    CHECK_THROWS_AS(run_training(cfg, f), ConfigError);
}

TEST_CASE("checkpoint round trip and resume") {
    ddqn::testing::TempDir tmp("ckpt");
    const auto f = frame_from_returns(random_returns(150, 0.01, 8));
    auto res = run_training(quick(3), f);
    save_checkpoint(res.agent, tmp / "agent.json");
    auto back = load_checkpoint(tmp / "agent.json");

    CHECK(back.gradient_steps() == res.agent.gradient_steps());
    CHECK(back.buffer().size() == 0);
    Rng rng{3};
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> s{standard_normal(rng), standard_normal(rng)};
        const auto qa = nn::q_values(res.agent.online(), s);
        const auto qb = nn::q_values(back.online(), s);
        REQUIRE(qa == qb);
        REQUIRE(res.agent.greedy_action(s) == back.greedy_action(s));
        REQUIRE(nn::q_values(res.agent.target(), s) == nn::q_values(back.target(), s));
    }

    // Resuming from disk matches continuing in memory, given the same buffer and streams.
    auto refill = [](agent::Agent& a) {
        Rng r{21};
        for (int i = 0; i < 40; ++i) {
            const std::vector<double> s{standard_normal(r), standard_normal(r)};
            a.store(s, static_cast<env::Action>(uniform_index(r, 3)), 0.01 * standard_normal(r), s, false);
        }
    };
    agent::Agent fresh(res.agent.config(), res.agent.online(), res.agent.target(), res.agent.adam(),
                       res.agent.gradient_steps());
    refill(fresh);
    refill(back);
    Rng a1{5}, a2{6}, b1{5}, b2{6};
    fresh.train_step(a1, a2);
    back.train_step(b1, b2);
    CHECK(fresh.online().layers[0].weights == back.online().layers[0].weights);
    CHECK(fresh.adam().t == back.adam().t);
    CHECK(fresh.adam().v.layers[1].weights == back.adam().v.layers[1].weights);

    auto text = ddqn::testing::read_text(tmp / "agent.json");
    const std::string key = "\"version\": 1";
    const auto pos = text.find(key);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, key.size(), "\"version\": 2");
    ddqn::testing::write_text(tmp / "v2.json", text);
    CHECK_THROWS_AS(load_checkpoint(tmp / "v2.json"), VersionError);
    ddqn::testing::write_text(tmp / "bad.json", "[1,2");
    CHECK_THROWS_AS(load_checkpoint(tmp / "bad.json"), DataError);
}

TEST_CASE("training log CSV on disk") {
    ddqn::testing::TempDir tmp("log");
    const auto f = frame_from_returns(random_returns(150, 0.01, 8));
    const auto res = run_training(quick(2), f);
    write_log_csv(res.log, tmp / "log.csv");
    CHECK(ddqn::testing::read_text(tmp / "log.csv") == log_csv(res.log));
}
