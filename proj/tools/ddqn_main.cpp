// ddqn: prepare data, generate synthetic markets, train and evaluate the
// double deep Q-network trading agent.

#include "ddqn/cli.hpp"
#include "ddqn/errors.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace ddqn::cli;

    CLI::App app{"Double deep Q-network single-asset trading engine"};
    app.fallthrough();
    app.require_subcommand(1, 1);

    std::string config_path;
    Overrides overrides;
    std::uint64_t seed = 0;
    int model = 0;
    std::string costs, out, checkpoint;

    app.add_option("--config", config_path, "Flat key = value config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Master random seed");
    auto* model_opt = app.add_option("--model", model, "Feature model 0..3")->check(CLI::Range(0, 3));
    auto* costs_opt =
        app.add_option("--costs", costs, "Cost preset")->check(CLI::IsMember({"paper", "none", "high"}));
    auto* out_opt = app.add_option("--out", out, "Output directory");
    auto* ckpt_opt = app.add_option("--checkpoint", checkpoint, "Agent checkpoint for evaluate");
    app.add_flag("--force", overrides.force, "Overwrite existing outputs");

    app.add_subcommand("synth", "Write synthetic price CSVs for all four assets");
    app.add_subcommand("prepare", "Build and split feature frames");
    app.add_subcommand("train", "Train the agent on the train window");
    app.add_subcommand("evaluate", "Backtest a checkpoint on the test window and write the report");
    app.add_subcommand("report", "Combine backtest traces of several runs into one report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigFailure;
    }

    if (*seed_opt) overrides.seed = seed;
    if (*model_opt) overrides.model = model;
    if (*costs_opt) overrides.costs = costs;
    if (*out_opt) overrides.out = out;
    if (*ckpt_opt) overrides.checkpoint = checkpoint;

    RunConfig config;
    try {
        if (!config_path.empty()) config = load_config(config_path);
        apply(config, overrides);
    } catch (const ddqn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigFailure;
    }
    return run_command(app.get_subcommands().front()->get_name(), config);
}
