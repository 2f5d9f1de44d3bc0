#include "ddqn/cli.hpp"

#include "ddqn/errors.hpp"
#include "json_codec.hpp"
#include "text_util.hpp"

#include <functional>
#include <iostream>
#include <sstream>

namespace ddqn::cli {

namespace fs = std::filesystem;
using codec::json;

namespace {

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    bool ok;
    if constexpr (std::is_floating_point_v<T>) {
        ok = util::parse_double(value, out) && std::isfinite(out);
    } else {
        ok = util::parse_int(value, out);
    }
    if (!ok) throw ConfigError("config key '" + std::string(key) + "': invalid number '" + std::string(value) + "'");
    return out;
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        const auto pos = value.find(',', start);
        const auto item = util::trim(value.substr(start, pos - start));
        if (!item.empty()) out.emplace_back(item);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

data::Date parse_config_date(std::string_view key, std::string_view value) {
    try {
        return data::parse_date(value);
    } catch (const DataError& e) {
        throw ConfigError("config key '" + std::string(key) + "': " + e.what());
    }
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = [] {
        std::map<std::string, Setter, std::less<>> t;
        t["model"] = [](RunConfig& c, auto k, auto v) { c.model = data::model_from_index(parse_number<int>(k, v)); };
        for (const auto asset : {data::kSp500, data::kRussell2000, data::kWti, data::kGold}) {
            t["data." + std::string(asset)] = [asset](RunConfig& c, auto, auto v) {
                c.data_paths[std::string(asset)] = fs::path(std::string(v));
            };
        }
        t["data.decay"] = [](RunConfig& c, auto k, auto v) { c.features.decay = parse_number<double>(k, v); };
        t["data.five_day_scale"] = [](RunConfig& c, auto k, auto v) {
            if (v == "daily") {
                c.features.five_day_scale = data::HorizonScale::Daily;
            } else if (v == "horizon") {
                c.features.five_day_scale = data::HorizonScale::PerHorizon;
            } else {
                throw ConfigError("config key '" + std::string(k) + "' must be daily or horizon");
            }
        };
        auto split_field = [](data::Date data::SplitSpec::*field) {
            return [field](RunConfig& c, std::string_view k, std::string_view v) {
                if (!c.split_dates) c.split_dates = data::SplitSpec{};
                (*c.split_dates).*field = parse_config_date(k, v);
            };
        };
        t["split.train_start"] = split_field(&data::SplitSpec::train_start);
        t["split.train_end"] = split_field(&data::SplitSpec::train_end);
        t["split.test_end"] = split_field(&data::SplitSpec::test_end);
        t["split.test_days"] = [](RunConfig& c, auto k, auto v) { c.test_days = parse_number<std::size_t>(k, v); };
        t["costs"] = [](RunConfig& c, auto, auto v) {
            env::cost_preset(v);
            c.cost_preset = std::string(v);
        };
        t["trading_cost"] = [](RunConfig& c, auto k, auto v) { c.trading_cost = parse_number<double>(k, v); };
        t["time_cost"] = [](RunConfig& c, auto k, auto v) { c.time_cost = parse_number<double>(k, v); };
        t["episodes"] = [](RunConfig& c, auto k, auto v) { c.train.episodes = parse_number<std::size_t>(k, v); };
        t["episode_length"] = [](RunConfig& c, auto k, auto v) {
            c.train.env.episode_length = parse_number<std::size_t>(k, v);
        };
        t["gamma"] = [](RunConfig& c, auto k, auto v) { c.train.agent.gamma = parse_number<double>(k, v); };
        t["learning_rate"] = [](RunConfig& c, auto k, auto v) { c.train.agent.lr = parse_number<double>(k, v); };
        t["batch_size"] = [](RunConfig& c, auto k, auto v) {
            c.train.agent.batch_size = parse_number<std::size_t>(k, v);
        };
        t["replay_capacity"] = [](RunConfig& c, auto k, auto v) {
            c.train.agent.replay_capacity = parse_number<std::size_t>(k, v);
        };
        t["target_sync_every"] = [](RunConfig& c, auto k, auto v) {
            c.train.agent.target_sync_every = parse_number<std::size_t>(k, v);
        };
        t["target_sync_unit"] = [](RunConfig& c, auto k, auto v) {
            if (v == "steps") {
                c.train.agent.sync_unit = agent::SyncUnit::GradientSteps;
            } else if (v == "episodes") {
                c.train.agent.sync_unit = agent::SyncUnit::Episodes;
            } else {
                throw ConfigError("config key '" + std::string(k) + "' must be steps or episodes");
            }
        };
        t["warmup"] = [](RunConfig& c, auto k, auto v) { c.train.agent.warmup = parse_number<std::size_t>(k, v); };
        t["hidden_units"] = [](RunConfig& c, auto k, auto v) {
            c.train.agent.net.hidden_dims.clear();
            for (const auto& item : split_list(v)) c.train.agent.net.hidden_dims.push_back(parse_number<std::size_t>(k, item));
        };
        t["dropout"] = [](RunConfig& c, auto k, auto v) { c.train.agent.net.dropout_rate = parse_number<double>(k, v); };
        t["l2_activity"] = [](RunConfig& c, auto k, auto v) {
            c.train.agent.net.l2_activity = parse_number<double>(k, v);
        };
        t["epsilon.start"] = [](RunConfig& c, auto k, auto v) { c.epsilon.eps_start = parse_number<double>(k, v); };
        t["epsilon.knee"] = [](RunConfig& c, auto k, auto v) { c.epsilon.eps_knee = parse_number<double>(k, v); };
        t["epsilon.end"] = [](RunConfig& c, auto k, auto v) { c.epsilon.eps_end = parse_number<double>(k, v); };
        t["epsilon.linear_until"] = [](RunConfig& c, auto k, auto v) {
            c.eps_linear_until = parse_number<std::size_t>(k, v);
        };
        t["early_stop_streak"] = [](RunConfig& c, auto k, auto v) {
            c.train.early_stop_streak = parse_number<std::size_t>(k, v);
        };
        t["ma_window"] = [](RunConfig& c, auto k, auto v) { c.train.ma_window = parse_number<std::size_t>(k, v); };
        t["seed"] = [](RunConfig& c, auto k, auto v) { c.train.seed = parse_number<std::uint64_t>(k, v); };
        t["out"] = [](RunConfig& c, auto, auto v) { c.out_dir = fs::path(std::string(v)); };
        t["checkpoint"] = [](RunConfig& c, auto, auto v) { c.checkpoint = fs::path(std::string(v)); };
        t["report.inputs"] = [](RunConfig& c, auto, auto v) { c.report_inputs = split_list(v); };
        t["synth.regime"] = [](RunConfig& c, auto, auto v) { c.synth.regime = data::regime_from_string(v); };
        t["synth.days"] = [](RunConfig& c, auto k, auto v) { c.synth.n_days = parse_number<std::size_t>(k, v); };
        t["synth.drift"] = [](RunConfig& c, auto k, auto v) { c.synth.drift = parse_number<double>(k, v); };
        t["synth.vol"] = [](RunConfig& c, auto k, auto v) { c.synth.vol = parse_number<double>(k, v); };
        t["synth.amplitude"] = [](RunConfig& c, auto k, auto v) { c.synth.amplitude = parse_number<double>(k, v); };
        t["synth.seed"] = [](RunConfig& c, auto k, auto v) { c.synth.seed = parse_number<std::uint64_t>(k, v); };
        t["synth.start_date"] = [](RunConfig& c, auto k, auto v) { c.synth.start_date = parse_config_date(k, v); };
        return t;
    }();
    return table;
}

void require_writable(const RunConfig& config, std::initializer_list<std::string_view> files) {
    for (const auto f : files) {
        const auto p = config.out_dir / f;
        if (fs::exists(p) && !config.force) {
            throw ConfigError(p.string() + " already exists (use --force to overwrite)");
        }
    }
}

void ensure_out_dir(const RunConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + config.out_dir.string() + ": " + ec.message());
}

void require_data(const RunConfig& config) {
    for (const auto& asset : data::required_assets(config.model)) {
        const auto it = config.data_paths.find(asset);
        if (it == config.data_paths.end()) {
            throw ConfigError("model " + data::model_name(config.model) + " requires data." + asset);
        }
        if (!fs::is_regular_file(it->second)) {
            throw ConfigError("data." + asset + ": file not found: " + it->second.string());
        }
    }
}

json feature_names(const data::FeatureFrame& frame) {
    json names = json::array();
    for (const auto& c : frame.columns) names.push_back(c.name());
    return names;
}

struct Prepared {
    data::FrameSplit split;
    json provenance;
};

Prepared prepare_frames(const RunConfig& config) {
    require_data(config);
    std::map<std::string, data::PriceSeries> series;
    json assets = json::object();
    for (const auto& asset : data::required_assets(config.model)) {
        const auto& path = config.data_paths.at(asset);
        auto loaded = data::load_csv(path, asset);
        assets[asset] = {{"path", path.string()},
                         {"rows", loaded.series.size()},
                         {"dropped_rows", loaded.dropped_rows},
                         {"first_date", data::format_date(loaded.series.rows.front().date)},
                         {"last_date", data::format_date(loaded.series.rows.back().date)}};
        series.emplace(asset, std::move(loaded.series));
    }
    const auto frame = data::build_features(config.model, series, config.features);

    data::SplitSpec spec;
    if (config.split_dates) {
        spec = *config.split_dates;
    } else {
        if (config.test_days == 0 || frame.rows() <= config.test_days + 1) {
            throw DataError("frame of " + std::to_string(frame.rows()) + " rows cannot hold a " +
                            std::to_string(config.test_days) + "-day test window");
        }
        spec = {frame.dates.front(), frame.dates[frame.rows() - config.test_days - 1], frame.dates.back()};
    }
    auto parts = data::split(frame, spec);

    auto range = [](const data::FeatureFrame& f) {
        return json{{"rows", f.rows()},
                    {"first_date", data::format_date(f.dates.front())},
                    {"last_date", data::format_date(f.dates.back())}};
    };
    json provenance{{"model", data::model_name(config.model)},
                    {"features", feature_names(frame)},
                    {"ewma_decay", config.features.decay},
                    {"ewma_seed_window", data::kEwmaSeedWindow},
                    {"five_day_scale", config.features.five_day_scale == data::HorizonScale::Daily ? "daily" : "horizon"},
                    {"assets", assets},
                    {"joined_rows", frame.rows()},
                    {"train", range(parts.train)},
                    {"test", range(parts.test)}};
    return {std::move(parts), std::move(provenance)};
}

eval::BacktestResult from_trace(std::vector<env::TraceRow> trace) {
    eval::BacktestResult out;
    for (const auto& row : trace) {
        out.dates.push_back(row.date);
        out.actions.push_back(row.action);
        out.positions.push_back(row.position);
        out.rewards.push_back(row.reward);
        out.market_returns.push_back(row.market_return);
        out.agent_nav.push_back(row.agent_nav);
        out.market_nav.push_back(row.market_nav);
    }
    out.trace = std::move(trace);
    return out;
}

} // namespace

env::CostModel RunConfig::resolved_costs() const {
    auto c = env::cost_preset(cost_preset);
    if (trading_cost) c.trading_cost = *trading_cost;
    if (time_cost) c.time_cost = *time_cost;
    return c;
}

training::TrainConfig RunConfig::resolved_train() const {
    auto t = train;
    t.env.costs = resolved_costs();
    t.agent.net.input_dim = data::feature_count(model);
    auto s = epsilon;
    s.total_episodes = t.episodes;
    s.linear_until = eps_linear_until.value_or(t.episodes / 2);
    t.schedule = s;
    return t;
}

void RunConfig::validate() const {
    const auto c = resolved_costs();
    if (c.trading_cost < 0.0 || c.time_cost < 0.0) throw ConfigError("trading and time costs must be >= 0");
    if (!(features.decay > 0.0 && features.decay < 1.0)) throw ConfigError("data.decay must lie in (0, 1)");
    if (split_dates && !(split_dates->train_start < split_dates->train_end &&
                         split_dates->train_end < split_dates->test_end)) {
        throw ConfigError("split dates must satisfy train_start < train_end < test_end");
    }
    resolved_train().validate();
}

RunConfig parse_config(std::string_view text) {
    RunConfig config;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = util::trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
            }
            const auto key = util::trim(line.substr(0, eq));
            const auto value = util::trim(line.substr(eq + 1));
            const auto it = setters().find(key);
            if (it == setters().end()) {
                throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
            }
            if (value.empty()) {
                throw ConfigError("config line " + std::to_string(line_no) + ": empty value for '" + std::string(key) + "'");
            }
            it->second(config, key, value);
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    config.validate();
    return config;
}

RunConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const DataError&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return parse_config(text);
}

void apply(RunConfig& config, const Overrides& o) {
    if (o.seed) config.train.seed = *o.seed;
    if (o.model) config.model = data::model_from_index(*o.model);
    if (o.costs) {
        env::cost_preset(*o.costs);
        config.cost_preset = *o.costs;
        config.trading_cost.reset();
        config.time_cost.reset();
    }
    if (o.out) config.out_dir = *o.out;
    if (o.checkpoint) config.checkpoint = *o.checkpoint;
    config.force = config.force || o.force;
    config.validate();
}

void cmd_synth(const RunConfig& config) {
    const std::vector<std::string> assets{std::string(data::kSp500), std::string(data::kRussell2000),
                                          std::string(data::kWti), std::string(data::kGold)};
    std::vector<data::PriceSeries> series;
    for (std::size_t k = 0; k < assets.size(); ++k) {
        auto spec = config.synth;
        spec.asset_id = assets[k];
        spec.seed = mix64(config.synth.seed + k);
        if (k > 0) {
            // Observed-only assets: driftless noise with the same volatility.
            spec.regime = data::Regime::Trend;
            spec.drift = 0.0;
            spec.amplitude = 0.0;
        }
        series.push_back(data::synth_generate(spec));
    }
    for (const auto& a : assets) {
        const auto p = config.out_dir / (a + ".csv");
        if (fs::exists(p) && !config.force) throw ConfigError(p.string() + " already exists (use --force to overwrite)");
    }
    ensure_out_dir(config);
    for (const auto& s : series) {
        std::ostringstream os;
        os << "date,close\n";
        for (const auto& r : s.rows) os << data::format_date(r.date) << ',' << util::exact(r.close) << '\n';
        util::write_file(config.out_dir / (s.asset_id + ".csv"), os.str());
    }
}

data::FrameSplit cmd_prepare(const RunConfig& config) {
    require_data(config);
    require_writable(config, {layout::kTrainFrame, layout::kTestFrame, layout::kProvenance});
    auto prepared = prepare_frames(config);
    ensure_out_dir(config);
    data::write_frame_csv(prepared.split.train, config.out_dir / layout::kTrainFrame);
    data::write_frame_csv(prepared.split.test, config.out_dir / layout::kTestFrame);
    util::write_file(config.out_dir / layout::kProvenance, prepared.provenance.dump(2) + "\n");
    return std::move(prepared.split);
}

training::TrainLog cmd_train(const RunConfig& config) {
    require_data(config);
    require_writable(config, {layout::kTrainLog, layout::kTrainSummary, layout::kCheckpoint});
    const auto prepared = prepare_frames(config);
    const auto train_config = config.resolved_train();
    if (prepared.split.train.rows() < train_config.env.episode_length + 1) {
        throw ConfigError("train window of " + std::to_string(prepared.split.train.rows()) +
                          " rows is too short for " + std::to_string(train_config.env.episode_length) +
                          "-step episodes");
    }
    auto result = training::run_training(train_config, prepared.split.train);
    ensure_out_dir(config);
    training::write_log_csv(result.log, config.out_dir / layout::kTrainLog);
    util::write_file(config.out_dir / layout::kTrainSummary, training::summary_json(result.log));
    training::save_checkpoint(result.agent, config.out_dir / layout::kCheckpoint);
    return std::move(result.log);
}

eval::Report cmd_evaluate(const RunConfig& config) {
    const auto ckpt = config.checkpoint.value_or(config.out_dir / layout::kCheckpoint);
    if (!fs::is_regular_file(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
    require_data(config);
    require_writable(config, {layout::kReport, layout::kNavCurves, layout::kBacktestTrace});
    const auto learner = training::load_checkpoint(ckpt);
    const auto expected = data::feature_count(config.model);
    if (learner.config().net.input_dim != expected) {
        throw ConfigError("checkpoint network takes " + std::to_string(learner.config().net.input_dim) +
                          " inputs but model " + data::model_name(config.model) + " produces " +
                          std::to_string(expected) + " features");
    }
    const auto prepared = prepare_frames(config);
    const auto costs = config.resolved_costs();
    const std::vector<eval::ModelResult> models{
        {data::model_name(config.model), eval::run_backtest(learner, prepared.split.test, costs)}};
    auto report = eval::build_report(models, costs);
    ensure_out_dir(config);
    env::write_trace_csv(models.front().backtest.trace, config.out_dir / layout::kBacktestTrace);
    eval::emit_report(report, config.out_dir / layout::kReport, config.out_dir / layout::kNavCurves);
    return report;
}

eval::Report cmd_report(const RunConfig& config) {
    if (config.report_inputs.empty()) throw ConfigError("report needs report.inputs = name=dir[,name=dir...]");
    require_writable(config, {layout::kReport, layout::kNavCurves});
    std::vector<eval::ModelResult> models;
    for (const auto& entry : config.report_inputs) {
        const auto eq = entry.find('=');
        const fs::path dir = eq == std::string::npos ? fs::path(entry) : fs::path(entry.substr(eq + 1));
        const std::string name = eq == std::string::npos ? dir.filename().string() : entry.substr(0, eq);
        const auto trace_path = dir / layout::kBacktestTrace;
        if (!fs::is_regular_file(trace_path)) throw ConfigError("no backtest trace at " + trace_path.string());
        models.push_back({name, from_trace(env::read_trace_csv(trace_path))});
    }
    auto report = eval::build_report(models, config.resolved_costs());
    ensure_out_dir(config);
    eval::emit_report(report, config.out_dir / layout::kReport, config.out_dir / layout::kNavCurves);
    return report;
}

int run_command(std::string_view command, const RunConfig& config) {
    try {
        if (command == "synth") {
            cmd_synth(config);
        } else if (command == "prepare") {
            cmd_prepare(config);
        } else if (command == "train") {
            const auto log = cmd_train(config);
            std::cout << "trained " << log.records.size() << " episodes, " << log.termination.describe() << '\n';
        } else if (command == "evaluate") {
            const auto report = cmd_evaluate(config);
            std::cout << eval::report_json(report);
        } else if (command == "report") {
            const auto report = cmd_report(config);
            std::cout << eval::report_json(report);
        } else {
            throw ConfigError("unknown command '" + std::string(command) + "'");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const VersionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return kOk;
}

} // namespace ddqn::cli
