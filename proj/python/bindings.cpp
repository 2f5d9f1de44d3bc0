#include "ddqn/agent.hpp"
#include "ddqn/errors.hpp"
#include "ddqn/evaluation.hpp"
#include "ddqn/market_data.hpp"
#include "ddqn/neural_net.hpp"
#include "ddqn/trading_env.hpp"
#include "ddqn/training.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ddqn;

namespace {

// Business-day dated series from a bare list of closes.
data::PriceSeries series_from_closes(const std::vector<double>& closes, const std::string& asset) {
    data::PriceSeries s{asset, {}};
    data::Date d{std::chrono::year{2000} / 1 / 3};
    for (const double c : closes) {
        s.rows.push_back({d, c});
        do {
            d += std::chrono::days{1};
        } while (std::chrono::weekday{d} == std::chrono::Saturday || std::chrono::weekday{d} == std::chrono::Sunday);
    }
    return s;
}

data::ReturnSeries returns_from_values(const std::vector<double>& values, int horizon = 1) {
    const auto s = series_from_closes(std::vector<double>(values.size(), 1.0), "x");
    data::ReturnSeries r{"x", horizon, {}, values};
    for (const auto& row : s.rows) r.dates.push_back(row.date);
    return r;
}

std::vector<int> action_codes(const std::vector<env::Action>& actions) {
    std::vector<int> out;
    out.reserve(actions.size());
    for (const auto a : actions) out.push_back(env::index_of(a));
    return out;
}

std::vector<env::Action> actions_from_codes(const std::vector<int>& codes) {
    std::vector<env::Action> out;
    out.reserve(codes.size());
    for (const int c : codes) out.push_back(env::action_from_index(c));
    return out;
}

py::dict metrics_dict(const eval::Annualized& m) {
    py::dict d;
    d["e_r"] = m.e_r;
    d["std_r"] = m.std_r;
    d["sharpe"] = m.sharpe ? py::cast(*m.sharpe) : py::none();
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Double deep Q-network trading engine";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<VersionError>(m, "VersionError", PyExc_RuntimeError);
    py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

    m.def(
        "param_count",
        [](std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim) {
            nn::NetConfig c;
            c.input_dim = input_dim;
            c.hidden_dims = std::move(hidden);
            c.output_dim = output_dim;
            return nn::param_count(c);
        },
        py::arg("input_dim"), py::arg("hidden") = std::vector<std::size_t>{64, 64}, py::arg("output_dim") = 3);

    m.def(
        "log_returns",
        [](const std::vector<double>& closes, int horizon) {
            return data::log_returns(series_from_closes(closes, "x"), horizon).values;
        },
        py::arg("closes"), py::arg("horizon") = 1);

    m.def(
        "ewma_vol",
        [](const std::vector<double>& returns, double decay, std::optional<double> seed_variance) {
            return data::ewma_vol(returns_from_values(returns), decay, seed_variance).sigma;
        },
        py::arg("returns"), py::arg("decay") = 0.94, py::arg("seed_variance") = py::none());

    m.def(
        "normalize",
        [](const std::vector<double>& returns, const std::vector<double>& sigma) {
            if (returns.size() != sigma.size()) throw ConfigError("returns and sigma differ in length");
            auto r = returns_from_values(returns);
            data::VolSeries v{"x", 0.94, r.dates, sigma};
            return data::normalize(r, v).values;
        },
        py::arg("returns"), py::arg("sigma"));

    m.def(
        "synth_generate",
        [](double drift, double vol, std::size_t n_days, std::uint64_t seed, const std::string& regime,
           double amplitude) {
            data::SynthSpec s;
            s.drift = drift;
            s.vol = vol;
            s.n_days = n_days;
            s.seed = seed;
            s.regime = data::regime_from_string(regime);
            s.amplitude = amplitude;
            std::vector<double> closes;
            for (const auto& r : data::synth_generate(s).rows) closes.push_back(r.close);
            return closes;
        },
        py::arg("drift") = 0.0, py::arg("vol") = 0.01, py::arg("n_days") = 1000, py::arg("seed") = 0,
        py::arg("regime") = "trend", py::arg("amplitude") = 0.0);

    py::class_<data::FeatureFrame>(m, "FeatureFrame")
        .def_property_readonly("rows", &data::FeatureFrame::rows)
        .def_property_readonly("width", &data::FeatureFrame::width)
        .def_property_readonly("target_returns", [](const data::FeatureFrame& f) { return f.target_returns; })
        .def("row", [](const data::FeatureFrame& f, std::size_t i) {
            if (i >= f.rows()) throw py::index_error();
            const auto r = f.row(i);
            return std::vector<double>(r.begin(), r.end());
        })
        .def("slice", &data::FeatureFrame::slice, py::arg("first"), py::arg("last"));

    m.def(
        "build_frame",
        [](const std::map<std::string, std::vector<double>>& closes, int model, double decay) {
            std::map<std::string, data::PriceSeries> assets;
            for (const auto& [id, c] : closes) assets.emplace(id, series_from_closes(c, id));
            data::FeatureOptions opt;
            opt.decay = decay;
            return data::build_features(data::model_from_index(model), assets, opt);
        },
        py::arg("closes"), py::arg("model") = 0, py::arg("decay") = 0.94,
        "Feature frame from {asset_id: closes}; asset ids sp500, russell2000, wti, gold.");

    m.def(
        "epsilon_at",
        [](std::size_t episode, std::size_t total_episodes, std::optional<std::size_t> linear_until) {
            auto s = agent::EpsilonSchedule::for_episodes(total_episodes);
            if (linear_until) s.linear_until = *linear_until;
            return agent::epsilon_at(s, episode);
        },
        py::arg("episode"), py::arg("total_episodes") = 1000, py::arg("linear_until") = py::none());

    m.def(
        "oracle_actions",
        [](const std::vector<double>& returns, double trading_cost, double time_cost) {
            return action_codes(eval::oracle_actions(returns, {trading_cost, time_cost}));
        },
        py::arg("returns"), py::arg("trading_cost") = 1e-4, py::arg("time_cost") = 1e-5);

    m.def(
        "score_actions",
        [](const std::vector<int>& actions, const std::vector<int>& oracle) {
            const auto s = eval::score_actions(actions_from_codes(actions), actions_from_codes(oracle));
            return py::make_tuple(s.mse, s.accuracy);
        },
        py::arg("actions"), py::arg("oracle"));

    m.def(
        "annualized_metrics",
        [](const std::vector<double>& daily) { return metrics_dict(eval::annualized_metrics(daily)); },
        py::arg("daily_returns"));

    py::class_<agent::Agent>(m, "Agent")
        .def_property_readonly("input_dim", [](const agent::Agent& a) { return a.config().net.input_dim; })
        .def_property_readonly("gradient_steps", &agent::Agent::gradient_steps)
        .def("q_values",
             [](const agent::Agent& a, const std::vector<double>& s) {
                 const auto q = nn::q_values(a.online(), s);
                 return std::vector<double>(q.data(), q.data() + q.size());
             })
        .def("greedy_action", [](const agent::Agent& a, const std::vector<double>& s) {
            return env::index_of(a.greedy_action(s));
        })
        .def("save", [](const agent::Agent& a, const std::string& path) { training::save_checkpoint(a, path); });

    m.def("load_agent", [](const std::string& path) { return training::load_checkpoint(path); });

    m.def(
        "train",
        [](const data::FeatureFrame& frame, std::size_t episodes, std::size_t batch_size,
           std::size_t replay_capacity, std::uint64_t seed, double trading_cost, double time_cost,
           std::size_t episode_length, std::size_t early_stop_streak) {
            training::TrainConfig c;
            c.episodes = episodes;
            c.agent.batch_size = batch_size;
            c.agent.replay_capacity = replay_capacity;
            c.seed = seed;
            c.env.costs = {trading_cost, time_cost};
            c.env.episode_length = episode_length;
            c.early_stop_streak = early_stop_streak;
            auto result = [&] {
                py::gil_scoped_release release;
                return training::run_training(c, frame);
            }();
            py::list records;
            for (const auto& r : result.log.records) {
                py::dict d;
                d["episode"] = r.episode;
                d["epsilon"] = r.epsilon;
                d["agent_nav"] = r.agent_nav;
                d["market_nav"] = r.market_nav;
                d["outperformed"] = r.outperformed;
                records.append(d);
            }
            py::dict log;
            log["records"] = records;
            log["termination"] = result.log.termination.describe();
            log["csv"] = training::log_csv(result.log);
            return py::make_tuple(log, std::move(result.agent));
        },
        py::arg("frame"), py::arg("episodes") = 1000, py::arg("batch_size") = 4096,
        py::arg("replay_capacity") = 1'000'000, py::arg("seed") = 0, py::arg("trading_cost") = 1e-4,
        py::arg("time_cost") = 1e-5, py::arg("episode_length") = 252, py::arg("early_stop_streak") = 25);

    m.def(
        "backtest",
        [](const agent::Agent& a, const data::FeatureFrame& frame, double trading_cost, double time_cost) {
            const env::CostModel costs{trading_cost, time_cost};
            const auto bt = eval::run_backtest(a, frame, costs);
            const auto oracle = eval::oracle_actions(bt.market_returns, costs);
            const auto score = eval::score_actions(bt.actions, oracle);
            py::dict d;
            d["actions"] = action_codes(bt.actions);
            d["rewards"] = bt.rewards;
            d["agent_nav"] = bt.agent_nav;
            d["market_nav"] = bt.market_nav;
            d["oracle"] = action_codes(oracle);
            d["mse"] = score.mse;
            d["accuracy"] = score.accuracy;
            d["metrics"] = metrics_dict(eval::annualized_metrics(bt.rewards));
            return d;
        },
        py::arg("agent"), py::arg("frame"), py::arg("trading_cost") = 1e-4, py::arg("time_cost") = 1e-5);
}
