#include "ddqn/neural_net.hpp"

#include "ddqn/errors.hpp"
#include "json_codec.hpp"
#include "text_util.hpp"

#include <cmath>
#include <string>

namespace ddqn::nn {

namespace {

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

std::string hidden_name(std::size_t k) { return "hidden layer " + std::to_string(k + 1); }

// Shared forward pass; fills cache when given. Dropout applies only when rng is set.
Matrix forward_impl(const NetParams& params, const Matrix& states, Rng* dropout_rng, ForwardCache* cache) {
    const auto& cfg = params.config;
    if (static_cast<std::size_t>(states.cols()) != cfg.input_dim) {
        throw ConfigError("state width " + std::to_string(states.cols()) + " does not match network input width " +
                          std::to_string(cfg.input_dim));
    }
    const std::size_t n_hidden = cfg.hidden_dims.size();
    if (cache) {
        cache->input = states;
        cache->pre_activations.clear();
        cache->activations.clear();
        cache->dropout_mask.resize(0, 0);
    }

    Matrix x = states;
    for (std::size_t k = 0; k < n_hidden; ++k) {
        const auto& layer = params.layers[k];
        Matrix z(x.rows(), layer.weights.cols());
        z.noalias() = x * layer.weights;
        z.rowwise() += layer.biases;
        Matrix a = relu(z);
        require_finite(a, hidden_name(k));
        if (cache) {
            cache->pre_activations.push_back(std::move(z));
            cache->activations.push_back(a);
        }
        x = std::move(a);
    }

    if (n_hidden > 0 && dropout_rng != nullptr && cfg.dropout_rate > 0.0) {
        const double keep = 1.0 - cfg.dropout_rate;
        Matrix mask(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < mask.cols(); ++j)
            for (Eigen::Index i = 0; i < mask.rows(); ++i)
                mask(i, j) = uniform01(*dropout_rng) < keep ? 1.0 / keep : 0.0;
        x = x.cwiseProduct(mask);
        if (cache) cache->dropout_mask = std::move(mask);
    }

    const auto& out_layer = params.layers.back();
    Matrix q(x.rows(), out_layer.weights.cols());
    q.noalias() = x * out_layer.weights;
    q.rowwise() += out_layer.biases;
    require_finite(q, "output layer");
    return q;
}

} // namespace

void NetConfig::validate() const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("network dimensions must be positive");
    for (const auto h : hidden_dims)
        if (h == 0) throw ConfigError("hidden layer widths must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (!(l2_activity >= 0.0)) throw ConfigError("L2 activity coefficient must be >= 0");
}

bool NetConfig::same_shape(const NetConfig& other) const {
    return input_dim == other.input_dim && hidden_dims == other.hidden_dims && output_dim == other.output_dim;
}

bool NetParams::all_finite() const {
    for (const auto& l : layers)
        if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
    return true;
}

std::size_t param_count(const NetConfig& config) {
    std::size_t total = 0;
    std::size_t in = config.input_dim;
    for (const auto h : config.hidden_dims) {
        total += in * h + h;
        in = h;
    }
    return total + in * config.output_dim + config.output_dim;
}

NetParams zeros_like(const NetConfig& config) {
    NetParams p{config, {}};
    std::size_t in = config.input_dim;
    auto add = [&](std::size_t out) {
        p.layers.push_back({Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
                            RowVector::Zero(static_cast<Eigen::Index>(out))});
        in = out;
    };
    for (const auto h : config.hidden_dims) add(h);
    add(config.output_dim);
    return p;
}

NetParams init(const NetConfig& config) {
    config.validate();
    NetParams p = zeros_like(config);
    Rng rng = make_stream(config.seed, Stream::Init);
    for (auto& layer : p.layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows()));
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
                layer.weights(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    return p;
}

ForwardResult forward(const NetParams& params, const Matrix& states, Mode mode, Rng* rng) {
    if (mode == Mode::Eval) return {forward_impl(params, states, nullptr, nullptr), std::nullopt};
    if (params.config.dropout_rate > 0.0 && !params.config.hidden_dims.empty() && rng == nullptr) {
        throw ConfigError("train-mode forward with dropout needs a random generator");
    }
    ForwardCache cache;
    Matrix q = forward_impl(params, states, rng, &cache);
    return {std::move(q), std::move(cache)};
}

Eigen::RowVectorXd q_values(const NetParams& params, std::span<const double> state) {
    Matrix x(1, static_cast<Eigen::Index>(state.size()));
    for (std::size_t j = 0; j < state.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = state[j];
    return forward_impl(params, x, nullptr, nullptr).row(0);
}

LossAndGrads loss_and_grads(const NetParams& params, const Matrix& states, std::span<const std::uint8_t> actions,
                            std::span<const double> targets, Rng* dropout_rng) {
    const auto batch = static_cast<std::size_t>(states.rows());
    if (batch == 0) throw ConfigError("loss requires a non-empty batch");
    if (actions.size() != batch || targets.size() != batch) {
        throw ConfigError("batch of " + std::to_string(batch) + " states has " + std::to_string(actions.size()) +
                          " actions and " + std::to_string(targets.size()) + " targets");
    }
    for (const double y : targets)
        if (!std::isfinite(y)) throw NumericError("non-finite TD target");

    const auto& cfg = params.config;
    ForwardCache cache;
    const Matrix q = forward_impl(params, states, dropout_rng, &cache);
    const double inv_n = 1.0 / static_cast<double>(batch);

    LossAndGrads out{0.0, 0.0, 0.0, zeros_like(cfg)};

    // Output gradient: only the taken action's unit receives error.
    Matrix delta = Matrix::Zero(q.rows(), q.cols());
    for (std::size_t i = 0; i < batch; ++i) {
        const auto a = static_cast<Eigen::Index>(actions[i]);
        if (a >= q.cols()) throw ConfigError("action index out of range for network output");
        const double err = q(static_cast<Eigen::Index>(i), a) - targets[i];
        out.td_loss += err * err;
        delta(static_cast<Eigen::Index>(i), a) = 2.0 * err * inv_n;
    }
    out.td_loss *= inv_n;

    for (const auto& a : cache.activations) out.activity_penalty += a.squaredNorm();
    out.activity_penalty *= cfg.l2_activity * inv_n;
    out.loss = out.td_loss + out.activity_penalty;
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");

    const std::size_t n_hidden = cfg.hidden_dims.size();
    const double act_scale = 2.0 * cfg.l2_activity * inv_n;

    // Input to the output layer as seen in the forward pass.
    Matrix last_in;
    if (n_hidden == 0) {
        last_in = cache.input;
    } else if (cache.dropout_mask.size() > 0) {
        last_in = cache.activations.back().cwiseProduct(cache.dropout_mask);
    } else {
        last_in = cache.activations.back();
    }

    auto& g_out = out.grads.layers.back();
    g_out.weights.noalias() = last_in.transpose() * delta;
    g_out.biases = delta.colwise().sum();
    if (n_hidden == 0) return out;

    Matrix grad_act(delta.rows(), params.layers.back().weights.rows());
    grad_act.noalias() = delta * params.layers.back().weights.transpose();
    if (cache.dropout_mask.size() > 0) grad_act = grad_act.cwiseProduct(cache.dropout_mask);

    for (std::size_t k = n_hidden; k-- > 0;) {
        grad_act += act_scale * cache.activations[k];
        const Matrix grad_pre =
            grad_act.cwiseProduct((cache.pre_activations[k].array() > 0.0).cast<double>().matrix());
        const Matrix& layer_in = k == 0 ? cache.input : cache.activations[k - 1];
        auto& g = out.grads.layers[k];
        g.weights.noalias() = layer_in.transpose() * grad_pre;
        g.biases = grad_pre.colwise().sum();
        if (k > 0) {
            grad_act.resize(grad_pre.rows(), params.layers[k].weights.rows());
            grad_act.noalias() = grad_pre * params.layers[k].weights.transpose();
        }
    }
    for (std::size_t k = 0; k < out.grads.layers.size(); ++k) {
        require_finite(out.grads.layers[k].weights, "gradient of layer " + std::to_string(k + 1));
    }
    return out;
}

AdamState adam_init(const NetConfig& config) {
    return AdamState{zeros_like(config), zeros_like(config), 0};
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& adam, double lr) {
    if (!params.config.same_shape(grads.config) || !params.config.same_shape(adam.m.config)) {
        throw ConfigError("Adam step: parameter, gradient and moment shapes differ");
    }
    ++adam.t;
    const double b1 = adam.beta1, b2 = adam.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + adam.epsilon);
    };
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        update(params.layers[k].weights, grads.layers[k].weights, adam.m.layers[k].weights, adam.v.layers[k].weights);
        update(params.layers[k].biases, grads.layers[k].biases, adam.m.layers[k].biases, adam.v.layers[k].biases);
    }
}

void save_net(const NetParams& params, const std::filesystem::path& path) {
    codec::json j;
    j["format"] = "ddqn-net";
    j["version"] = kNetFormatVersion;
    j["config"] = codec::to_json(params.config);
    j["layers"] = codec::layers_to_json(params);
    util::write_file(path, j.dump(1));
}

NetParams load_net(const std::filesystem::path& path) {
    codec::json j;
    try {
        j = codec::json::parse(util::read_file(path));
    } catch (const codec::json::exception& e) {
        throw DataError(path.string() + ": corrupt network file (" + e.what() + ")");
    }
    if (j.value("format", "") != "ddqn-net") throw VersionError(path.string() + ": not a network checkpoint");
    if (j.value("version", -1) != kNetFormatVersion) {
        throw VersionError(path.string() + ": unsupported network format version " + j.value("version", codec::json()).dump());
    }
    try {
        const auto cfg = codec::net_config_from_json(j.at("config"));
        return codec::params_from_json(j.at("layers"), cfg);
    } catch (const codec::json::exception& e) {
        throw DataError(path.string() + ": corrupt network file (" + e.what() + ")");
    }
}

} // namespace ddqn::nn

namespace ddqn::codec {

json to_json(const nn::NetConfig& c) {
    return {{"input_dim", c.input_dim},       {"hidden_dims", c.hidden_dims}, {"output_dim", c.output_dim},
            {"dropout_rate", c.dropout_rate}, {"l2_activity", c.l2_activity}, {"seed", c.seed}};
}

nn::NetConfig net_config_from_json(const json& j) {
    nn::NetConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.l2_activity = j.at("l2_activity").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

json layers_to_json(const nn::NetParams& params) {
    json layers = json::array();
    for (const auto& l : params.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
            for (Eigen::Index k = 0; k < l.weights.cols(); ++k) w.push_back(l.weights(i, k));
        std::vector<double> b(l.biases.data(), l.biases.data() + l.biases.size());
        layers.push_back({{"in", l.weights.rows()}, {"out", l.weights.cols()}, {"weights", w}, {"biases", b}});
    }
    return layers;
}

nn::NetParams params_from_json(const json& layers, const nn::NetConfig& config) {
    nn::NetParams p = nn::zeros_like(config);
    if (!layers.is_array() || layers.size() != p.layers.size()) {
        throw DataError("layer count does not match network configuration");
    }
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        auto& l = p.layers[k];
        const auto& jl = layers[k];
        const auto w = jl.at("weights").get<std::vector<double>>();
        const auto b = jl.at("biases").get<std::vector<double>>();
        if (jl.at("in").get<Eigen::Index>() != l.weights.rows() || jl.at("out").get<Eigen::Index>() != l.weights.cols() ||
            w.size() != static_cast<std::size_t>(l.weights.size()) || b.size() != static_cast<std::size_t>(l.biases.size())) {
            throw DataError("layer " + std::to_string(k + 1) + " shape does not match network configuration");
        }
        std::size_t idx = 0;
        for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(i, c) = w[idx++];
        for (std::size_t c = 0; c < b.size(); ++c) l.biases(static_cast<Eigen::Index>(c)) = b[c];
    }
    if (!p.all_finite()) throw DataError("network parameters contain non-finite values");
    return p;
}

json to_json(const nn::AdamState& adam) {
    return {{"t", adam.t},
            {"beta1", adam.beta1},
            {"beta2", adam.beta2},
            {"epsilon", adam.epsilon},
            {"m", layers_to_json(adam.m)},
            {"v", layers_to_json(adam.v)}};
}

nn::AdamState adam_from_json(const json& j, const nn::NetConfig& config) {
    nn::AdamState a;
    a.t = j.at("t").get<std::uint64_t>();
    a.beta1 = j.at("beta1").get<double>();
    a.beta2 = j.at("beta2").get<double>();
    a.epsilon = j.at("epsilon").get<double>();
    a.m = params_from_json(j.at("m"), config);
    a.v = params_from_json(j.at("v"), config);
    return a;
}

} // namespace ddqn::codec
