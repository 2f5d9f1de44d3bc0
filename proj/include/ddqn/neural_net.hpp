#pragma once

#include "ddqn/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace ddqn::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Fully connected Q-network: ReLU hidden layers, inverted dropout after the
// last hidden layer, linear output.
struct NetConfig {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_dims{64, 64};
    std::size_t output_dim = 3;
    double dropout_rate = 0.1;
    double l2_activity = 1e-6;
    std::uint64_t seed = 0;

    void validate() const;
    bool same_shape(const NetConfig& other) const;
};

struct Layer {
    Matrix weights;   // [in x out]
    RowVector biases; // [out]
};

struct NetParams {
    NetConfig config;
    std::vector<Layer> layers;

    bool all_finite() const;
};

// Sum of in*out + out over all layers.
std::size_t param_count(const NetConfig& config);

// He-uniform weights (limit sqrt(6 / fan_in)), zero biases; deterministic per seed.
NetParams init(const NetConfig& config);

// All-zero parameters with the config's shapes (gradient accumulators, Adam moments).
NetParams zeros_like(const NetConfig& config);

enum class Mode { Train, Eval };

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre_activations; // one per hidden layer
    std::vector<Matrix> activations;     // post-ReLU, before dropout
    Matrix dropout_mask;                 // scaled keep-mask, empty when dropout is off
};

struct ForwardResult {
    Matrix q; // [batch x output_dim]
    std::optional<ForwardCache> cache;
};

// Eval mode is deterministic and ignores rng. Train mode draws fresh dropout
// masks from rng (required when dropout_rate > 0) and returns the cache.
ForwardResult forward(const NetParams& params, const Matrix& states, Mode mode, Rng* rng = nullptr);

// Eval-mode forward of a single state.
Eigen::RowVectorXd q_values(const NetParams& params, std::span<const double> state);

struct LossAndGrads {
    double loss = 0.0;
    double td_loss = 0.0;
    double activity_penalty = 0.0;
    NetParams grads;
};

// loss = mean_i (y_i - Q(s_i, a_i))^2 + l2_activity * mean_i sum_k h_ik^2 over
// all hidden activations. With dropout_rng == nullptr the forward pass runs
// without dropout.
LossAndGrads loss_and_grads(const NetParams& params, const Matrix& states, std::span<const std::uint8_t> actions,
                            std::span<const double> targets, Rng* dropout_rng);

struct AdamState {
    NetParams m;
    NetParams v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState adam_init(const NetConfig& config);

// Bias-corrected Adam update of params in place.
void adam_step(NetParams& params, const NetParams& grads, AdamState& adam, double lr);

// Deep copy (NetParams is a value type; this names the intent).
inline NetParams clone(const NetParams& params) { return params; }

void save_net(const NetParams& params, const std::filesystem::path& path);
NetParams load_net(const std::filesystem::path& path);

inline constexpr int kNetFormatVersion = 1;

} // namespace ddqn::nn
