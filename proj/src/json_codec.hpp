#pragma once

// JSON encoding of network parameters and optimizer state, shared by the
// network and agent checkpoint formats.

#include "ddqn/neural_net.hpp"

#include "json.hpp"

namespace ddqn::codec {

using nlohmann::json;

json to_json(const nn::NetConfig& config);
nn::NetConfig net_config_from_json(const json& j);

// Layers as {in, out, weights (row-major [in x out]), biases}.
json layers_to_json(const nn::NetParams& params);
nn::NetParams params_from_json(const json& layers, const nn::NetConfig& config);

json to_json(const nn::AdamState& adam);
nn::AdamState adam_from_json(const json& j, const nn::NetConfig& config);

} // namespace ddqn::codec
