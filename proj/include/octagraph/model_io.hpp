#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/gnn.hpp"

#include <string>
#include <string_view>

namespace octagraph {

// Model JSON, version "1": config, normalization stats, then every tensor in
// for_each_tensor order with row-major data.
std::string encode_model(const ModelParams& params);
ModelParams decode_model(std::string_view bytes);

Json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const Json& json, ModelConfig defaults = {});

Json prediction_to_json(const std::string& source_id, const Prediction& prediction);
Prediction prediction_from_json(const Json& json);

}  // namespace octagraph
