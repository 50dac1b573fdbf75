#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/vessel_graph.hpp"

#include <string>
#include <string_view>

namespace octagraph {

// Graph JSON, version "1". Top-level keys in order: version, source_id, dims,
// label, vessel_nodes, region_nodes, edges.
Json graph_to_json(const HeteroGraph& graph);
HeteroGraph graph_from_json(const Json& json);

std::string encode_graph(const HeteroGraph& graph);
HeteroGraph decode_graph(std::string_view bytes);

/// Structural checks shared by the decoder and tests.
void validate_graph(const HeteroGraph& graph);

}  // namespace octagraph
