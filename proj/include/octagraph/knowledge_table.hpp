#pragma once

#include "octagraph/attribution.hpp"
#include "octagraph/canonical_json.hpp"
#include "octagraph/gnn.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace octagraph {

inline constexpr int kDefaultTopK = 10;
inline constexpr int kTableDecimals = 6;
inline constexpr int kTopFeatures = 3;

struct FeatureRecord {
    std::string name;
    double value = 0.0;  // raw (unnormalized) feature value
    double ig = 0.0;

    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct NodeRecord {
    int index = 0;  // global node index
    NodeKind kind = NodeKind::Vessel;
    int id = 0;
    double importance = 0.0;
    int quadrant = 0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    std::vector<FeatureRecord> features;  // largest |IG| first

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct EdgeRecord {
    int id = 0;
    Relation relation = Relation::Touches;
    double importance = 0.0;
    double ig = 0.0;
    int src = 0;  // global node indices of the endpoints
    int dst = 0;
    int quadrant = 0;
    double centroid_distance = 0.0;

    friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

struct FazRecord {
    int index = 0;
    double area = 0.0;
    double perimeter = 0.0;
    double eccentricity = 0.0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    int quadrant = 0;

    friend bool operator==(const FazRecord&, const FazRecord&) = default;
};

struct KnowledgeTable {
    std::string source_id;
    int height = 0;
    int width = 0;
    int vessel_count = 0;
    int region_count = 0;
    int edge_count = 0;
    std::array<double, 4> node_density{};
    std::array<double, 4> edge_density{};
    std::optional<FazRecord> faz;
    std::vector<NodeRecord> nodes;
    std::vector<EdgeRecord> edges;
    std::optional<int> ground_truth;
    int predicted_class = 0;
    std::array<double, kNumClasses> probabilities{};

    friend bool operator==(const KnowledgeTable&, const KnowledgeTable&) = default;
};

struct QuadrantDensities {
    std::array<double, 4> nodes{};
    std::array<double, 4> edges{};  // all zero for an edgeless graph
};

/// Fractions of nodes (all kinds) and edges per quadrant, normalized by total count.
QuadrantDensities quadrant_densities(const HeteroGraph& graph);

/// Rounds each entry to `decimals` places, then re-derives the largest entry so
/// the rounded values still sum to the original total.
std::array<double, 4> quantize_fractions(const std::array<double, 4>& values, int decimals = kTableDecimals);
std::array<double, kNumClasses> quantize_probabilities(const std::array<double, kNumClasses>& values,
                                                       int decimals = kTableDecimals);

KnowledgeTable build_table(const HeteroGraph& graph, const AttributionReport& report, const Prediction& prediction,
                           int k = kDefaultTopK);

Json table_to_json(const KnowledgeTable& table);
KnowledgeTable table_from_json(const Json& json);
/// Canonical JSON with every real printed to six decimals.
std::string encode_table(const KnowledgeTable& table);
KnowledgeTable decode_table(std::string_view bytes);

}  // namespace octagraph
