#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/gnn.hpp"
#include "octagraph/mask.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace octagraph {

inline constexpr int kDefaultIgSteps = 64;

enum class NodeKind { Vessel, ICA, FAZ };
std::string_view to_string(NodeKind kind);

/// Per-node IG over the normalized feature vector. `index` is the global node
/// index: vessels first, then regions offset by the vessel count.
struct NodeAttribution {
    int index = 0;
    NodeKind kind = NodeKind::Vessel;
    int id = 0;
    std::array<double, kNodeFeatureDim> ig{};
    double importance = 0.0;  // sum of |ig|

    friend bool operator==(const NodeAttribution&, const NodeAttribution&) = default;
};

/// Gate IG for one edge; `id` is the position in HeteroGraph::edges.
struct EdgeAttribution {
    int id = 0;
    double ig = 0.0;
    double importance = 0.0;  // |ig|

    friend bool operator==(const EdgeAttribution&, const EdgeAttribution&) = default;
};

/// One integrated-gradients path: attributions plus the completeness check.
struct PathResult {
    double f_input = 0.0;
    double f_baseline = 0.0;
    double ig_sum = 0.0;
    double residual = 0.0;  // |ig_sum - (f_input - f_baseline)| / max(|f_input - f_baseline|, 1e-6)

    friend bool operator==(const PathResult&, const PathResult&) = default;
};

struct AttributionReport {
    std::string source_id;
    int height = 0;
    int width = 0;
    int target_class = 0;
    int steps = 0;
    std::vector<NodeAttribution> node_attributions;
    std::vector<EdgeAttribution> edge_attributions;
    PathResult node_path;
    PathResult edge_path;

    double completeness_residual_nodes() const { return node_path.residual; }
    double completeness_residual_edges() const { return edge_path.residual; }

    friend bool operator==(const AttributionReport&, const AttributionReport&) = default;
};

double completeness_residual(double ig_sum, double f_input, double f_baseline);

using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Midpoint Riemann sum: (x - b) * (1/m) sum_k grad f(b + ((k - 0.5)/m)(x - b)).
Eigen::VectorXd integrated_gradients(const Eigen::VectorXd& input, const Eigen::VectorXd& baseline, int steps,
                                     const GradientFn& gradient);

/// Feature path from the all-zero normalized baseline to the input, gates held.
std::vector<NodeAttribution> ig_nodes(const ModelParams& params, const HeteroGraph& graph, int target_class,
                                      int steps, PathResult* path = nullptr);

/// Gate path from all gates 0 (edges absent) to the input gates, features held.
std::vector<EdgeAttribution> ig_edges(const ModelParams& params, const HeteroGraph& graph, int target_class,
                                      int steps, PathResult* path = nullptr);

/// Both paths. A negative target_class selects the predicted class.
AttributionReport attribute(const ModelParams& params, const HeteroGraph& graph, int target_class = -1,
                            int steps = kDefaultIgSteps);

struct Ranking {
    std::vector<int> nodes;  // global node indices
    std::vector<int> edges;  // edge ids
};

/// Descending importance, ties by ascending id; k beyond the population returns everything.
Ranking rank_elements(const AttributionReport& report, int k);

/// Paints each vessel segment with its min-max normalized importance (0-255).
GrayImage export_heatmap(const AttributionReport& report, const HeteroGraph& graph, const BinaryMask& mask);

Json report_to_json(const AttributionReport& report);
AttributionReport report_from_json(const Json& json);
std::string encode_report(const AttributionReport& report);
AttributionReport decode_report(std::string_view bytes);

}  // namespace octagraph
