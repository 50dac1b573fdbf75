#include "octagraph/attribution.hpp"

#include "octagraph/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace octagraph {

namespace {

void check_steps(int steps) {
    if (steps < 1) throw Error(ErrorCode::InvalidSteps, "steps must be >= 1, got " + std::to_string(steps));
}

double logit_of(const ModelParams& params, const GraphInput& input, const Eigen::VectorXd& gates, int cls) {
    return forward(params, input, gates).logits[cls];
}

int resolve_target(const ModelParams& params, const GraphInput& input, int target_class) {
    if (target_class < 0) return forward(params, input).predicted_class;
    if (target_class >= kNumClasses) throw Error(ErrorCode::OutOfRange, "target class " + std::to_string(target_class));
    return target_class;
}

PathResult make_path(double ig_sum, double f_input, double f_baseline) {
    return {f_input, f_baseline, ig_sum, completeness_residual(ig_sum, f_input, f_baseline)};
}

NodeKind kind_of(const RegionNode& r) { return r.kind == RegionKind::FAZ ? NodeKind::FAZ : NodeKind::ICA; }

NodeKind parse_kind(const std::string& s) {
    if (s == "vessel") return NodeKind::Vessel;
    if (s == "ICA") return NodeKind::ICA;
    if (s == "FAZ") return NodeKind::FAZ;
    throw_schema("unknown node kind '" + s + "'");
}

Json path_to_json(const PathResult& p) {
    Json j;
    j["f_input"] = p.f_input;
    j["f_baseline"] = p.f_baseline;
    j["ig_sum"] = p.ig_sum;
    j["residual"] = p.residual;
    return j;
}

PathResult path_from_json(const Json& j) {
    return {read_as<double>(j, "f_input"), read_as<double>(j, "f_baseline"), read_as<double>(j, "ig_sum"),
            read_as<double>(j, "residual")};
}

// Indices sorted by descending importance, ascending id on ties, truncated to k.
template <typename Importance>
std::vector<int> top_k(int n, int k, Importance importance) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double ia = importance(a);
        const double ib = importance(b);
        if (ia != ib) return ia > ib;
        return a < b;
    });
    if (k < n) order.resize(static_cast<std::size_t>(std::max(k, 0)));
    return order;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Vessel: return "vessel";
        case NodeKind::ICA: return "ICA";
        case NodeKind::FAZ: return "FAZ";
    }
    return "vessel";
}

double completeness_residual(double ig_sum, double f_input, double f_baseline) {
    const double delta = f_input - f_baseline;
    return std::abs(ig_sum - delta) / std::max(std::abs(delta), 1e-6);
}

Eigen::VectorXd integrated_gradients(const Eigen::VectorXd& input, const Eigen::VectorXd& baseline, int steps,
                                     const GradientFn& gradient) {
    check_steps(steps);
    if (input.size() != baseline.size()) throw Error(ErrorCode::ShapeMismatch, "input and baseline differ in length");
    const Eigen::VectorXd delta = input - baseline;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(input.size());
    for (int k = 1; k <= steps; ++k) {
        const double alpha = (k - 0.5) / steps;
        const Eigen::VectorXd g = gradient(baseline + alpha * delta);
        if (g.size() != input.size()) throw Error(ErrorCode::ShapeMismatch, "gradient length differs from input");
        sum += g;
    }
    return delta.cwiseProduct(sum) / steps;
}

std::vector<NodeAttribution> ig_nodes(const ModelParams& params, const HeteroGraph& graph, int target_class,
                                      int steps, PathResult* path) {
    check_steps(steps);
    const GraphInput input = prepare_input(params, graph);
    const int cls = resolve_target(params, input, target_class);

    const Eigen::Index nv_flat = input.vessel_x.size();
    const Eigen::Index nr_flat = input.region_x.size();
    Eigen::VectorXd x(nv_flat + nr_flat);
    x << Eigen::Map<const Eigen::VectorXd>(input.vessel_x.data(), nv_flat),
        Eigen::Map<const Eigen::VectorXd>(input.region_x.data(), nr_flat);
    GraphInput scaled = input;
    const Target target = Target::logit(cls);
    const Eigen::VectorXd ig = integrated_gradients(x, Eigen::VectorXd::Zero(x.size()), steps, [&](const Eigen::VectorXd& point) {
        Eigen::Map<Eigen::VectorXd>(scaled.vessel_x.data(), nv_flat) = point.head(nv_flat);
        Eigen::Map<Eigen::VectorXd>(scaled.region_x.data(), nr_flat) = point.tail(nr_flat);
        const Gradients g = gradients(params, scaled, input.gates, target);
        Eigen::VectorXd flat(point.size());
        flat << Eigen::Map<const Eigen::VectorXd>(g.vessel_x.data(), nv_flat),
            Eigen::Map<const Eigen::VectorXd>(g.region_x.data(), nr_flat);
        return flat;
    });

    std::vector<NodeAttribution> out;
    out.reserve(graph.node_count());
    double total = 0.0;
    const auto emit = [&](int index, NodeKind kind, int id, Eigen::Index offset) {
        NodeAttribution a{index, kind, id, {}, 0.0};
        for (int f = 0; f < kNodeFeatureDim; ++f) {
            a.ig[f] = ig[offset + f];
            a.importance += std::abs(a.ig[f]);
            total += a.ig[f];
        }
        out.push_back(a);
    };
    const int nv = static_cast<int>(graph.vessels.size());
    for (int i = 0; i < nv; ++i) emit(i, NodeKind::Vessel, graph.vessels[i].id, static_cast<Eigen::Index>(i) * kNodeFeatureDim);
    for (int i = 0; i < static_cast<int>(graph.regions.size()); ++i) {
        emit(nv + i, kind_of(graph.regions[i]), graph.regions[i].id, nv_flat + static_cast<Eigen::Index>(i) * kNodeFeatureDim);
    }

    if (path) {
        GraphInput baseline = input;
        baseline.vessel_x.setZero();
        baseline.region_x.setZero();
        *path = make_path(total, logit_of(params, input, input.gates, cls),
                          logit_of(params, baseline, input.gates, cls));
    }
    return out;
}

std::vector<EdgeAttribution> ig_edges(const ModelParams& params, const HeteroGraph& graph, int target_class,
                                      int steps, PathResult* path) {
    check_steps(steps);
    const GraphInput input = prepare_input(params, graph);
    const int cls = resolve_target(params, input, target_class);
    const Eigen::Index ne = input.gates.size();

    Eigen::VectorXd ig = Eigen::VectorXd::Zero(ne);
    if (ne > 0) {
        const Target target = Target::logit(cls);
        ig = integrated_gradients(input.gates, Eigen::VectorXd::Zero(ne), steps,
                                  [&](const Eigen::VectorXd& gates) { return gradients(params, input, gates, target).gates; });
    }

    std::vector<EdgeAttribution> out;
    out.reserve(static_cast<std::size_t>(ne));
    double total = 0.0;
    for (Eigen::Index e = 0; e < ne; ++e) {
        out.push_back({static_cast<int>(e), ig[e], std::abs(ig[e])});
        total += ig[e];
    }

    if (path) {
        const double f_input = logit_of(params, input, input.gates, cls);
        const double f_base = ne > 0 ? logit_of(params, input, Eigen::VectorXd::Zero(ne), cls) : f_input;
        *path = make_path(total, f_input, f_base);
    }
    return out;
}

AttributionReport attribute(const ModelParams& params, const HeteroGraph& graph, int target_class, int steps) {
    check_steps(steps);
    AttributionReport r;
    r.source_id = graph.source_id;
    r.height = graph.height;
    r.width = graph.width;
    r.target_class = resolve_target(params, prepare_input(params, graph), target_class);
    r.steps = steps;
    r.node_attributions = ig_nodes(params, graph, r.target_class, steps, &r.node_path);
    r.edge_attributions = ig_edges(params, graph, r.target_class, steps, &r.edge_path);
    return r;
}

Ranking rank_elements(const AttributionReport& report, int k) {
    const auto& nodes = report.node_attributions;
    const auto& edges = report.edge_attributions;
    Ranking out;
    for (int i : top_k(static_cast<int>(nodes.size()), k, [&](int i) { return nodes[i].importance; })) {
        out.nodes.push_back(nodes[i].index);
    }
    for (int i : top_k(static_cast<int>(edges.size()), k, [&](int i) { return edges[i].importance; })) {
        out.edges.push_back(edges[i].id);
    }
    return out;
}

GrayImage export_heatmap(const AttributionReport& report, const HeteroGraph& graph, const BinaryMask& mask) {
    if (mask.height != graph.height || mask.width != graph.width) {
        throw Error(ErrorCode::DimensionMismatch, "mask is " + std::to_string(mask.height) + "x" +
                                                      std::to_string(mask.width) + ", graph is " +
                                                      std::to_string(graph.height) + "x" + std::to_string(graph.width));
    }
    if (report.height != graph.height || report.width != graph.width ||
        report.node_attributions.size() != graph.node_count()) {
        throw Error(ErrorCode::DimensionMismatch, "report does not match graph '" + graph.source_id + "'");
    }
    const std::size_t nv = graph.vessels.size();
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
        const double v = report.node_attributions[i].importance;
        lo = i == 0 ? v : std::min(lo, v);
        hi = i == 0 ? v : std::max(hi, v);
    }
    GrayImage image(mask.height, mask.width);
    for (std::size_t i = 0; i < nv; ++i) {
        const double v = report.node_attributions[i].importance;
        const double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
        const auto level = static_cast<std::uint8_t>(std::lround(255.0 * t));
        for (const Pixel& p : graph.vessels[i].path) {
            std::uint8_t& px = image.at(p.row, p.col);
            px = std::max(px, level);
        }
    }
    return image;
}

Json report_to_json(const AttributionReport& r) {
    Json j;
    j["version"] = kFormatVersion;
    j["source_id"] = r.source_id;
    j["dims"] = {r.height, r.width};
    j["target_class"] = r.target_class;
    j["steps"] = r.steps;
    Json nodes = Json::array();
    for (const auto& a : r.node_attributions) {
        Json n;
        n["index"] = a.index;
        n["kind"] = to_string(a.kind);
        n["id"] = a.id;
        n["ig"] = a.ig;
        n["importance"] = a.importance;
        nodes.push_back(std::move(n));
    }
    j["node_attributions"] = std::move(nodes);
    Json edges = Json::array();
    for (const auto& a : r.edge_attributions) {
        Json e;
        e["id"] = a.id;
        e["ig"] = a.ig;
        e["importance"] = a.importance;
        edges.push_back(std::move(e));
    }
    j["edge_attributions"] = std::move(edges);
    j["completeness"] = {{"nodes", path_to_json(r.node_path)}, {"edges", path_to_json(r.edge_path)}};
    return j;
}

AttributionReport report_from_json(const Json& j) {
    require_version(j);
    AttributionReport r;
    r.source_id = read_as<std::string>(j, "source_id");
    const auto dims = read_as<std::array<int, 2>>(j, "dims");
    r.height = dims[0];
    r.width = dims[1];
    r.target_class = read_as<int>(j, "target_class");
    if (r.target_class < 0 || r.target_class >= kNumClasses) throw_schema("target_class out of range");
    r.steps = read_as<int>(j, "steps");
    const Json& nodes = require(j, "node_attributions");
    if (!nodes.is_array()) throw_schema("node_attributions must be an array");
    for (const Json& n : nodes) {
        NodeAttribution a;
        a.index = read_as<int>(n, "index");
        a.kind = parse_kind(read_as<std::string>(n, "kind"));
        a.id = read_as<int>(n, "id");
        a.ig = read_as<std::array<double, kNodeFeatureDim>>(n, "ig");
        a.importance = read_as<double>(n, "importance");
        if (a.index != static_cast<int>(r.node_attributions.size())) throw_schema("node attribution indices must be sequential");
        if (!(a.importance >= 0.0)) throw_schema("node importance must be >= 0");
        r.node_attributions.push_back(a);
    }
    const Json& edges = require(j, "edge_attributions");
    if (!edges.is_array()) throw_schema("edge_attributions must be an array");
    for (const Json& e : edges) {
        EdgeAttribution a;
        a.id = read_as<int>(e, "id");
        a.ig = read_as<double>(e, "ig");
        a.importance = read_as<double>(e, "importance");
        if (a.id != static_cast<int>(r.edge_attributions.size())) throw_schema("edge attribution ids must be sequential");
        if (!(a.importance >= 0.0)) throw_schema("edge importance must be >= 0");
        r.edge_attributions.push_back(a);
    }
    const Json& c = require(j, "completeness");
    r.node_path = path_from_json(require(c, "nodes"));
    r.edge_path = path_from_json(require(c, "edges"));
    return r;
}

std::string encode_report(const AttributionReport& report) { return dump_canonical(report_to_json(report)); }

AttributionReport decode_report(std::string_view bytes) { return report_from_json(parse_json(bytes)); }

}  // namespace octagraph
