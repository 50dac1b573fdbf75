#include "octagraph/knowledge_table.hpp"

#include "octagraph/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace octagraph {

namespace {

template <std::size_t N>
std::array<double, N> quantize_simplex(const std::array<double, N>& values, int decimals) {
    std::array<double, N> out{};
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = quantize(values[i], decimals);
        total += values[i];
    }
    const std::size_t big = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    double rest = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        if (i != big) rest += out[i];
    }
    out[big] = quantize(quantize(total, decimals) - rest, decimals);
    return out;
}

NodeKind kind_of(const RegionNode& r) { return r.kind == RegionKind::FAZ ? NodeKind::FAZ : NodeKind::ICA; }

NodeKind parse_kind(const std::string& s) {
    if (s == "vessel") return NodeKind::Vessel;
    if (s == "ICA") return NodeKind::ICA;
    if (s == "FAZ") return NodeKind::FAZ;
    throw_schema("unknown node kind '" + s + "'");
}

Relation parse_relation(const std::string& s) {
    if (s == "touches") return Relation::Touches;
    if (s == "borders") return Relation::Borders;
    throw_schema("unknown relation '" + s + "'");
}

Json class_json(int cls) { return {{"class", cls}, {"label", class_name(cls)}}; }

int read_class(const Json& j) {
    const int c = read_as<int>(j, "class");
    if (c < 0 || c >= kNumClasses) throw_schema("class out of range");
    return c;
}

int read_quadrant(const Json& j) {
    const int q = read_as<int>(j, "quadrant");
    if (q < 0 || q > 3) throw_schema("quadrant out of range");
    return q;
}

}  // namespace

std::array<double, 4> quantize_fractions(const std::array<double, 4>& values, int decimals) {
    return quantize_simplex(values, decimals);
}

std::array<double, kNumClasses> quantize_probabilities(const std::array<double, kNumClasses>& values, int decimals) {
    return quantize_simplex(values, decimals);
}

QuadrantDensities quadrant_densities(const HeteroGraph& g) {
    if (g.node_count() == 0) throw Error(ErrorCode::EmptyGraph, "graph '" + g.source_id + "' has no nodes");
    std::array<long, 4> nodes{};
    std::array<long, 4> edges{};
    for (const auto& v : g.vessels) ++nodes[quadrant_of(v.centroid_row, v.centroid_col, g.height, g.width)];
    for (const auto& r : g.regions) ++nodes[quadrant_of(r.centroid_row, r.centroid_col, g.height, g.width)];
    for (const auto& e : g.edges) {
        const auto [row, col] = g.edge_midpoint(e);
        ++edges[quadrant_of(row, col, g.height, g.width)];
    }
    QuadrantDensities d;
    const double nn = static_cast<double>(g.node_count());
    const double ne = static_cast<double>(g.edges.size());
    for (int q = 0; q < 4; ++q) {
        d.nodes[q] = nodes[q] / nn;
        d.edges[q] = ne > 0 ? edges[q] / ne : 0.0;
    }
    return d;
}

KnowledgeTable build_table(const HeteroGraph& graph, const AttributionReport& report, const Prediction& prediction,
                           int k) {
    if (report.source_id != graph.source_id) {
        throw Error(ErrorCode::Mismatch, "report '" + report.source_id + "' vs graph '" + graph.source_id + "'");
    }
    if (report.node_attributions.size() != graph.node_count() || report.edge_attributions.size() != graph.edges.size()) {
        throw Error(ErrorCode::Mismatch, "report element counts differ from graph '" + graph.source_id + "'");
    }
    const auto q = [](double x) { return quantize(x, kTableDecimals); };
    const int nv = static_cast<int>(graph.vessels.size());

    KnowledgeTable t;
    t.source_id = graph.source_id;
    t.height = graph.height;
    t.width = graph.width;
    t.vessel_count = nv;
    t.region_count = static_cast<int>(graph.regions.size());
    t.edge_count = static_cast<int>(graph.edges.size());
    const QuadrantDensities d = quadrant_densities(graph);
    t.node_density = quantize_fractions(d.nodes);
    t.edge_density = graph.edges.empty() ? d.edges : quantize_fractions(d.edges);

    for (const auto& r : graph.regions) {
        if (r.kind != RegionKind::FAZ) continue;
        t.faz = FazRecord{nv + r.id, q(r.area), q(r.perimeter), q(r.eccentricity), q(r.centroid_row),
                          q(r.centroid_col), r.quadrant};
    }

    const Ranking ranking = rank_elements(report, k);
    for (int index : ranking.nodes) {
        const NodeAttribution& a = report.node_attributions[static_cast<std::size_t>(index)];
        NodeRecord rec;
        rec.index = index;
        rec.importance = q(a.importance);
        std::array<double, kNodeFeatureDim> raw{};
        const std::array<std::string_view, kNodeFeatureDim>* names = nullptr;
        if (index < nv) {
            const VesselNode& v = graph.vessels[static_cast<std::size_t>(index)];
            rec.kind = NodeKind::Vessel;
            rec.id = v.id;
            rec.quadrant = v.quadrant;
            rec.centroid_row = q(v.centroid_row);
            rec.centroid_col = q(v.centroid_col);
            raw = vessel_features(v, graph.height, graph.width);
            names = &kVesselFeatureNames;
        } else {
            const RegionNode& r = graph.regions[static_cast<std::size_t>(index - nv)];
            rec.kind = kind_of(r);
            rec.id = r.id;
            rec.quadrant = r.quadrant;
            rec.centroid_row = q(r.centroid_row);
            rec.centroid_col = q(r.centroid_col);
            raw = region_features(r, graph.height, graph.width);
            names = &kRegionFeatureNames;
        }
        std::array<int, kNodeFeatureDim> order{};
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int x, int y) { return std::abs(a.ig[x]) > std::abs(a.ig[y]); });
        for (int f = 0; f < kTopFeatures; ++f) {
            const int i = order[f];
            rec.features.push_back({std::string((*names)[i]), q(raw[i]), q(a.ig[i])});
        }
        t.nodes.push_back(std::move(rec));
    }

    for (int id : ranking.edges) {
        const Edge& e = graph.edges[static_cast<std::size_t>(id)];
        const EdgeAttribution& a = report.edge_attributions[static_cast<std::size_t>(id)];
        const auto [row, col] = graph.edge_midpoint(e);
        EdgeRecord rec;
        rec.id = id;
        rec.relation = e.relation;
        rec.importance = q(a.importance);
        rec.ig = q(a.ig);
        rec.src = e.src;
        rec.dst = e.relation == Relation::Touches ? e.dst : nv + e.dst;
        rec.quadrant = quadrant_of(row, col, graph.height, graph.width);
        rec.centroid_distance = q(e.centroid_distance);
        t.edges.push_back(rec);
    }

    t.ground_truth = graph.label;
    t.predicted_class = prediction.predicted_class;
    t.probabilities = quantize_probabilities(prediction.probabilities);
    return t;
}

Json table_to_json(const KnowledgeTable& t) {
    Json j;
    j["version"] = kFormatVersion;
    j["source_id"] = t.source_id;
    j["dims"] = {t.height, t.width};
    Json graph_level;
    graph_level["vessel_count"] = t.vessel_count;
    graph_level["region_count"] = t.region_count;
    graph_level["edge_count"] = t.edge_count;
    graph_level["node_density"] = t.node_density;
    graph_level["edge_density"] = t.edge_density;
    graph_level["density_normalization"] = "fraction_of_total";
    j["graph_level"] = std::move(graph_level);
    if (t.faz) {
        const FazRecord& f = *t.faz;
        Json faz;
        faz["index"] = f.index;
        faz["area"] = f.area;
        faz["perimeter"] = f.perimeter;
        faz["eccentricity"] = f.eccentricity;
        faz["centroid"] = {f.centroid_row, f.centroid_col};
        faz["quadrant"] = f.quadrant;
        j["faz"] = std::move(faz);
    } else {
        j["faz"] = nullptr;
    }
    Json nodes = Json::array();
    for (const NodeRecord& n : t.nodes) {
        Json r;
        r["index"] = n.index;
        r["kind"] = to_string(n.kind);
        r["id"] = n.id;
        r["importance"] = n.importance;
        r["quadrant"] = n.quadrant;
        r["centroid"] = {n.centroid_row, n.centroid_col};
        Json features = Json::array();
        for (const FeatureRecord& f : n.features) features.push_back({{"name", f.name}, {"value", f.value}, {"ig", f.ig}});
        r["features"] = std::move(features);
        nodes.push_back(std::move(r));
    }
    j["nodes"] = std::move(nodes);
    Json edges = Json::array();
    for (const EdgeRecord& e : t.edges) {
        Json r;
        r["id"] = e.id;
        r["relation"] = to_string(e.relation);
        r["importance"] = e.importance;
        r["ig"] = e.ig;
        r["endpoints"] = {e.src, e.dst};
        r["quadrant"] = e.quadrant;
        r["centroid_distance"] = e.centroid_distance;
        edges.push_back(std::move(r));
    }
    j["edges"] = std::move(edges);
    j["ground_truth"] = t.ground_truth ? class_json(*t.ground_truth) : Json(nullptr);
    Json pred = class_json(t.predicted_class);
    pred["probabilities"] = t.probabilities;
    j["prediction"] = std::move(pred);
    return j;
}

KnowledgeTable table_from_json(const Json& j) {
    require_version(j);
    KnowledgeTable t;
    t.source_id = read_as<std::string>(j, "source_id");
    const auto dims = read_as<std::array<int, 2>>(j, "dims");
    t.height = dims[0];
    t.width = dims[1];
    const Json& gl = require(j, "graph_level");
    t.vessel_count = read_as<int>(gl, "vessel_count");
    t.region_count = read_as<int>(gl, "region_count");
    t.edge_count = read_as<int>(gl, "edge_count");
    t.node_density = read_as<std::array<double, 4>>(gl, "node_density");
    t.edge_density = read_as<std::array<double, 4>>(gl, "edge_density");
    const Json& faz = require(j, "faz");
    if (!faz.is_null()) {
        FazRecord f;
        f.index = read_as<int>(faz, "index");
        f.area = read_as<double>(faz, "area");
        f.perimeter = read_as<double>(faz, "perimeter");
        f.eccentricity = read_as<double>(faz, "eccentricity");
        const auto c = read_as<std::array<double, 2>>(faz, "centroid");
        f.centroid_row = c[0];
        f.centroid_col = c[1];
        f.quadrant = read_quadrant(faz);
        t.faz = f;
    }
    const Json& nodes = require(j, "nodes");
    if (!nodes.is_array()) throw_schema("nodes must be an array");
    for (const Json& r : nodes) {
        NodeRecord n;
        n.index = read_as<int>(r, "index");
        n.kind = parse_kind(read_as<std::string>(r, "kind"));
        n.id = read_as<int>(r, "id");
        n.importance = read_as<double>(r, "importance");
        n.quadrant = read_quadrant(r);
        const auto c = read_as<std::array<double, 2>>(r, "centroid");
        n.centroid_row = c[0];
        n.centroid_col = c[1];
        const Json& features = require(r, "features");
        if (!features.is_array()) throw_schema("features must be an array");
        for (const Json& f : features) {
            n.features.push_back({read_as<std::string>(f, "name"), read_as<double>(f, "value"), read_as<double>(f, "ig")});
        }
        t.nodes.push_back(std::move(n));
    }
    const Json& edges = require(j, "edges");
    if (!edges.is_array()) throw_schema("edges must be an array");
    for (const Json& r : edges) {
        EdgeRecord e;
        e.id = read_as<int>(r, "id");
        e.relation = parse_relation(read_as<std::string>(r, "relation"));
        e.importance = read_as<double>(r, "importance");
        e.ig = read_as<double>(r, "ig");
        const auto ends = read_as<std::array<int, 2>>(r, "endpoints");
        e.src = ends[0];
        e.dst = ends[1];
        e.quadrant = read_quadrant(r);
        e.centroid_distance = read_as<double>(r, "centroid_distance");
        t.edges.push_back(e);
    }
    const Json& gt = require(j, "ground_truth");
    if (!gt.is_null()) t.ground_truth = read_class(gt);
    const Json& pred = require(j, "prediction");
    t.predicted_class = read_class(pred);
    t.probabilities = read_as<std::array<double, kNumClasses>>(pred, "probabilities");
    return t;
}

std::string encode_table(const KnowledgeTable& table) { return dump_canonical(table_to_json(table), kTableDecimals); }

KnowledgeTable decode_table(std::string_view bytes) { return table_from_json(parse_json(bytes)); }

}  // namespace octagraph
