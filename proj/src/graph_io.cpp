#include "octagraph/graph_io.hpp"

#include "octagraph/error.hpp"

#include <set>

namespace octagraph {

namespace {

Json point(double r, double c) { return Json::array({r, c}); }

RegionKind parse_kind(const std::string& s) {
    if (s == "FAZ") return RegionKind::FAZ;
    if (s == "ICA") return RegionKind::ICA;
    throw_schema("unknown region kind '" + s + "'");
}

Relation parse_relation(const std::string& s) {
    if (s == "touches") return Relation::Touches;
    if (s == "borders") return Relation::Borders;
    throw_schema("unknown relation '" + s + "'");
}

}  // namespace

Json graph_to_json(const HeteroGraph& g) {
    Json j;
    j["version"] = kFormatVersion;
    j["source_id"] = g.source_id;
    j["dims"] = Json::array({g.height, g.width});
    j["label"] = g.label ? Json(*g.label) : Json(nullptr);

    Json vessels = Json::array();
    for (const VesselNode& v : g.vessels) {
        Json n;
        n["id"] = v.id;
        Json path = Json::array();
        for (const Pixel& p : v.path) path.push_back(Json::array({p.row, p.col}));
        n["path"] = std::move(path);
        n["length"] = v.length;
        n["mean_radius"] = v.mean_radius;
        n["curvature"] = v.curvature;
        n["centroid"] = point(v.centroid_row, v.centroid_col);
        n["quadrant"] = v.quadrant;
        n["junctions"] = Json::array({v.junctions[0], v.junctions[1]});
        vessels.push_back(std::move(n));
    }
    j["vessel_nodes"] = std::move(vessels);

    Json regions = Json::array();
    for (const RegionNode& r : g.regions) {
        Json n;
        n["id"] = r.id;
        n["kind"] = to_string(r.kind);
        n["area"] = r.area;
        n["perimeter"] = r.perimeter;
        n["eccentricity"] = r.eccentricity;
        n["centroid"] = point(r.centroid_row, r.centroid_col);
        n["quadrant"] = r.quadrant;
        regions.push_back(std::move(n));
    }
    j["region_nodes"] = std::move(regions);

    Json edges = Json::array();
    for (const Edge& e : g.edges) {
        Json n;
        n["relation"] = to_string(e.relation);
        n["src"] = e.src;
        n["dst"] = e.dst;
        n["gate"] = e.gate;
        n["centroid_distance"] = e.centroid_distance;
        edges.push_back(std::move(n));
    }
    j["edges"] = std::move(edges);
    return j;
}

HeteroGraph graph_from_json(const Json& j) {
    require_version(j);
    HeteroGraph g;
    g.source_id = read_as<std::string>(j, "source_id");
    const auto dims = read_as<std::vector<int>>(j, "dims");
    if (dims.size() != 2) throw_schema("dims must have two entries");
    g.height = dims[0];
    g.width = dims[1];
    const Json& label = require(j, "label");
    if (!label.is_null()) g.label = read_as<int>(j, "label");

    try {
        for (const Json& n : require(j, "vessel_nodes")) {
            VesselNode v;
            v.id = read_as<int>(n, "id");
            for (const auto& p : require(n, "path")) v.path.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
            v.length = read_as<double>(n, "length");
            v.mean_radius = read_as<double>(n, "mean_radius");
            v.curvature = read_as<double>(n, "curvature");
            const auto c = read_as<std::vector<double>>(n, "centroid");
            if (c.size() != 2) throw_schema("centroid must have two entries");
            v.centroid_row = c[0];
            v.centroid_col = c[1];
            v.quadrant = read_as<int>(n, "quadrant");
            const auto jn = read_as<std::vector<int>>(n, "junctions");
            if (jn.size() != 2) throw_schema("junctions must have two entries");
            v.junctions = {jn[0], jn[1]};
            g.vessels.push_back(std::move(v));
        }
        for (const Json& n : require(j, "region_nodes")) {
            RegionNode r;
            r.id = read_as<int>(n, "id");
            r.kind = parse_kind(read_as<std::string>(n, "kind"));
            r.area = read_as<double>(n, "area");
            r.perimeter = read_as<double>(n, "perimeter");
            r.eccentricity = read_as<double>(n, "eccentricity");
            const auto c = read_as<std::vector<double>>(n, "centroid");
            if (c.size() != 2) throw_schema("centroid must have two entries");
            r.centroid_row = c[0];
            r.centroid_col = c[1];
            r.quadrant = read_as<int>(n, "quadrant");
            g.regions.push_back(r);
        }
        for (const Json& n : require(j, "edges")) {
            Edge e;
            e.relation = parse_relation(read_as<std::string>(n, "relation"));
            e.src = read_as<int>(n, "src");
            e.dst = read_as<int>(n, "dst");
            e.gate = read_as<double>(n, "gate");
            e.centroid_distance = read_as<double>(n, "centroid_distance");
            g.edges.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw_schema(std::string("malformed graph: ") + e.what());
    }
    validate_graph(g);
    return g;
}

void validate_graph(const HeteroGraph& g) {
    for (std::size_t i = 0; i < g.vessels.size(); ++i) {
        if (g.vessels[i].id != static_cast<int>(i)) throw_schema("vessel ids must be 0..n-1 in order");
    }
    int faz = 0;
    for (std::size_t i = 0; i < g.regions.size(); ++i) {
        if (g.regions[i].id != static_cast<int>(i)) throw_schema("region ids must be 0..n-1 in order");
        if (g.regions[i].kind == RegionKind::FAZ) ++faz;
    }
    if (faz > 1 || (!g.regions.empty() && faz != 1)) throw_schema("graph must have exactly one FAZ region");
    const int nv = static_cast<int>(g.vessels.size());
    const int nr = static_cast<int>(g.regions.size());
    std::set<std::tuple<int, int, int>> seen;
    for (const Edge& e : g.edges) {
        if (e.src < 0 || e.src >= nv) throw_schema("edge source out of range");
        if (e.relation == Relation::Touches) {
            if (e.dst < 0 || e.dst >= nv || e.src >= e.dst) throw_schema("touches edge must join vessels src < dst");
        } else if (e.dst < 0 || e.dst >= nr) {
            throw_schema("borders edge target out of range");
        }
        if (!(e.gate >= 0.0 && e.gate <= 1.0)) throw_schema("edge gate outside [0,1]");
        if (!seen.insert({static_cast<int>(e.relation), e.src, e.dst}).second) throw_schema("duplicate edge");
    }
    if (g.label && (*g.label < 0 || *g.label >= kNumClasses)) throw_schema("label out of range");
}

std::string encode_graph(const HeteroGraph& graph) { return dump_canonical(graph_to_json(graph)); }

HeteroGraph decode_graph(std::string_view bytes) { return graph_from_json(parse_json(bytes)); }

}  // namespace octagraph
