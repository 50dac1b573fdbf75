#include "octagraph/vessel_graph.hpp"

#include "octagraph/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <set>
#include <tuple>

namespace octagraph {

namespace {

constexpr std::array<int, 8> kDr = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::array<int, 8> kDc = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 4> k4Dr = {-1, 0, 1, 0};
constexpr std::array<int, 4> k4Dc = {0, 1, 0, -1};

std::size_t idx(int r, int c, int w) { return static_cast<std::size_t>(r) * w + c; }

double step_length(const Pixel& a, const Pixel& b) {
    return (a.row != b.row && a.col != b.col) ? std::sqrt(2.0) : 1.0;
}

double euclid(double r0, double c0, double r1, double c1) { return std::hypot(r0 - r1, c0 - c1); }

struct Trace {
    std::vector<Pixel> path;
    std::array<int, 2> junctions{-1, -1};
};

}  // namespace

std::string_view class_name(int label) {
    switch (label) {
        case 0: return "Healthy";
        case 1: return "NPDR";
        case 2: return "PDR";
        default: throw Error(ErrorCode::OutOfRange, "class index " + std::to_string(label));
    }
}

int parse_class(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (lower == "healthy" || lower == "0") return 0;
    if (lower == "npdr" || lower == "1") return 1;
    if (lower == "pdr" || lower == "2") return 2;
    throw Error(ErrorCode::OutOfRange, "unknown class '" + std::string(text) + "'");
}

std::string_view to_string(RegionKind kind) { return kind == RegionKind::FAZ ? "FAZ" : "ICA"; }
std::string_view to_string(Relation relation) { return relation == Relation::Touches ? "touches" : "borders"; }

std::pair<double, double> HeteroGraph::edge_midpoint(const Edge& e) const {
    const VesselNode& a = vessels.at(e.src);
    if (e.relation == Relation::Touches) {
        const VesselNode& b = vessels.at(e.dst);
        return {(a.centroid_row + b.centroid_row) / 2.0, (a.centroid_col + b.centroid_col) / 2.0};
    }
    const RegionNode& b = regions.at(e.dst);
    return {(a.centroid_row + b.centroid_row) / 2.0, (a.centroid_col + b.centroid_col) / 2.0};
}

std::vector<VesselNode> extract_segments(const Skeleton& s, const BinaryMask& mask) {
    const int w = s.width;
    std::vector<std::uint8_t> visited(s.grid.size(), 0);
    auto terminal = [&](int r, int c) { return s.junction_at(r, c) >= 0 || s.neighbor_count(r, c) <= 1; };

    std::vector<Trace> traces;
    for (const Pixel& t : s.skeletal_pixels) {
        if (!terminal(t.row, t.col)) continue;
        const int tj = s.junction_at(t.row, t.col);
        for (int d = 0; d < 8; ++d) {
            const Pixel n{t.row + kDr[d], t.col + kDc[d]};
            if (!s.at(n.row, n.col)) continue;
            if (terminal(n.row, n.col)) {
                if (tj >= 0 && tj == s.junction_at(n.row, n.col)) continue;
                if (n < t) continue;
                traces.push_back({{t, n}, {tj, s.junction_at(n.row, n.col)}});
                continue;
            }
            if (visited[idx(n.row, n.col, w)]) continue;

            Trace tr;
            tr.path = {t};
            tr.junctions[0] = tj;
            Pixel prev = t;
            Pixel cur = n;
            while (true) {
                tr.path.push_back(cur);
                if (terminal(cur.row, cur.col)) {
                    tr.junctions[1] = s.junction_at(cur.row, cur.col);
                    break;
                }
                if (visited[idx(cur.row, cur.col, w)]) break;
                visited[idx(cur.row, cur.col, w)] = 1;
                std::optional<Pixel> next;
                for (int k = 0; k < 8; ++k) {
                    const Pixel q{cur.row + kDr[k], cur.col + kDc[k]};
                    if (q == prev || !s.at(q.row, q.col)) continue;
                    next = q;
                    break;
                }
                if (!next) break;
                prev = cur;
                cur = *next;
            }
            traces.push_back(std::move(tr));
        }
    }

    // Whatever remains unvisited are closed loops without junctions or ends.
    for (const Pixel& p : s.skeletal_pixels) {
        if (terminal(p.row, p.col) || visited[idx(p.row, p.col, w)]) continue;
        Trace tr;
        tr.path = {p};
        visited[idx(p.row, p.col, w)] = 1;
        Pixel prev = p;
        std::optional<Pixel> cur;
        for (int k = 0; k < 8; ++k) {
            const Pixel q{p.row + kDr[k], p.col + kDc[k]};
            if (s.at(q.row, q.col) && (!cur || q < *cur)) cur = q;
        }
        while (cur && *cur != p) {
            tr.path.push_back(*cur);
            visited[idx(cur->row, cur->col, w)] = 1;
            std::optional<Pixel> next;
            for (int k = 0; k < 8; ++k) {
                const Pixel q{cur->row + kDr[k], cur->col + kDc[k]};
                if (q == prev || !s.at(q.row, q.col)) continue;
                if (q == p || !visited[idx(q.row, q.col, w)]) {
                    next = q;
                    break;
                }
            }
            prev = *cur;
            cur = next;
        }
        tr.path.push_back(p);
        traces.push_back(std::move(tr));
    }

    for (Trace& tr : traces) {
        auto& path = tr.path;
        const bool closed = path.front() == path.back();
        const bool flip = closed ? (path.size() > 2 && path[path.size() - 2] < path[1]) : (path.back() < path.front());
        if (flip) {
            std::reverse(path.begin(), path.end());
            std::swap(tr.junctions[0], tr.junctions[1]);
        }
    }
    std::sort(traces.begin(), traces.end(), [](const Trace& a, const Trace& b) { return a.path < b.path; });

    const std::vector<double> dt = distance_transform(mask);
    std::vector<VesselNode> nodes;
    nodes.reserve(traces.size());
    for (Trace& tr : traces) {
        VesselNode node;
        node.id = static_cast<int>(nodes.size());
        node.path = std::move(tr.path);
        node.junctions = tr.junctions;
        const auto& path = node.path;
        for (std::size_t i = 1; i < path.size(); ++i) node.length += step_length(path[i - 1], path[i]);
        const bool closed = path.size() > 1 && path.front() == path.back();
        const std::size_t unique = closed ? path.size() - 1 : path.size();
        double radius = 0.0, sr = 0.0, sc = 0.0;
        for (std::size_t i = 0; i < unique; ++i) {
            radius += dt[idx(path[i].row, path[i].col, mask.width)];
            sr += path[i].row;
            sc += path[i].col;
        }
        node.mean_radius = radius / static_cast<double>(unique);
        node.centroid_row = sr / static_cast<double>(unique);
        node.centroid_col = sc / static_cast<double>(unique);
        const double chord = euclid(path.front().row, path.front().col, path.back().row, path.back().col);
        node.curvature = node.length / std::max(chord, 1.0) - 1.0;
        node.quadrant = quadrant_of(node.centroid_row, node.centroid_col, mask.height, mask.width);
        nodes.push_back(std::move(node));
    }
    return nodes;
}

LabeledRegions label_regions(const BinaryMask& mask, int min_area) {
    const int h = mask.height;
    const int w = mask.width;
    LabeledRegions out;
    out.height = h;
    out.width = w;
    out.label_map.assign(mask.pixels.size(), -1);

    std::vector<int> comp(mask.pixels.size(), -1);
    int next_comp = 0;
    std::vector<Pixel> members;
    std::deque<Pixel> queue;
    for (int r0 = 0; r0 < h; ++r0) {
        for (int c0 = 0; c0 < w; ++c0) {
            if (mask.at(r0, c0) || comp[idx(r0, c0, w)] >= 0) continue;
            members.clear();
            bool touches_border = false;
            comp[idx(r0, c0, w)] = next_comp;
            queue.push_back({r0, c0});
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                members.push_back(p);
                if (p.row == 0 || p.col == 0 || p.row == h - 1 || p.col == w - 1) touches_border = true;
                for (int d = 0; d < 4; ++d) {
                    const int rr = p.row + k4Dr[d];
                    const int cc = p.col + k4Dc[d];
                    if (!mask.in_bounds(rr, cc) || mask.at(rr, cc) || comp[idx(rr, cc, w)] >= 0) continue;
                    comp[idx(rr, cc, w)] = next_comp;
                    queue.push_back({rr, cc});
                }
            }
            ++next_comp;
            if (touches_border || static_cast<int>(members.size()) < min_area) continue;

            RegionNode node;
            node.id = static_cast<int>(out.nodes.size());
            node.area = static_cast<double>(members.size());
            double sr = 0.0, sc = 0.0;
            for (const Pixel& p : members) {
                sr += p.row;
                sc += p.col;
                out.label_map[idx(p.row, p.col, w)] = node.id;
            }
            const double n = node.area;
            node.centroid_row = sr / n;
            node.centroid_col = sc / n;
            double srr = 0.0, scc = 0.0, src = 0.0;
            for (const Pixel& p : members) {
                const double dr = p.row - node.centroid_row;
                const double dc = p.col - node.centroid_col;
                srr += dr * dr;
                scc += dc * dc;
                src += dr * dc;
            }
            srr /= n;
            scc /= n;
            src /= n;
            const double mean = (srr + scc) / 2.0;
            const double spread = std::sqrt(((srr - scc) / 2.0) * ((srr - scc) / 2.0) + src * src);
            const double l1 = mean + spread;
            const double l2 = std::max(mean - spread, 0.0);
            node.eccentricity = l1 <= 0.0 ? 0.0 : std::clamp(std::sqrt(std::max(0.0, 1.0 - l2 / l1)), 0.0, 1.0);
            node.quadrant = quadrant_of(node.centroid_row, node.centroid_col, h, w);
            out.nodes.push_back(node);
        }
    }
    // Perimeter needs the final label map so neighbouring regions count as "other".
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int id = out.label_map[idx(r, c, w)];
            if (id < 0) continue;
            for (int d = 0; d < 4; ++d) {
                const int rr = r + k4Dr[d];
                const int cc = c + k4Dc[d];
                if (!mask.in_bounds(rr, cc) || out.label_map[idx(rr, cc, w)] != id) out.nodes[id].perimeter += 1.0;
            }
        }
    }
    return out;
}

int identify_faz(LabeledRegions& regions) {
    if (regions.nodes.empty()) throw Error(ErrorCode::NoFazCandidate, "no enclosed regions to choose from");
    const int cr = regions.height / 2;
    const int cc = regions.width / 2;
    int faz = regions.label_map.empty() ? -1 : regions.label_map[idx(cr, cc, regions.width)];
    if (faz < 0) {
        double best = std::numeric_limits<double>::infinity();
        for (const RegionNode& node : regions.nodes) {
            const double d = euclid(node.centroid_row, node.centroid_col, cr, cc);
            if (d < best) {
                best = d;
                faz = node.id;
            }
        }
    }
    for (RegionNode& node : regions.nodes) node.kind = node.id == faz ? RegionKind::FAZ : RegionKind::ICA;
    return faz;
}

HeteroGraph build_graph(const std::vector<VesselNode>& vessels, const LabeledRegions& regions, const BinaryMask& mask) {
    if (vessels.empty()) throw Error(ErrorCode::EmptyGraph, "graph '" + mask.source_id + "' has no vessel segments");
    if (regions.height != mask.height || regions.width != mask.width) {
        throw Error(ErrorCode::DimensionMismatch, "region map does not match mask dimensions");
    }
    const int h = mask.height;
    const int w = mask.width;
    HeteroGraph g;
    g.height = h;
    g.width = w;
    g.source_id = mask.source_id;
    g.vessels = vessels;
    g.regions = regions.nodes;
    for (auto& v : g.vessels) v.quadrant = quadrant_of(v.centroid_row, v.centroid_col, h, w);
    for (auto& r : g.regions) r.quadrant = quadrant_of(r.centroid_row, r.centroid_col, h, w);

    for (std::size_t i = 0; i < g.vessels.size(); ++i) {
        for (std::size_t j = i + 1; j < g.vessels.size(); ++j) {
            const auto& a = g.vessels[i].junctions;
            const auto& b = g.vessels[j].junctions;
            bool shared = false;
            for (int ja : a) {
                for (int jb : b) shared = shared || (ja >= 0 && ja == jb);
            }
            if (shared) g.edges.push_back({Relation::Touches, static_cast<int>(i), static_cast<int>(j), 1.0, 0.0});
        }
    }

    // Each vessel pixel belongs to the segment whose centerline reaches it first
    // (geodesic BFS inside the vessel); a region borders every segment owning a
    // vessel pixel 8-adjacent to it.
    std::vector<int> owner(mask.pixels.size(), -1);
    std::deque<Pixel> queue;
    for (const VesselNode& v : g.vessels) {
        for (const Pixel& p : v.path) {
            auto& o = owner[idx(p.row, p.col, w)];
            if (o < 0) {
                o = v.id;
                queue.push_back(p);
            }
        }
    }
    while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        const int o = owner[idx(p.row, p.col, w)];
        for (int d = 0; d < 8; ++d) {
            const int rr = p.row + kDr[d];
            const int cc = p.col + kDc[d];
            if (!mask.in_bounds(rr, cc) || !mask.at(rr, cc) || owner[idx(rr, cc, w)] >= 0) continue;
            owner[idx(rr, cc, w)] = o;
            queue.push_back({rr, cc});
        }
    }
    std::set<std::pair<int, int>> borders;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int region = regions.label_map[idx(r, c, w)];
            if (region < 0) continue;
            for (int d = 0; d < 8; ++d) {
                const int rr = r + kDr[d];
                const int cc = c + kDc[d];
                if (!mask.in_bounds(rr, cc)) continue;
                const int o = owner[idx(rr, cc, w)];
                if (o >= 0) borders.insert({o, region});
            }
        }
    }
    for (const auto& [v, region] : borders) g.edges.push_back({Relation::Borders, v, region, 1.0, 0.0});

    for (Edge& e : g.edges) {
        const VesselNode& a = g.vessels[e.src];
        if (e.relation == Relation::Touches) {
            const VesselNode& b = g.vessels[e.dst];
            e.centroid_distance = euclid(a.centroid_row, a.centroid_col, b.centroid_row, b.centroid_col);
        } else {
            const RegionNode& b = g.regions[e.dst];
            e.centroid_distance = euclid(a.centroid_row, a.centroid_col, b.centroid_row, b.centroid_col);
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
        return std::tuple(static_cast<int>(a.relation), a.src, a.dst) < std::tuple(static_cast<int>(b.relation), b.src, b.dst);
    });
    return g;
}

HeteroGraph graph_from_mask(const BinaryMask& mask, const GraphOptions& options, std::optional<int> label) {
    const Skeleton skeleton = skeletonize(mask);
    const std::vector<VesselNode> vessels = extract_segments(skeleton, mask);
    LabeledRegions regions = label_regions(mask, options.min_region_area);
    if (!regions.nodes.empty()) identify_faz(regions);
    HeteroGraph g = build_graph(vessels, regions, mask);
    g.label = label;
    return g;
}

std::array<double, kNodeFeatureDim> vessel_features(const VesselNode& node, int height, int width) {
    return {node.length, node.mean_radius, node.curvature, node.centroid_col / width, node.centroid_row / height};
}

std::array<double, kNodeFeatureDim> region_features(const RegionNode& node, int height, int width) {
    return {node.area, node.perimeter, node.eccentricity, node.centroid_col / width, node.centroid_row / height};
}

}  // namespace octagraph
