#include "octagraph/retrieval.hpp"

#include "octagraph/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace octagraph {

namespace {

std::array<double, 8> unit(const std::array<double, 8>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return v;
    std::array<double, 8> out{};
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

}  // namespace

DistributionVector distribution_vector(const HeteroGraph& g) {
    DistributionVector d;
    d.source_id = g.source_id;
    d.label = g.label;
    for (const auto& v : g.vessels) d.values[quadrant_of(v.centroid_row, v.centroid_col, g.height, g.width)] += 1.0;
    for (const auto& r : g.regions) d.values[quadrant_of(r.centroid_row, r.centroid_col, g.height, g.width)] += 1.0;
    for (const auto& e : g.edges) {
        const auto [row, col] = g.edge_midpoint(e);
        d.values[4 + quadrant_of(row, col, g.height, g.width)] += 1.0;
    }
    return d;
}

CaseIndex build_index(std::vector<CaseEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const CaseEntry& a, const CaseEntry& b) { return a.vector.source_id < b.vector.source_id; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].vector.source_id == entries[i - 1].vector.source_id) {
            throw Error(ErrorCode::DuplicateSourceId, "duplicate source_id '" + entries[i].vector.source_id + "'");
        }
    }
    return CaseIndex{std::move(entries)};
}

double euclidean(const std::array<double, 8>& a, const std::array<double, 8>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<Match> query_top_k(const CaseIndex& index, const DistributionVector& query, int k, bool l2_normalized) {
    if (index.entries.empty()) throw Error(ErrorCode::EmptyIndex, "case index is empty");
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1, got " + std::to_string(k));
    const auto q = l2_normalized ? unit(query.values) : query.values;

    // Bounded max-heap keyed on (distance, source_id): the top is the worst kept match.
    const auto worse = [&](const Match& a, const Match& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.source_id < b.source_id;
    };
    std::priority_queue<Match, std::vector<Match>, decltype(worse)> heap(worse);
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        const CaseEntry& e = index.entries[i];
        if (e.vector.source_id == query.source_id) continue;
        const double d = euclidean(q, l2_normalized ? unit(e.vector.values) : e.vector.values);
        Match m{i, e.vector.source_id, d};
        if (static_cast<int>(heap.size()) < k) {
            heap.push(std::move(m));
        } else if (worse(m, heap.top())) {
            heap.pop();
            heap.push(std::move(m));
        }
    }
    std::vector<Match> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

Json index_to_json(const CaseIndex& index) {
    Json j;
    j["version"] = kFormatVersion;
    Json entries = Json::array();
    for (const CaseEntry& e : index.entries) {
        Json r;
        r["source_id"] = e.vector.source_id;
        r["label"] = e.vector.label ? Json(*e.vector.label) : Json(nullptr);
        r["vector"] = e.vector.values;
        r["image"] = e.image;
        r["graph"] = e.graph;
        r["table"] = e.table;
        entries.push_back(std::move(r));
    }
    j["entries"] = std::move(entries);
    return j;
}

CaseIndex index_from_json(const Json& j) {
    require_version(j);
    const Json& entries = require(j, "entries");
    if (!entries.is_array()) throw_schema("entries must be an array");
    std::vector<CaseEntry> out;
    for (const Json& r : entries) {
        CaseEntry e;
        e.vector.source_id = read_as<std::string>(r, "source_id");
        const Json& label = require(r, "label");
        if (!label.is_null()) {
            const int c = read_as<int>(r, "label");
            if (c < 0 || c >= kNumClasses) throw_schema("label out of range");
            e.vector.label = c;
        }
        e.vector.values = read_as<std::array<double, 8>>(r, "vector");
        for (double v : e.vector.values) {
            if (!(v >= 0.0)) throw_schema("distribution counts must be >= 0");
        }
        e.image = read_as<std::string>(r, "image");
        e.graph = read_as<std::string>(r, "graph");
        e.table = read_as<std::string>(r, "table");
        out.push_back(std::move(e));
    }
    return build_index(std::move(out));
}

std::string encode_index(const CaseIndex& index) { return dump_canonical(index_to_json(index)); }

CaseIndex decode_index(std::string_view bytes) { return index_from_json(parse_json(bytes)); }

}  // namespace octagraph
