#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/vessel_graph.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace octagraph {

inline constexpr int kDefaultRetrievalK = 3;

/// [node counts q0..q3, edge counts q0..q3]; nodes of every kind are pooled.
struct DistributionVector {
    std::array<double, 8> values{};
    std::string source_id;
    std::optional<int> label;

    friend bool operator==(const DistributionVector&, const DistributionVector&) = default;
};

struct CaseEntry {
    DistributionVector vector;
    std::string image;
    std::string graph;
    std::string table;

    friend bool operator==(const CaseEntry&, const CaseEntry&) = default;
};

/// Immutable after build; entries sorted by source_id.
struct CaseIndex {
    std::vector<CaseEntry> entries;

    friend bool operator==(const CaseIndex&, const CaseIndex&) = default;
};

struct Match {
    std::size_t entry = 0;  // position in CaseIndex::entries
    std::string source_id;
    double distance = 0.0;
};

DistributionVector distribution_vector(const HeteroGraph& graph);

/// Throws DuplicateSourceId when two entries share a source_id.
CaseIndex build_index(std::vector<CaseEntry> entries);

double euclidean(const std::array<double, 8>& a, const std::array<double, 8>& b);

/// Exact top-k by Euclidean distance, ties by ascending source_id. The query's
/// own source_id is skipped. With `l2_normalized`, vectors are scaled to unit
/// length first (zero vectors stay zero).
std::vector<Match> query_top_k(const CaseIndex& index, const DistributionVector& query, int k = kDefaultRetrievalK,
                               bool l2_normalized = false);

Json index_to_json(const CaseIndex& index);
CaseIndex index_from_json(const Json& json);
std::string encode_index(const CaseIndex& index);
CaseIndex decode_index(std::string_view bytes);

}  // namespace octagraph
