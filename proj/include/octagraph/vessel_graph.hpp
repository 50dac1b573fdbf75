#pragma once

#include "octagraph/mask.hpp"
#include "octagraph/skeleton.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace octagraph {

inline constexpr int kNumClasses = 3;
inline constexpr int kNodeFeatureDim = 5;
inline constexpr int kDefaultMinRegionArea = 5;

enum class DrClass : int { Healthy = 0, NPDR = 1, PDR = 2 };

std::string_view class_name(int label);
/// Accepts "Healthy" / "NPDR" / "PDR" (case-insensitive) or "0".."2".
int parse_class(std::string_view text);

enum class RegionKind { ICA, FAZ };
enum class Relation { Touches = 0, Borders = 1 };

std::string_view to_string(RegionKind kind);
std::string_view to_string(Relation relation);

inline constexpr std::array<std::string_view, kNodeFeatureDim> kVesselFeatureNames = {
    "length", "mean_radius", "curvature", "norm_x", "norm_y"};
inline constexpr std::array<std::string_view, kNodeFeatureDim> kRegionFeatureNames = {
    "area", "perimeter", "eccentricity", "norm_x", "norm_y"};

/// A vessel segment between junctions and/or free ends.
struct VesselNode {
    int id = 0;
    std::vector<Pixel> path;  // closed loops repeat the first pixel at the end
    double length = 0.0;
    double mean_radius = 0.0;
    double curvature = 0.0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    int quadrant = 0;
    std::array<int, 2> junctions{-1, -1};  // junction cluster at each end, -1 for a free end

    friend bool operator==(const VesselNode&, const VesselNode&) = default;
};

/// Intercapillary area or the foveal avascular zone.
struct RegionNode {
    int id = 0;
    RegionKind kind = RegionKind::ICA;
    double area = 0.0;
    double perimeter = 0.0;
    double eccentricity = 0.0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    int quadrant = 0;

    friend bool operator==(const RegionNode&, const RegionNode&) = default;
};

/// Touches: vessel src < vessel dst, stored once. Borders: vessel src, region dst.
struct Edge {
    Relation relation = Relation::Touches;
    int src = 0;
    int dst = 0;
    double gate = 1.0;
    double centroid_distance = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct HeteroGraph {
    int height = 0;
    int width = 0;
    std::string source_id;
    std::optional<int> label;
    std::vector<VesselNode> vessels;
    std::vector<RegionNode> regions;
    std::vector<Edge> edges;

    std::size_t node_count() const { return vessels.size() + regions.size(); }
    // Midpoint of the edge's endpoint centroids.
    std::pair<double, double> edge_midpoint(const Edge& e) const;

    friend bool operator==(const HeteroGraph&, const HeteroGraph&) = default;
};

/// Region nodes plus the per-pixel region id map (-1 outside kept regions).
struct LabeledRegions {
    int height = 0;
    int width = 0;
    std::vector<RegionNode> nodes;
    std::vector<int> label_map;
};

struct GraphOptions {
    int min_region_area = kDefaultMinRegionArea;
};

std::vector<VesselNode> extract_segments(const Skeleton& skeleton, const BinaryMask& mask);

LabeledRegions label_regions(const BinaryMask& mask, int min_area = kDefaultMinRegionArea);

/// Marks exactly one region as FAZ and returns its id. Throws NoFazCandidate on no regions.
int identify_faz(LabeledRegions& regions);

HeteroGraph build_graph(const std::vector<VesselNode>& vessels, const LabeledRegions& regions,
                        const BinaryMask& mask);

/// skeletonize -> extract_segments -> label_regions -> identify_faz -> build_graph.
HeteroGraph graph_from_mask(const BinaryMask& mask, const GraphOptions& options = {},
                            std::optional<int> label = std::nullopt);

std::array<double, kNodeFeatureDim> vessel_features(const VesselNode& node, int height, int width);
std::array<double, kNodeFeatureDim> region_features(const RegionNode& node, int height, int width);

}  // namespace octagraph
