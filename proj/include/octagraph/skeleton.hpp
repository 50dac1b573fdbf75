#pragma once

#include "octagraph/mask.hpp"

#include <vector>

namespace octagraph {

/// One-pixel-wide 8-connected centerline of a vessel mask.
///
/// Branch points are reported per junction: skeletal pixels with three or more
/// skeletal neighbours are grouped into 8-connected clusters, and each cluster
/// is represented by its pixel with the most neighbours (row-major on ties).
/// End points are skeletal pixels with at most one skeletal neighbour, so an
/// isolated pixel is an end point.
struct Skeleton {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> grid;      // 1 = skeletal
    std::vector<int> junction;           // cluster id per pixel, -1 if not a junction pixel
    std::vector<Pixel> skeletal_pixels;  // row-major
    std::vector<Pixel> branch_points;    // one per junction cluster, indexed by cluster id
    std::vector<Pixel> end_points;       // row-major

    bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < height && c < width; }
    bool at(int r, int c) const { return in_bounds(r, c) && grid[static_cast<std::size_t>(r) * width + c] != 0; }
    int junction_at(int r, int c) const { return junction[static_cast<std::size_t>(r) * width + c]; }
    int neighbor_count(int r, int c) const;
};

/// Plain two-subiteration Zhang-Suen thinning, no post-processing.
BinaryMask zhang_suen_thin(const BinaryMask& mask);

/// Zhang-Suen thinning followed by connectivity repair (every vessel component
/// keeps exactly one skeleton component) and removal of redundant staircase
/// pixels. Throws EmptyMask when the mask has no vessel pixels.
Skeleton skeletonize(const BinaryMask& mask);

/// Exact Euclidean distance from each vessel pixel to the nearest non-vessel
/// pixel; the area outside the image counts as background. Zero on background.
std::vector<double> distance_transform(const BinaryMask& mask);

/// 8-connected component labels of the true pixels (-1 elsewhere). Returns the count.
int label_components8(const BinaryMask& mask, std::vector<int>& labels);

}  // namespace octagraph
