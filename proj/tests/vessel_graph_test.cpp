#include "octagraph/error.hpp"
#include "octagraph/graph_io.hpp"
#include "octagraph/skeleton.hpp"
#include "octagraph/vessel_graph.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

using namespace octagraph;
using octagraph::testing::filled_rect;

namespace {

BinaryMask plus_mask() {
    BinaryMask m(21, 21, "plus");
    for (int i = 0; i < 21; ++i) {
        for (int j = 9; j < 12; ++j) {
            m.set(i, j, true);
            m.set(j, i, true);
        }
    }
    return m;
}

BinaryMask with_holes(int h, int w, const std::vector<std::array<int, 4>>& holes) {
    BinaryMask m(h, w, "holes");
    std::fill(m.pixels.begin(), m.pixels.end(), 1);
    for (const auto& [r0, c0, r1, c1] : holes) {
        for (int r = r0; r < r1; ++r) {
            for (int c = c0; c < c1; ++c) m.set(r, c, false);
        }
    }
    return m;
}

}  // namespace

TEST(Segments, StraightLine) {
    BinaryMask m(16, 16);
    for (int c = 3; c < 13; ++c) m.set(8, c, true);
    const auto segs = extract_segments(skeletonize(m), m);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_DOUBLE_EQ(segs[0].length, 9.0);
    EXPECT_DOUBLE_EQ(segs[0].curvature, 0.0);
    EXPECT_DOUBLE_EQ(segs[0].mean_radius, 1.0);
    EXPECT_DOUBLE_EQ(segs[0].centroid_row, 8.0);
    EXPECT_DOUBLE_EQ(segs[0].centroid_col, 7.5);
}

TEST(Segments, PlusSplitsIntoFourArmsAtTheBranchPoint) {
    const BinaryMask m = plus_mask();
    const Skeleton s = skeletonize(m);
    const auto segs = extract_segments(s, m);
    ASSERT_EQ(segs.size(), 4u);
    ASSERT_EQ(s.branch_points.size(), 1u);
    // Every arm ends in the single junction cluster.
    for (const auto& v : segs) {
        EXPECT_TRUE(s.junction_at(v.path.front().row, v.path.front().col) == 0 ||
                    s.junction_at(v.path.back().row, v.path.back().col) == 0);
        EXPECT_GE(v.length, 1.0);
    }
}

TEST(Segments, RingIsOneClosedNode) {
    BinaryMask m(32, 32);
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
            const double d = std::hypot(r - 15.5, c - 15.5);
            if (d >= 9.0 && d <= 11.0) m.set(r, c, true);
        }
    }
    const auto segs = extract_segments(skeletonize(m), m);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_NEAR(segs[0].curvature, segs[0].length - 1.0, 1e-12);
    EXPECT_GT(segs[0].length, 50.0);
}

TEST(Segments, IsolatedSinglePixelDropped) {
    BinaryMask m(16, 16);
    m.set(3, 3, true);
    for (int c = 5; c < 12; ++c) m.set(10, c, true);
    EXPECT_EQ(extract_segments(skeletonize(m), m).size(), 1u);
}

TEST(Segments, EveryNonBranchSkeletalPixelInExactlyOnePath) {
    const BinaryMask m = generate_mask(SynthSpec::for_class(1, 77)).mask;
    const Skeleton s = skeletonize(m);
    const auto segs = extract_segments(s, m);
    std::map<Pixel, int> hits;
    for (const auto& v : segs) {
        std::set<Pixel> unique(v.path.begin(), v.path.end());
        for (const Pixel& p : unique) ++hits[p];
    }
    const std::vector<double> dt = distance_transform(m);
    const double max_dt = *std::max_element(dt.begin(), dt.end());
    for (const auto& v : segs) EXPECT_LE(v.mean_radius, max_dt);
    for (const Pixel& p : s.skeletal_pixels) {
        if (s.junction_at(p.row, p.col) >= 0) continue;
        const auto it = hits.find(p);
        // Lone pixels are the only skeletal pixels allowed to be dropped.
        if (it == hits.end()) {
            EXPECT_EQ(s.neighbor_count(p.row, p.col), 0);
            continue;
        }
        EXPECT_EQ(it->second, 1) << p.row << "," << p.col;
    }
}

TEST(Regions, AllTrueHasNoRegions) {
    EXPECT_TRUE(label_regions(with_holes(20, 20, {})).nodes.empty());
}

TEST(Regions, TwoSymmetricHoles) {
    const LabeledRegions lr = label_regions(with_holes(20, 20, {{3, 3, 6, 6}, {12, 10, 15, 13}}));
    ASSERT_EQ(lr.nodes.size(), 2u);
    for (const auto& r : lr.nodes) {
        EXPECT_DOUBLE_EQ(r.area, 9.0);
        EXPECT_DOUBLE_EQ(r.perimeter, 12.0);
        EXPECT_DOUBLE_EQ(r.eccentricity, 0.0);
    }
    EXPECT_EQ(lr.nodes[0].id, 0);
    EXPECT_DOUBLE_EQ(lr.nodes[0].centroid_row, 4.0);
    EXPECT_DOUBLE_EQ(lr.nodes[1].centroid_col, 11.0);
}

TEST(Regions, BorderTouchingAndSmallHolesExcluded) {
    const LabeledRegions lr = label_regions(with_holes(20, 20, {{0, 3, 4, 6}, {10, 10, 12, 12}, {5, 12, 8, 15}}));
    ASSERT_EQ(lr.nodes.size(), 1u);
    EXPECT_DOUBLE_EQ(lr.nodes[0].area, 9.0);
}

TEST(Regions, ElongatedHoleEccentricity) {
    // A 1 x n line of pixels has one zero eigenvalue, so e = 1.
    const LabeledRegions lr = label_regions(with_holes(20, 20, {{5, 3, 6, 13}}));
    ASSERT_EQ(lr.nodes.size(), 1u);
    EXPECT_DOUBLE_EQ(lr.nodes[0].eccentricity, 1.0);
    // 2 x 4 block: variances 1/4 and 5/4, e = sqrt(1 - 1/5).
    const LabeledRegions block = label_regions(with_holes(20, 20, {{5, 3, 7, 7}}));
    ASSERT_EQ(block.nodes.size(), 1u);
    EXPECT_NEAR(block.nodes[0].eccentricity, std::sqrt(0.8), 1e-12);
}

TEST(Faz, CenterRegionWins) {
    LabeledRegions lr = label_regions(with_holes(40, 40, {{3, 3, 8, 8}, {17, 17, 24, 24}, {30, 30, 35, 35}}));
    ASSERT_EQ(lr.nodes.size(), 3u);
    EXPECT_EQ(identify_faz(lr), 1);
    EXPECT_EQ(lr.nodes[1].kind, RegionKind::FAZ);
    EXPECT_EQ(lr.nodes[0].kind, RegionKind::ICA);
    EXPECT_EQ(lr.nodes[2].kind, RegionKind::ICA);
}

TEST(Faz, NearestCentroidWhenCenterIsVessel) {
    // Centroids (50, 62) and (50, 19.5): distances 12.0 and 30.5 from (50, 50).
    LabeledRegions lr = label_regions(with_holes(100, 100, {{49, 61, 52, 64}, {49, 18, 52, 22}}));
    ASSERT_EQ(lr.nodes.size(), 2u);
    const auto far = std::find_if(lr.nodes.begin(), lr.nodes.end(), [](const RegionNode& r) { return r.centroid_col < 30; });
    const auto near = std::find_if(lr.nodes.begin(), lr.nodes.end(), [](const RegionNode& r) { return r.centroid_col > 30; });
    EXPECT_DOUBLE_EQ(std::hypot(far->centroid_row - 50, far->centroid_col - 50), 30.5);
    EXPECT_DOUBLE_EQ(std::hypot(near->centroid_row - 50, near->centroid_col - 50), 12.0);
    EXPECT_EQ(identify_faz(lr), near->id);
}

TEST(Faz, EmptyRegionListRejected) {
    LabeledRegions lr;
    try {
        identify_faz(lr);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoFazCandidate);
    }
}

TEST(BuildGraph, PlusWithCornerRegions) {
    const BinaryMask m = plus_mask();
    const auto vessels = extract_segments(skeletonize(m), m);
    ASSERT_EQ(vessels.size(), 4u);

    // Four hand-placed 3x3 regions in the corners between the arms.
    LabeledRegions lr;
    lr.height = m.height;
    lr.width = m.width;
    lr.label_map.assign(m.size(), -1);
    const std::array<Pixel, 4> corners = {Pixel{6, 6}, Pixel{6, 12}, Pixel{12, 6}, Pixel{12, 12}};
    for (int i = 0; i < 4; ++i) {
        RegionNode r;
        r.id = i;
        r.area = 9;
        r.perimeter = 12;
        r.centroid_row = corners[i].row + 1;
        r.centroid_col = corners[i].col + 1;
        r.quadrant = quadrant_of(r.centroid_row, r.centroid_col, m.height, m.width);
        r.kind = i == 0 ? RegionKind::FAZ : RegionKind::ICA;
        lr.nodes.push_back(r);
        for (int dr = 0; dr < 3; ++dr) {
            for (int dc = 0; dc < 3; ++dc) lr.label_map[(corners[i].row + dr) * m.width + corners[i].col + dc] = i;
        }
    }
    const HeteroGraph g = build_graph(vessels, lr, m);
    int touches = 0;
    std::map<int, std::set<int>> arms_per_region;
    for (const Edge& e : g.edges) {
        if (e.relation == Relation::Touches) {
            ++touches;
        } else {
            arms_per_region[e.dst].insert(e.src);
        }
    }
    EXPECT_EQ(touches, 6);
    ASSERT_EQ(arms_per_region.size(), 4u);
    for (const auto& [region, arms] : arms_per_region) EXPECT_EQ(arms.size(), 2u) << "region " << region;
}

TEST(BuildGraph, DisjointBarsHaveNoTouches) {
    BinaryMask m(20, 30);
    for (int c = 2; c < 28; ++c) {
        m.set(4, c, true);
        m.set(15, c, true);
    }
    const HeteroGraph g = graph_from_mask(m);
    EXPECT_EQ(g.vessels.size(), 2u);
    EXPECT_TRUE(g.edges.empty());
    EXPECT_TRUE(g.regions.empty());
}

TEST(BuildGraph, NoVesselsIsEmptyGraph) {
    BinaryMask m(16, 16);
    m.set(5, 5, true);
    try {
        graph_from_mask(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyGraph);
    }
}

TEST(BuildGraph, SyntheticGraphInvariants) {
    for (int label = 0; label < 3; ++label) {
        const HeteroGraph g = octagraph::testing::synth_graph(label, 300 + label);
        EXPECT_NO_THROW(validate_graph(g));
        int faz = 0;
        for (const auto& r : g.regions) {
            faz += r.kind == RegionKind::FAZ;
            EXPECT_GE(r.area, kDefaultMinRegionArea);
            EXPECT_GE(r.eccentricity, 0.0);
            EXPECT_LE(r.eccentricity, 1.0);
        }
        EXPECT_EQ(faz, 1);
        for (const auto& v : g.vessels) {
            EXPECT_GE(v.length, 1.0);
            EXPECT_GT(v.mean_radius, 0.0);
            EXPECT_GE(v.curvature, 0.0);
            EXPECT_GE(v.centroid_row, 0.0);
            EXPECT_LT(v.centroid_row, g.height);
            EXPECT_GE(v.centroid_col, 0.0);
            EXPECT_LT(v.centroid_col, g.width);
        }
        // Edges sorted by (relation, src, dst) with unit gates.
        for (std::size_t i = 1; i < g.edges.size(); ++i) {
            const Edge& a = g.edges[i - 1];
            const Edge& b = g.edges[i];
            EXPECT_LT(std::tuple(static_cast<int>(a.relation), a.src, a.dst),
                      std::tuple(static_cast<int>(b.relation), b.src, b.dst));
        }
        for (const Edge& e : g.edges) EXPECT_EQ(e.gate, 1.0);
    }
}

TEST(BuildGraph, TranslationMovesCentroidsOnly) {
    const BinaryMask base = generate_mask(SynthSpec::for_class(0, 91, 128, 128)).mask;
    // Crop to a window that leaves room for a shift, then shift by (3, 5).
    BinaryMask a(140, 140), b(140, 140);
    for (int r = 0; r < 128; ++r) {
        for (int c = 0; c < 128; ++c) {
            if (!base.at(r, c)) continue;
            a.set(r + 2, c + 2, true);
            b.set(r + 5, c + 7, true);
        }
    }
    const HeteroGraph ga = graph_from_mask(a);
    const HeteroGraph gb = graph_from_mask(b);
    ASSERT_EQ(ga.vessels.size(), gb.vessels.size());
    ASSERT_EQ(ga.regions.size(), gb.regions.size());
    for (std::size_t i = 0; i < ga.vessels.size(); ++i) {
        EXPECT_DOUBLE_EQ(ga.vessels[i].length, gb.vessels[i].length);
        EXPECT_DOUBLE_EQ(ga.vessels[i].curvature, gb.vessels[i].curvature);
        EXPECT_NEAR(gb.vessels[i].centroid_row - ga.vessels[i].centroid_row, 3.0, 1e-9);
        EXPECT_NEAR(gb.vessels[i].centroid_col - ga.vessels[i].centroid_col, 5.0, 1e-9);
    }
    for (std::size_t i = 0; i < ga.regions.size(); ++i) {
        EXPECT_DOUBLE_EQ(ga.regions[i].area, gb.regions[i].area);
        EXPECT_DOUBLE_EQ(ga.regions[i].perimeter, gb.regions[i].perimeter);
        EXPECT_NEAR(ga.regions[i].eccentricity, gb.regions[i].eccentricity, 1e-12);
        EXPECT_NEAR(gb.regions[i].centroid_row - ga.regions[i].centroid_row, 3.0, 1e-9);
    }
}

TEST(GraphIo, RoundTripAndStableBytes) {
    HeteroGraph g = octagraph::testing::synth_graph(2, 12);
    const std::string bytes = encode_graph(g);
    EXPECT_EQ(decode_graph(bytes), g);
    EXPECT_EQ(encode_graph(decode_graph(bytes)), bytes);
    EXPECT_EQ(encode_graph(octagraph::testing::synth_graph(2, 12)), bytes);
}

TEST(GraphIo, VersionAndSchemaErrors) {
    Json j = graph_to_json(octagraph::testing::synth_graph(0, 3, 96));
    j["version"] = "2";
    try {
        graph_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsupportedVersion);
    }
    Json k = graph_to_json(octagraph::testing::synth_graph(0, 3, 96));
    k.erase("edges");
    try {
        graph_from_json(k);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    }
}
