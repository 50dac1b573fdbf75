#include "octagraph/attribution.hpp"
#include "octagraph/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace octagraph;
using octagraph::testing::random_graph;
using octagraph::testing::random_params;

namespace {

AttributionReport report_with_importances(const std::vector<double>& nodes, const std::vector<double>& edges) {
    AttributionReport r;
    r.source_id = "r";
    r.height = r.width = 16;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        NodeAttribution a;
        a.index = static_cast<int>(i);
        a.id = static_cast<int>(i);
        a.ig[0] = nodes[i];
        a.importance = nodes[i];
        r.node_attributions.push_back(a);
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        r.edge_attributions.push_back({static_cast<int>(i), edges[i], std::abs(edges[i])});
    }
    return r;
}

HeteroGraph two_segment_graph() {
    HeteroGraph g;
    g.height = g.width = 16;
    g.source_id = "r";
    for (int i = 0; i < 2; ++i) {
        VesselNode v;
        v.id = i;
        for (int c = 2; c < 10; ++c) v.path.push_back({3 + 6 * i, c});
        g.vessels.push_back(v);
    }
    return g;
}

}  // namespace

TEST(IntegratedGradients, LinearSurrogateIsExactForAnyM) {
    const Eigen::Vector2d w(2.0, -1.0);
    for (int m : {1, 2, 7, 64, 512}) {
        const Eigen::VectorXd ig = integrated_gradients(Eigen::Vector2d(3.0, 4.0), Eigen::Vector2d(0.0, 0.0), m,
                                                        [&](const Eigen::VectorXd&) -> Eigen::VectorXd { return w; });
        EXPECT_DOUBLE_EQ(ig[0], 6.0);
        EXPECT_DOUBLE_EQ(ig[1], -4.0);
        EXPECT_DOUBLE_EQ(ig.sum(), 2.0);
    }
}

TEST(IntegratedGradients, QuadraticMidpointIsExact) {
    // f = x^2 has a linear gradient, which the midpoint rule integrates exactly.
    const Eigen::VectorXd ig = integrated_gradients(Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 1.0), 5,
                                                    [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * x; });
    EXPECT_NEAR(ig[0], 8.0, 1e-12);
}

TEST(IntegratedGradients, ZeroPathGivesExactZero) {
    const Eigen::Vector3d x(1.5, -2.0, 0.25);
    const Eigen::VectorXd ig = integrated_gradients(x, x, 16, [](const Eigen::VectorXd& p) -> Eigen::VectorXd { return p; });
    EXPECT_TRUE(ig.isZero(0.0));
}

TEST(IntegratedGradients, InvalidSteps) {
    std::mt19937_64 rng(1);
    const HeteroGraph g = random_graph(rng, 5, 2, 3, 3);
    const ModelParams p = random_params(ModelConfig{}, {g}, 1);
    for (int steps : {0, -3}) {
        try {
            ig_nodes(p, g, 0, steps);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidSteps);
        }
        EXPECT_THROW(ig_edges(p, g, 0, steps), Error);
        EXPECT_THROW(attribute(p, g, 0, steps), Error);
    }
}

TEST(NodePath, IdenticalNodesAtTheMeanHaveZeroAttribution) {
    std::mt19937_64 rng(2);
    HeteroGraph g = random_graph(rng, 5, 2, 4, 4);
    for (auto& v : g.vessels) {
        const int id = v.id;
        v = g.vessels[0];
        v.id = id;
    }
    for (auto& r : g.regions) {
        const int id = r.id;
        const RegionKind kind = r.kind;
        r = g.regions[0];
        r.id = id;
        r.kind = kind;
    }
    ModelParams p = random_params(ModelConfig{}, {g}, 2);
    p.norm = FeatureStats::identity();
    p.norm.mean[kVesselType] = vessel_features(g.vessels[0], g.height, g.width);
    p.norm.mean[kRegionType] = region_features(g.regions[0], g.height, g.width);
    PathResult path;
    const auto nodes = ig_nodes(p, g, 1, 32, &path);
    for (const auto& n : nodes) {
        for (double v : n.ig) EXPECT_EQ(v, 0.0);
        EXPECT_EQ(n.importance, 0.0);
    }
    EXPECT_EQ(path.f_input, path.f_baseline);
}

TEST(NodePath, CoversEveryNodeOnce) {
    std::mt19937_64 rng(3);
    const HeteroGraph g = random_graph(rng, 7, 3, 6, 6);
    const ModelParams p = random_params(ModelConfig{}, {g}, 3);
    const auto nodes = ig_nodes(p, g, 0, 8);
    ASSERT_EQ(nodes.size(), g.node_count());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        EXPECT_EQ(nodes[i].index, static_cast<int>(i));
        EXPECT_GE(nodes[i].importance, 0.0);
    }
    EXPECT_EQ(nodes[7].kind, NodeKind::FAZ);
    EXPECT_EQ(nodes[8].kind, NodeKind::ICA);
}

TEST(EdgePath, NoEdges) {
    std::mt19937_64 rng(4);
    const HeteroGraph g = random_graph(rng, 4, 0, 0, 0);
    const ModelParams p = random_params(ModelConfig{}, {g}, 4);
    PathResult path;
    EXPECT_TRUE(ig_edges(p, g, 0, 64, &path).empty());
    EXPECT_EQ(path.residual, 0.0);
}

TEST(EdgePath, SingleEdgeMatchesDeletion) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        HeteroGraph g = random_graph(rng, 2, 0, 1, 0);
        const ModelParams p = random_params(ModelConfig{}, {g}, 50 + trial);
        HeteroGraph deleted = g;
        deleted.edges.clear();
        const double delta = forward(p, g).logits[2] - forward(p, deleted).logits[2];
        const auto edges = ig_edges(p, g, 2, 512);
        ASSERT_EQ(edges.size(), 1u);
        EXPECT_LE(std::abs(edges[0].ig - delta), 1e-3 * std::max(std::abs(delta), 1e-6)) << "trial " << trial;
    }
}

TEST(Completeness, ResidualFormula) {
    EXPECT_DOUBLE_EQ(completeness_residual(2.0, 3.0, 1.0), 0.0);
    EXPECT_NEAR(completeness_residual(2.2, 3.0, 1.0), 0.1, 1e-12);
    EXPECT_NEAR(completeness_residual(1e-7, 0.0, 0.0), 0.1, 1e-12);
}

TEST(Completeness, RefinementDoesNotIncreaseAggregateResidual) {
    std::vector<HeteroGraph> corpus;
    for (int i = 0; i < 6; ++i) corpus.push_back(octagraph::testing::synth_graph(i % 3, 700 + i, 128));
    ModelConfig c;
    c.epochs = 30;
    const ModelParams p = train(corpus, c).params;
    double coarse = 0.0, fine = 0.0;
    for (const HeteroGraph& g : corpus) {
        PathResult a, b, ea, eb;
        ig_nodes(p, g, -1, 256, &a);
        ig_nodes(p, g, -1, 512, &b);
        ig_edges(p, g, -1, 256, &ea);
        ig_edges(p, g, -1, 512, &eb);
        EXPECT_EQ(a.f_input, b.f_input);
        coarse += a.residual + ea.residual;
        fine += b.residual + eb.residual;
    }
    EXPECT_LE(fine, coarse);
}

TEST(Attribute, DeterministicAndResolvesPredictedClass) {
    std::mt19937_64 rng(6);
    const HeteroGraph g = random_graph(rng, 6, 3, 5, 5);
    const ModelParams p = random_params(ModelConfig{}, {g}, 6);
    const AttributionReport a = attribute(p, g, -1, 16);
    const AttributionReport b = attribute(p, g, -1, 16);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.target_class, forward(p, g).predicted_class);
    EXPECT_EQ(a.node_attributions.size(), g.node_count());
    EXPECT_EQ(a.edge_attributions.size(), g.edges.size());
    EXPECT_TRUE(std::isfinite(a.completeness_residual_nodes()));
    EXPECT_TRUE(std::isfinite(a.completeness_residual_edges()));
}

TEST(Ranking, OrderAndTies) {
    const auto r = report_with_importances({0.5, 2.0, 1.0}, {0.1, -0.3});
    EXPECT_EQ(rank_elements(r, 2).nodes, (std::vector<int>{1, 2}));
    EXPECT_EQ(rank_elements(r, 10).nodes, (std::vector<int>{1, 2, 0}));
    EXPECT_EQ(rank_elements(r, 10).edges, (std::vector<int>{1, 0}));
    EXPECT_TRUE(rank_elements(r, 0).nodes.empty());
    const auto tie = report_with_importances({1.0, 1.0}, {});
    EXPECT_EQ(rank_elements(tie, 1).nodes, (std::vector<int>{0}));
}

TEST(Ranking, InvariantUnderPositiveRescaling) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> imp(40);
    for (double& v : imp) v = std::round(u(rng) * 8) / 8;
    const auto base = rank_elements(report_with_importances(imp, imp), 15);
    for (double scale : {0.001, 3.0, 1e6}) {
        std::vector<double> scaled = imp;
        for (double& v : scaled) v *= scale;
        const auto r = rank_elements(report_with_importances(scaled, scaled), 15);
        EXPECT_EQ(r.nodes, base.nodes);
        EXPECT_EQ(r.edges, base.edges);
    }
}

TEST(Heatmap, SingleNodeIsFullIntensity) {
    HeteroGraph g = two_segment_graph();
    g.vessels.pop_back();
    const BinaryMask mask(16, 16);
    const GrayImage img = export_heatmap(report_with_importances({0.7}, {}), g, mask);
    EXPECT_EQ(img.height, 16);
    EXPECT_EQ(img.width, 16);
    for (const Pixel& p : g.vessels[0].path) EXPECT_EQ(img.at(p.row, p.col), 255);
    EXPECT_EQ(img.at(0, 0), 0);
}

TEST(Heatmap, MinMaxScaling) {
    const HeteroGraph g = two_segment_graph();
    const GrayImage img = export_heatmap(report_with_importances({1.0, 3.0}, {}), g, BinaryMask(16, 16));
    for (const Pixel& p : g.vessels[0].path) EXPECT_EQ(img.at(p.row, p.col), 0);
    for (const Pixel& p : g.vessels[1].path) EXPECT_EQ(img.at(p.row, p.col), 255);
}

TEST(Heatmap, DimensionMismatch) {
    const HeteroGraph g = two_segment_graph();
    try {
        export_heatmap(report_with_importances({1.0, 3.0}, {}), g, BinaryMask(20, 16));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    EXPECT_THROW(export_heatmap(report_with_importances({1.0}, {}), g, BinaryMask(16, 16)), Error);
}

TEST(ReportIo, RoundTrip) {
    std::mt19937_64 rng(8);
    const HeteroGraph g = random_graph(rng, 6, 3, 5, 5);
    const ModelParams p = random_params(ModelConfig{}, {g}, 8);
    const AttributionReport r = attribute(p, g, 1, 8);
    const std::string bytes = encode_report(r);
    EXPECT_EQ(decode_report(bytes), r);
    EXPECT_EQ(encode_report(decode_report(bytes)), bytes);
    Json j = report_to_json(r);
    j["version"] = "9";
    EXPECT_THROW(report_from_json(j), Error);
}
