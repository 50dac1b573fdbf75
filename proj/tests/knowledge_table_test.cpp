#include "octagraph/error.hpp"
#include "octagraph/knowledge_table.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <regex>

using namespace octagraph;
using octagraph::testing::random_graph;
using octagraph::testing::random_params;

namespace {

double sum4(const std::array<double, 4>& a) { return a[0] + a[1] + a[2] + a[3]; }

HeteroGraph placed_graph(const std::vector<std::pair<double, double>>& centroids) {
    HeteroGraph g;
    g.height = g.width = 100;
    g.source_id = "placed";
    for (std::size_t i = 0; i < centroids.size(); ++i) {
        VesselNode v;
        v.id = static_cast<int>(i);
        v.length = 5;
        v.mean_radius = 1;
        v.centroid_row = centroids[i].first;
        v.centroid_col = centroids[i].second;
        v.quadrant = quadrant_of(v.centroid_row, v.centroid_col, 100, 100);
        g.vessels.push_back(v);
    }
    return g;
}

struct Fixture {
    HeteroGraph graph;
    AttributionReport report;
    Prediction prediction;
};

Fixture trained_fixture(std::uint64_t seed, int nv = 9, int nr = 4) {
    std::mt19937_64 rng(seed);
    Fixture f;
    f.graph = random_graph(rng, nv, nr, 8, 10, "case" + std::to_string(seed));
    f.graph.label = static_cast<int>(seed % 3);
    const ModelParams p = random_params(ModelConfig{}, {f.graph}, seed);
    f.report = attribute(p, f.graph, -1, 16);
    f.prediction = forward(p, f.graph);
    return f;
}

}  // namespace

TEST(Densities, TwoQuadrants) {
    const QuadrantDensities d = quadrant_densities(placed_graph({{10, 10}, {60, 60}}));
    EXPECT_EQ(d.nodes, (std::array<double, 4>{0.5, 0, 0, 0.5}));
    EXPECT_EQ(d.edges, (std::array<double, 4>{0, 0, 0, 0}));
}

TEST(Densities, AllTopRightAndMidline) {
    EXPECT_EQ(quadrant_densities(placed_graph({{10, 60}, {20, 99}})).nodes, (std::array<double, 4>{0, 1, 0, 0}));
    EXPECT_EQ(quadrant_densities(placed_graph({{50, 50}})).nodes, (std::array<double, 4>{0, 0, 0, 1}));
}

TEST(Densities, EdgesAtMidpoints) {
    HeteroGraph g = placed_graph({{10, 10}, {10, 80}, {80, 80}});
    g.edges.push_back({Relation::Touches, 0, 1, 1.0, 70.0});  // midpoint (10, 45): q0
    g.edges.push_back({Relation::Touches, 1, 2, 1.0, 70.0});  // midpoint (45, 80): q1
    const QuadrantDensities d = quadrant_densities(g);
    EXPECT_EQ(d.edges, (std::array<double, 4>{0.5, 0.5, 0, 0}));
}

TEST(Densities, EmptyGraphRejected) {
    HeteroGraph g;
    g.height = g.width = 10;
    try {
        quadrant_densities(g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyGraph);
    }
}

TEST(Densities, SumToOneAndPermutationInvariant) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const HeteroGraph g = random_graph(rng, 5 + trial, trial % 5, 2 * trial, trial);
        const QuadrantDensities d = quadrant_densities(g);
        EXPECT_NEAR(sum4(d.nodes), 1.0, 1e-9);
        if (!g.edges.empty()) EXPECT_NEAR(sum4(d.edges), 1.0, 1e-9);
        const QuadrantDensities p = quadrant_densities(octagraph::testing::permute_graph(g, rng));
        for (int q = 0; q < 4; ++q) {
            EXPECT_NEAR(p.nodes[q], d.nodes[q], 1e-15);
            EXPECT_NEAR(p.edges[q], d.edges[q], 1e-15);
        }
    }
}

TEST(Quantize, PreservesTotals) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, 4> f{u(rng), u(rng), u(rng), u(rng)};
        const double total = sum4(f);
        for (double& v : f) v /= total;
        const auto q = quantize_fractions(f);
        EXPECT_NEAR(sum4(q), 1.0, 1e-9);
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(q[i], f[i], 2e-6);
        std::array<double, 3> p{u(rng), u(rng), u(rng)};
        const double pt = p[0] + p[1] + p[2];
        for (double& v : p) v /= pt;
        const auto qp = quantize_probabilities(p);
        EXPECT_NEAR(qp[0] + qp[1] + qp[2], 1.0, 1e-9);
    }
}

TEST(BuildTable, SmallGraphKeepsAllNodes) {
    const Fixture f = trained_fixture(1, 3, 1);
    const KnowledgeTable t = build_table(f.graph, f.report, f.prediction, 10);
    EXPECT_EQ(t.nodes.size(), 4u);
    EXPECT_EQ(t.edges.size(), f.graph.edges.size());
    EXPECT_EQ(t.vessel_count, 3);
    EXPECT_EQ(t.region_count, 1);
    ASSERT_TRUE(t.faz.has_value());
    EXPECT_EQ(t.faz->index, 3);
}

TEST(BuildTable, SortedTruncatedAndConsistent) {
    const Fixture f = trained_fixture(2, 20, 6);
    const KnowledgeTable t = build_table(f.graph, f.report, f.prediction, 5);
    ASSERT_EQ(t.nodes.size(), 5u);
    ASSERT_EQ(t.edges.size(), 5u);
    for (std::size_t i = 1; i < t.nodes.size(); ++i) EXPECT_GE(t.nodes[i - 1].importance, t.nodes[i].importance);
    for (std::size_t i = 1; i < t.edges.size(); ++i) EXPECT_GE(t.edges[i - 1].importance, t.edges[i].importance);
    for (const auto& n : t.nodes) {
        ASSERT_EQ(n.features.size(), 3u);
        EXPECT_GE(std::abs(n.features[0].ig), std::abs(n.features[1].ig));
        EXPECT_GE(std::abs(n.features[1].ig), std::abs(n.features[2].ig));
    }
    EXPECT_NEAR(t.probabilities[0] + t.probabilities[1] + t.probabilities[2], 1.0, 1e-9);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(t.probabilities[c], f.prediction.probabilities[c], 1e-6);
    EXPECT_EQ(t.predicted_class, f.prediction.predicted_class);
    EXPECT_EQ(t.ground_truth, f.graph.label);
    EXPECT_NEAR(sum4(t.node_density), 1.0, 1e-9);
    EXPECT_NEAR(sum4(t.edge_density), 1.0, 1e-9);
}

TEST(BuildTable, LargestIgFeatureFirst) {
    Fixture f = trained_fixture(3, 4, 2);
    auto& a = f.report.node_attributions[0];
    a.ig = {0.1, -0.2, -5.0, 0.3, 0.0};
    a.importance = 100.0;
    const KnowledgeTable t = build_table(f.graph, f.report, f.prediction, 1);
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.nodes[0].index, 0);
    EXPECT_EQ(t.nodes[0].features[0].name, "curvature");
    EXPECT_EQ(t.nodes[0].features[1].name, "norm_x");
    EXPECT_EQ(t.nodes[0].features[2].name, "mean_radius");
    EXPECT_DOUBLE_EQ(t.nodes[0].features[0].value, quantize(f.graph.vessels[0].curvature, 6));
}

TEST(BuildTable, MismatchedReport) {
    Fixture f = trained_fixture(4);
    f.report.source_id = "other";
    try {
        build_table(f.graph, f.report, f.prediction);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Mismatch);
    }
    Fixture g = trained_fixture(5);
    g.report.node_attributions.pop_back();
    EXPECT_THROW(build_table(g.graph, g.report, g.prediction), Error);
}

TEST(BuildTable, PureFunction) {
    const Fixture f = trained_fixture(6);
    EXPECT_EQ(build_table(f.graph, f.report, f.prediction), build_table(f.graph, f.report, f.prediction));
}

TEST(TableIo, RoundTripAndStableBytes) {
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        Fixture f = trained_fixture(seed);
        if (seed == 8) f.graph.label.reset();
        const KnowledgeTable t = build_table(f.graph, f.report, f.prediction);
        const std::string bytes = encode_table(t);
        EXPECT_EQ(decode_table(bytes), t);
        EXPECT_EQ(encode_table(decode_table(bytes)), bytes);
        EXPECT_EQ(encode_table(t), bytes);
    }
}

TEST(TableIo, MissingPredictionRejected) {
    const Fixture f = trained_fixture(10);
    Json j = table_to_json(build_table(f.graph, f.report, f.prediction));
    j.erase("prediction");
    try {
        table_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    }
}

TEST(TableIo, RealsUseSixDecimals) {
    const Fixture f = trained_fixture(11);
    const std::string bytes = encode_table(build_table(f.graph, f.report, f.prediction));
    EXPECT_NE(bytes.find("\"density_normalization\":\"fraction_of_total\""), std::string::npos);
    EXPECT_FALSE(std::regex_search(bytes, std::regex("[0-9][eE][-+]?[0-9]")));
    const std::regex real("[0-9]+\\.([0-9]+)");
    int reals = 0;
    for (auto it = std::sregex_iterator(bytes.begin(), bytes.end(), real); it != std::sregex_iterator(); ++it, ++reals) {
        EXPECT_EQ((*it)[1].length(), 6) << it->str();
    }
    EXPECT_GT(reals, 10);
}
