#pragma once

#include "octagraph/gnn.hpp"
#include "octagraph/knowledge_table.hpp"
#include "octagraph/mask.hpp"
#include "octagraph/synth.hpp"
#include "octagraph/vessel_graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace octagraph::testing {

// '#' marks a vessel pixel.
inline BinaryMask mask_from_rows(const std::vector<std::string>& rows, std::string id = "m") {
    BinaryMask m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), std::move(id));
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) m.set(r, c, rows[r][c] == '#');
    }
    return m;
}

inline BinaryMask filled_rect(int h, int w, int r0, int c0, int r1, int c1, std::string id = "m") {
    BinaryMask m(h, w, std::move(id));
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) m.set(r, c, true);
    }
    return m;
}

// Hand-made graph with arbitrary features; no pixel paths.
inline HeteroGraph random_graph(std::mt19937_64& rng, int nv, int nr, int touches, int borders,
                                std::string id = "rand") {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    HeteroGraph g;
    g.height = 100;
    g.width = 100;
    g.source_id = std::move(id);
    for (int i = 0; i < nv; ++i) {
        VesselNode v;
        v.id = i;
        v.length = 2.0 + 30.0 * u(rng);
        v.mean_radius = 0.5 + 2.0 * u(rng);
        v.curvature = 0.5 * u(rng);
        v.centroid_row = 99.0 * u(rng);
        v.centroid_col = 99.0 * u(rng);
        v.quadrant = quadrant_of(v.centroid_row, v.centroid_col, g.height, g.width);
        g.vessels.push_back(v);
    }
    for (int i = 0; i < nr; ++i) {
        RegionNode r;
        r.id = i;
        r.kind = i == 0 ? RegionKind::FAZ : RegionKind::ICA;
        r.area = 5.0 + 200.0 * u(rng);
        r.perimeter = 8.0 + 60.0 * u(rng);
        r.eccentricity = u(rng);
        r.centroid_row = 99.0 * u(rng);
        r.centroid_col = 99.0 * u(rng);
        r.quadrant = quadrant_of(r.centroid_row, r.centroid_col, g.height, g.width);
        g.regions.push_back(r);
    }
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < nv; ++a) {
        for (int b = a + 1; b < nv; ++b) pairs.emplace_back(a, b);
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (int i = 0; i < std::min<int>(touches, static_cast<int>(pairs.size())); ++i) {
        g.edges.push_back({Relation::Touches, pairs[i].first, pairs[i].second, 1.0, 10.0 * u(rng)});
    }
    pairs.clear();
    for (int a = 0; a < nv; ++a) {
        for (int b = 0; b < nr; ++b) pairs.emplace_back(a, b);
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (int i = 0; i < std::min<int>(borders, static_cast<int>(pairs.size())); ++i) {
        g.edges.push_back({Relation::Borders, pairs[i].first, pairs[i].second, 1.0, 10.0 * u(rng)});
    }
    return g;
}

// Relabels nodes within each type and shuffles the edge list.
inline HeteroGraph permute_graph(const HeteroGraph& g, std::mt19937_64& rng) {
    std::vector<int> pv(g.vessels.size()), pr(g.regions.size());
    std::iota(pv.begin(), pv.end(), 0);
    std::iota(pr.begin(), pr.end(), 0);
    std::shuffle(pv.begin(), pv.end(), rng);
    std::shuffle(pr.begin(), pr.end(), rng);
    HeteroGraph out = g;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        out.vessels[pv[i]] = g.vessels[i];
        out.vessels[pv[i]].id = pv[i];
    }
    for (std::size_t i = 0; i < pr.size(); ++i) {
        out.regions[pr[i]] = g.regions[i];
        out.regions[pr[i]].id = pr[i];
    }
    for (Edge& e : out.edges) {
        if (e.relation == Relation::Touches) {
            e.src = pv[e.src];
            e.dst = pv[e.dst];
            if (e.src > e.dst) std::swap(e.src, e.dst);
        } else {
            e.src = pv[e.src];
            e.dst = pr[e.dst];
        }
    }
    std::shuffle(out.edges.begin(), out.edges.end(), rng);
    return out;
}

// Initialized weights plus random nonzero biases and fitted normalization.
inline ModelParams random_params(const ModelConfig& config, const std::vector<HeteroGraph>& graphs,
                                 std::uint64_t seed) {
    ModelParams p = init_model(config);
    p.norm = fit_normalization(graphs);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for_each_tensor(p, [&](const std::string&, auto& t) {
        if (t.cols() != 1) return;
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    });
    return p;
}

inline HeteroGraph synth_graph(int label, std::uint64_t seed, int side = kDefaultSynthSide) {
    SynthMask sm = generate_mask(SynthSpec::for_class(label, seed, side, side));
    sm.mask.source_id = "s" + std::to_string(seed);
    return graph_from_mask(sm.mask, {}, label);
}

// Knowledge table for a random graph scored by an untrained model.
inline KnowledgeTable random_table(std::uint64_t seed, std::optional<int> label = 1, int nv = 12, int nr = 4) {
    std::mt19937_64 rng(seed);
    HeteroGraph g = random_graph(rng, nv, nr, 10, 12, "case" + std::to_string(seed));
    g.label = label;
    const ModelParams p = random_params(ModelConfig{}, {g}, seed);
    return build_table(g, attribute(p, g, -1, 8), forward(p, g));
}

// Relative error for gradient checks. The 1e-6 floor keeps near-zero entries
// from comparing finite-difference roundoff (about 1e-11 at h = 1e-5) to zero.
inline double gradient_rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("octagraph_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace octagraph::testing
