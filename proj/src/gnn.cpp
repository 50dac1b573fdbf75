#include "octagraph/gnn.hpp"

#include "octagraph/error.hpp"
#include "octagraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace octagraph {

namespace {

constexpr double kMinStd = 1e-6;

struct Cache {
    std::vector<std::array<RowMatrix, kNodeTypes>> h;    // layer inputs, plus final embeddings
    std::vector<std::array<RowMatrix, kNodeTypes>> z;    // pre-activations
    std::vector<std::array<RowMatrix, kRelations>> agg;  // gated neighbour means
    std::array<Eigen::VectorXd, kRelations> denom;  // neighbours with a nonzero gate, at least 1
    Eigen::VectorXd pooled;
    std::array<std::vector<int>, kPoolKinds> argmax_row;
    Eigen::VectorXd z1;
    Eigen::VectorXd a1;
    Eigen::VectorXd logits;
};

void check_shapes(const ModelParams& p, const GraphInput& in, const Eigen::VectorXd& gates) {
    const auto& cfg = p.config;
    if (static_cast<int>(p.layers.size()) != cfg.num_layers) throw Error(ErrorCode::ShapeMismatch, "layer count differs from config");
    for (int l = 0; l < cfg.num_layers; ++l) {
        const int d_in = l == 0 ? kNodeFeatureDim : cfg.hidden_dim;
        const SageLayer& layer = p.layers[l];
        for (int t = 0; t < kNodeTypes; ++t) {
            if (layer.self_weight[t].rows() != cfg.hidden_dim || layer.self_weight[t].cols() != d_in ||
                layer.self_bias[t].size() != cfg.hidden_dim) {
                throw Error(ErrorCode::ShapeMismatch, "self weight shape in layer " + std::to_string(l));
            }
        }
        for (int r = 0; r < kRelations; ++r) {
            if (layer.relation_weight[r].rows() != cfg.hidden_dim || layer.relation_weight[r].cols() != d_in) {
                throw Error(ErrorCode::ShapeMismatch, "relation weight shape in layer " + std::to_string(l));
            }
        }
    }
    if (p.mlp_w1.rows() != cfg.mlp_hidden || p.mlp_w1.cols() != p.readout_width() || p.mlp_b1.size() != cfg.mlp_hidden ||
        p.mlp_w2.rows() != cfg.num_classes || p.mlp_w2.cols() != cfg.mlp_hidden || p.mlp_b2.size() != cfg.num_classes) {
        throw Error(ErrorCode::ShapeMismatch, "readout MLP shape");
    }
    if (in.vessel_x.cols() != kNodeFeatureDim || in.region_x.cols() != kNodeFeatureDim) {
        throw Error(ErrorCode::ShapeMismatch, "node features must have 5 columns");
    }
    if (static_cast<std::size_t>(in.region_x.rows()) != in.region_pool.size()) {
        throw Error(ErrorCode::ShapeMismatch, "region pool assignment length");
    }
    for (const auto& m : in.messages) {
        if (m.edge < 0 || m.edge >= gates.size() || m.src < 0 || m.src >= in.rows(kRelationSource[m.relation]) ||
            m.dst < 0 || m.dst >= in.rows(kRelationTarget[m.relation])) {
            throw Error(ErrorCode::ShapeMismatch, "message references a missing node or edge");
        }
    }
}

Prediction to_prediction(const Eigen::VectorXd& logits) {
    Prediction out;
    for (int c = 0; c < kNumClasses; ++c) out.logits[c] = logits[c];
    const double m = *std::max_element(out.logits.begin(), out.logits.end());
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
        out.probabilities[c] = std::exp(out.logits[c] - m);
        total += out.probabilities[c];
    }
    for (double& p : out.probabilities) p /= total;
    out.predicted_class = argmax(out.logits);
    return out;
}

void run_forward(const ModelParams& p, const GraphInput& in, const Eigen::VectorXd& gates, Cache& cache) {
    check_shapes(p, in, gates);
    const int layers = p.config.num_layers;
    const int hidden = p.config.hidden_dim;
    std::array<int, kNodeTypes> rows = {in.rows(kVesselType), in.rows(kRegionType)};

    // A gate of exactly 0 removes the edge from the neighbourhood, so it also
    // leaves the mean's denominator; gate 0 and deletion then agree exactly.
    for (int r = 0; r < kRelations; ++r) {
        Eigen::VectorXd count = Eigen::VectorXd::Zero(rows[kRelationTarget[r]]);
        for (const auto& m : in.messages) {
            if (m.relation == r && gates[m.edge] != 0.0) count[m.dst] += 1.0;
        }
        cache.denom[r] = count.cwiseMax(1.0);
    }

    cache.h.assign(layers + 1, {});
    cache.z.assign(layers, {});
    cache.agg.assign(layers, {});
    cache.h[0] = {in.vessel_x, in.region_x};
    for (int l = 0; l < layers; ++l) {
        const SageLayer& layer = p.layers[l];
        const auto& h = cache.h[l];
        auto& z = cache.z[l];
        for (int t = 0; t < kNodeTypes; ++t) {
            z[t] = h[t] * layer.self_weight[t].transpose();
            z[t].rowwise() += layer.self_bias[t].transpose();
        }
        for (int r = 0; r < kRelations; ++r) {
            const int src = kRelationSource[r];
            const int dst = kRelationTarget[r];
            RowMatrix& a = cache.agg[l][r];
            a = RowMatrix::Zero(rows[dst], h[src].cols());
            for (const auto& m : in.messages) {
                if (m.relation == r) a.row(m.dst) += gates[m.edge] * h[src].row(m.src);
            }
            for (int v = 0; v < rows[dst]; ++v) a.row(v) /= cache.denom[r][v];
            if (rows[dst] > 0) z[dst] += a * layer.relation_weight[r].transpose();
        }
        for (int t = 0; t < kNodeTypes; ++t) cache.h[l + 1][t] = z[t].cwiseMax(0.0);
    }

    const auto& final_h = cache.h[layers];
    cache.pooled = Eigen::VectorXd::Zero(p.readout_width());
    for (int k = 0; k < kPoolKinds; ++k) cache.argmax_row[k].assign(hidden, -1);
    auto pool_row = [&](int kind, const auto& row, int index) {
        auto sum = cache.pooled.segment(2 * kind * hidden, hidden);
        auto max = cache.pooled.segment((2 * kind + 1) * hidden, hidden);
        sum += row.transpose();
        for (int j = 0; j < hidden; ++j) {
            if (cache.argmax_row[kind][j] < 0 || row(j) > max(j)) {
                max(j) = row(j);
                cache.argmax_row[kind][j] = index;
            }
        }
    };
    for (int i = 0; i < rows[kVesselType]; ++i) pool_row(0, final_h[kVesselType].row(i), i);
    for (int i = 0; i < rows[kRegionType]; ++i) pool_row(in.region_pool[i], final_h[kRegionType].row(i), i);

    cache.z1 = p.mlp_w1 * cache.pooled + p.mlp_b1;
    cache.a1 = cache.z1.cwiseMax(0.0);
    cache.logits = p.mlp_w2 * cache.a1 + p.mlp_b2;
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams g = p;
    for_each_tensor(g, [](const std::string&, auto& t) { t.setZero(); });
    return g;
}

}  // namespace

void ModelConfig::validate() const {
    if (hidden_dim < 1) throw Error(ErrorCode::InvalidConfig, "hidden_dim must be >= 1");
    if (num_layers < 1) throw Error(ErrorCode::InvalidConfig, "num_layers must be >= 1");
    if (mlp_hidden < 1) throw Error(ErrorCode::InvalidConfig, "mlp_hidden must be >= 1");
    if (num_classes != kNumClasses) throw Error(ErrorCode::InvalidConfig, "num_classes must be 3");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be finite and >= 0");
    if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
}

FeatureStats FeatureStats::identity() {
    FeatureStats s;
    for (auto& m : s.mean) m.fill(0.0);
    for (auto& d : s.std) d.fill(1.0);
    return s;
}

std::size_t parameter_count(const ModelParams& params) {
    std::size_t n = 0;
    for_each_tensor(params, [&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> out;
    out.reserve(parameter_count(params));
    for_each_tensor(params, [&](const std::string&, const auto& t) { out.insert(out.end(), t.data(), t.data() + t.size()); });
    return out;
}

void unflatten(ModelParams& params, std::span<const double> values) {
    if (values.size() != parameter_count(params)) throw Error(ErrorCode::ShapeMismatch, "flat parameter length");
    std::size_t off = 0;
    for_each_tensor(params, [&](const std::string&, auto& t) {
        std::copy_n(values.begin() + static_cast<long>(off), t.size(), t.data());
        off += static_cast<std::size_t>(t.size());
    });
}

bool all_finite(const ModelParams& params) {
    bool ok = true;
    for_each_tensor(params, [&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
}

int argmax(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = static_cast<int>(i);
    }
    return best;
}

ModelParams init_model(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.layers.resize(config.num_layers);
    for (int l = 0; l < config.num_layers; ++l) {
        const int d_in = l == 0 ? kNodeFeatureDim : config.hidden_dim;
        for (int t = 0; t < kNodeTypes; ++t) {
            p.layers[l].self_weight[t] = Eigen::MatrixXd::Zero(config.hidden_dim, d_in);
            p.layers[l].self_bias[t] = Eigen::VectorXd::Zero(config.hidden_dim);
        }
        for (int r = 0; r < kRelations; ++r) p.layers[l].relation_weight[r] = Eigen::MatrixXd::Zero(config.hidden_dim, d_in);
    }
    p.mlp_w1 = Eigen::MatrixXd::Zero(config.mlp_hidden, p.readout_width());
    p.mlp_b1 = Eigen::VectorXd::Zero(config.mlp_hidden);
    p.mlp_w2 = Eigen::MatrixXd::Zero(config.num_classes, config.mlp_hidden);
    p.mlp_b2 = Eigen::VectorXd::Zero(config.num_classes);

    std::mt19937_64 rng(config.seed);
    for_each_tensor(p, [&](const std::string&, auto& t) {
        if (t.cols() == 1) return;  // biases stay zero
        const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
        std::uniform_real_distribution<double> dist(-a, a);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    });
    return p;
}

FeatureStats fit_normalization(std::span<const HeteroGraph> dataset) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit normalization on an empty dataset");
    FeatureStats stats = FeatureStats::identity();
    for (int type = 0; type < kNodeTypes; ++type) {
        std::array<double, kNodeFeatureDim> sum{}, sq{};
        std::size_t n = 0;
        auto add = [&](const std::array<double, kNodeFeatureDim>& f) {
            for (int i = 0; i < kNodeFeatureDim; ++i) sum[i] += f[i];
            ++n;
        };
        for (const HeteroGraph& g : dataset) {
            if (type == kVesselType) {
                for (const auto& v : g.vessels) add(vessel_features(v, g.height, g.width));
            } else {
                for (const auto& r : g.regions) add(region_features(r, g.height, g.width));
            }
        }
        if (n == 0) continue;
        for (int i = 0; i < kNodeFeatureDim; ++i) stats.mean[type][i] = sum[i] / static_cast<double>(n);
        for (const HeteroGraph& g : dataset) {
            auto acc = [&](const std::array<double, kNodeFeatureDim>& f) {
                for (int i = 0; i < kNodeFeatureDim; ++i) sq[i] += (f[i] - stats.mean[type][i]) * (f[i] - stats.mean[type][i]);
            };
            if (type == kVesselType) {
                for (const auto& v : g.vessels) acc(vessel_features(v, g.height, g.width));
            } else {
                for (const auto& r : g.regions) acc(region_features(r, g.height, g.width));
            }
        }
        for (int i = 0; i < kNodeFeatureDim; ++i) {
            stats.std[type][i] = std::max(std::sqrt(sq[i] / static_cast<double>(n)), kMinStd);
        }
    }
    return stats;
}

std::array<double, kNodeFeatureDim> normalize(const FeatureStats& s, int type, const std::array<double, kNodeFeatureDim>& raw) {
    std::array<double, kNodeFeatureDim> out{};
    for (int i = 0; i < kNodeFeatureDim; ++i) out[i] = (raw[i] - s.mean[type][i]) / s.std[type][i];
    return out;
}

std::array<double, kNodeFeatureDim> denormalize(const FeatureStats& s, int type, const std::array<double, kNodeFeatureDim>& scaled) {
    std::array<double, kNodeFeatureDim> out{};
    for (int i = 0; i < kNodeFeatureDim; ++i) out[i] = scaled[i] * s.std[type][i] + s.mean[type][i];
    return out;
}

GraphInput prepare_input(const ModelParams& params, const HeteroGraph& g) {
    if (g.vessels.empty()) throw Error(ErrorCode::EmptyGraph, "graph '" + g.source_id + "' has no vessel nodes");
    GraphInput in;
    in.vessel_x.resize(static_cast<Eigen::Index>(g.vessels.size()), kNodeFeatureDim);
    in.region_x.resize(static_cast<Eigen::Index>(g.regions.size()), kNodeFeatureDim);
    for (std::size_t i = 0; i < g.vessels.size(); ++i) {
        const auto f = normalize(params.norm, kVesselType, vessel_features(g.vessels[i], g.height, g.width));
        for (int k = 0; k < kNodeFeatureDim; ++k) in.vessel_x(static_cast<Eigen::Index>(i), k) = f[k];
    }
    for (std::size_t i = 0; i < g.regions.size(); ++i) {
        const auto f = normalize(params.norm, kRegionType, region_features(g.regions[i], g.height, g.width));
        for (int k = 0; k < kNodeFeatureDim; ++k) in.region_x(static_cast<Eigen::Index>(i), k) = f[k];
        in.region_pool.push_back(g.regions[i].kind == RegionKind::FAZ ? 2 : 1);
    }
    in.gates.resize(static_cast<Eigen::Index>(g.edges.size()));
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const Edge& edge = g.edges[e];
        const int ei = static_cast<int>(e);
        in.gates[ei] = edge.gate;
        if (edge.relation == Relation::Touches) {
            in.messages.push_back({kTouches, edge.src, edge.dst, ei});
            in.messages.push_back({kTouches, edge.dst, edge.src, ei});
        } else {
            in.messages.push_back({kBorders, edge.src, edge.dst, ei});
            in.messages.push_back({kBorderedBy, edge.dst, edge.src, ei});
        }
    }
    return in;
}

Prediction forward(const ModelParams& params, const GraphInput& input, const Eigen::VectorXd& gates) {
    Cache cache;
    run_forward(params, input, gates, cache);
    return to_prediction(cache.logits);
}

Prediction forward(const ModelParams& params, const GraphInput& input) { return forward(params, input, input.gates); }

Prediction forward(const ModelParams& params, const HeteroGraph& graph) { return forward(params, prepare_input(params, graph)); }

Prediction predict(const ModelParams& params, const HeteroGraph& graph) { return forward(params, graph); }

double loss(const std::array<double, kNumClasses>& logits, int label, std::span<const double> class_weights) {
    if (label < 0 || label >= kNumClasses) throw Error(ErrorCode::OutOfRange, "label " + std::to_string(label));
    const double m = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double l : logits) total += std::exp(l - m);
    const double log_prob = logits[label] - m - std::log(total);
    const double w = class_weights.empty() ? 1.0 : class_weights[label];
    return -w * log_prob;
}

double loss(const Prediction& prediction, int label, std::span<const double> class_weights) {
    return loss(prediction.logits, label, class_weights);
}

Gradients gradients(const ModelParams& params, const GraphInput& input, const Target& target) {
    return gradients(params, input, input.gates, target);
}

Gradients gradients(const ModelParams& p, const GraphInput& in, const Eigen::VectorXd& gates, const Target& target) {
    Cache cache;
    run_forward(p, in, gates, cache);
    const int layers = p.config.num_layers;
    const int hidden = p.config.hidden_dim;

    Gradients g;
    g.params = zeros_like(p);

    Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(kNumClasses);
    const Prediction pred = to_prediction(cache.logits);
    g.prediction = pred;
    if (target.kind == Target::Kind::Logit) {
        if (target.cls < 0 || target.cls >= kNumClasses) throw Error(ErrorCode::OutOfRange, "target class");
        g.value = target.scale * cache.logits[target.cls];
        dlogits[target.cls] = target.scale;
    } else {
        g.value = target.scale * loss(pred.logits, target.cls, target.class_weights);
        const double w = target.class_weights[target.cls];
        for (int c = 0; c < kNumClasses; ++c) dlogits[c] = target.scale * w * (pred.probabilities[c] - (c == target.cls ? 1.0 : 0.0));
    }

    g.params.mlp_w2 = dlogits * cache.a1.transpose();
    g.params.mlp_b2 = dlogits;
    Eigen::VectorXd dz1 = p.mlp_w2.transpose() * dlogits;
    for (Eigen::Index i = 0; i < dz1.size(); ++i) {
        if (!(cache.z1[i] > 0.0)) dz1[i] = 0.0;
    }
    g.params.mlp_w1 = dz1 * cache.pooled.transpose();
    g.params.mlp_b1 = dz1;
    const Eigen::VectorXd dpooled = p.mlp_w1.transpose() * dz1;

    std::array<RowMatrix, kNodeTypes> dh;
    for (int t = 0; t < kNodeTypes; ++t) dh[t] = RowMatrix::Zero(in.rows(t), hidden);
    auto unpool = [&](int kind, RowMatrix& target_rows, int index) {
        target_rows.row(index) += dpooled.segment(2 * kind * hidden, hidden).transpose();
    };
    for (int i = 0; i < in.rows(kVesselType); ++i) unpool(0, dh[kVesselType], i);
    for (int i = 0; i < in.rows(kRegionType); ++i) unpool(in.region_pool[i], dh[kRegionType], i);
    for (int k = 0; k < kPoolKinds; ++k) {
        RowMatrix& rows = k == 0 ? dh[kVesselType] : dh[kRegionType];
        for (int j = 0; j < hidden; ++j) {
            const int arg = cache.argmax_row[k][j];
            if (arg >= 0) rows(arg, j) += dpooled[(2 * k + 1) * hidden + j];
        }
    }

    g.gates = Eigen::VectorXd::Zero(gates.size());
    for (int l = layers - 1; l >= 0; --l) {
        const SageLayer& layer = p.layers[l];
        SageLayer& glayer = g.params.layers[l];
        const auto& h = cache.h[l];
        std::array<RowMatrix, kNodeTypes> dz;
        std::array<RowMatrix, kNodeTypes> dprev;
        for (int t = 0; t < kNodeTypes; ++t) {
            dz[t] = dh[t].cwiseProduct((cache.z[l][t].array() > 0.0).cast<double>().matrix());
            glayer.self_weight[t] = dz[t].transpose() * h[t];
            glayer.self_bias[t] = dz[t].colwise().sum().transpose();
            dprev[t] = dz[t] * layer.self_weight[t];
        }
        for (int r = 0; r < kRelations; ++r) {
            const int src = kRelationSource[r];
            const int dst = kRelationTarget[r];
            if (in.rows(dst) == 0) continue;
            glayer.relation_weight[r] = dz[dst].transpose() * cache.agg[l][r];
            const RowMatrix da = dz[dst] * layer.relation_weight[r];
            for (const auto& m : in.messages) {
                if (m.relation != r) continue;
                const double d = cache.denom[r][m.dst];
                const double gate = gates[m.edge];
                dprev[src].row(m.src) += (gate / d) * da.row(m.dst);
                g.gates[m.edge] += h[src].row(m.src).dot(da.row(m.dst)) / d;
            }
        }
        dh = std::move(dprev);
    }
    g.vessel_x = std::move(dh[kVesselType]);
    g.region_x = std::move(dh[kRegionType]);
    return g;
}

std::array<double, kNumClasses> class_weights(std::span<const int> labels, ClassWeighting weighting) {
    std::array<double, kNumClasses> w{1.0, 1.0, 1.0};
    if (weighting == ClassWeighting::None) return w;
    std::array<std::size_t, kNumClasses> counts{};
    for (int y : labels) {
        if (y < 0 || y >= kNumClasses) throw Error(ErrorCode::OutOfRange, "label " + std::to_string(y));
        ++counts[y];
    }
    const double n = static_cast<double>(labels.size());
    for (int c = 0; c < kNumClasses; ++c) {
        w[c] = counts[c] == 0 ? 0.0 : n / (kNumClasses * static_cast<double>(counts[c]));
    }
    return w;
}

TrainResult train(std::span<const HeteroGraph> dataset, const ModelConfig& config) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
    config.validate();
    std::vector<int> labels;
    labels.reserve(dataset.size());
    for (const HeteroGraph& g : dataset) {
        if (!g.label) throw Error(ErrorCode::InvalidArgument, "training graph '" + g.source_id + "' has no label");
        labels.push_back(*g.label);
    }

    TrainResult result;
    ModelParams& params = result.params;
    params = init_model(config);
    params.norm = fit_normalization(dataset);
    std::vector<GraphInput> inputs;
    inputs.reserve(dataset.size());
    for (const HeteroGraph& g : dataset) inputs.push_back(prepare_input(params, g));
    const auto weights = class_weights(labels, config.class_weighting);

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> theta = flatten(params);
    std::vector<double> m1(theta.size(), 0.0), m2(theta.size(), 0.0);
    long step = 0;

    std::mt19937_64 shuffle_rng(config.seed ^ 0x5deece66dULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> losses(dataset.size());
    std::vector<int> predicted(dataset.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(shuffle_rng)]);
        }
        for (std::size_t idx : order) {
            const Gradients grad = gradients(params, inputs[idx], Target::loss(labels[idx], weights));
            losses[idx] = grad.value;
            predicted[idx] = grad.prediction.predicted_class;

            const std::vector<double> gflat = flatten(grad.params);
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < theta.size(); ++k) {
                m1[k] = beta1 * m1[k] + (1.0 - beta1) * gflat[k];
                m2[k] = beta2 * m2[k] + (1.0 - beta2) * gflat[k] * gflat[k];
                theta[k] -= config.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + eps);
            }
            unflatten(params, theta);
        }
        EpochStats stats;
        for (double l : losses) stats.mean_loss += l;
        stats.mean_loss /= static_cast<double>(losses.size());
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t i = 0; i < labels.size(); ++i) pairs.emplace_back(labels[i], predicted[i]);
        stats.train_balanced_accuracy = balanced_accuracy(confusion(pairs));
        result.history.push_back(stats);
    }
    return result;
}

}  // namespace octagraph
