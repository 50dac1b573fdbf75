#pragma once

#include "octagraph/vessel_graph.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace octagraph {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ClassWeighting { InverseFrequency, None };

struct ModelConfig {
    int hidden_dim = 64;
    int num_layers = 2;
    int mlp_hidden = 64;
    int num_classes = kNumClasses;
    std::uint64_t seed = 7;
    double learning_rate = 1e-3;
    int epochs = 200;
    ClassWeighting class_weighting = ClassWeighting::InverseFrequency;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Message-passing node types. ICA and FAZ share the region weights and are
// only separated at readout.
enum NodeType : int { kVesselType = 0, kRegionType = 1 };
inline constexpr int kNodeTypes = 2;

// Directed relations: vessel <- vessel (touches, both directions),
// region <- vessel (borders), vessel <- region (borders, reversed).
enum RelationType : int { kTouches = 0, kBorders = 1, kBorderedBy = 2 };
inline constexpr int kRelations = 3;
inline constexpr std::array<int, kRelations> kRelationSource = {kVesselType, kVesselType, kRegionType};
inline constexpr std::array<int, kRelations> kRelationTarget = {kVesselType, kRegionType, kVesselType};

// Readout pools: vessel, ICA, FAZ; each contributes sum and max.
inline constexpr int kPoolKinds = 3;

struct FeatureStats {
    std::array<std::array<double, kNodeFeatureDim>, kNodeTypes> mean{};
    std::array<std::array<double, kNodeFeatureDim>, kNodeTypes> std{};

    static FeatureStats identity();
    friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

struct SageLayer {
    std::array<Eigen::MatrixXd, kNodeTypes> self_weight;  // out x in
    std::array<Eigen::VectorXd, kNodeTypes> self_bias;
    std::array<Eigen::MatrixXd, kRelations> relation_weight;  // out x in
};

struct ModelParams {
    ModelConfig config;
    FeatureStats norm = FeatureStats::identity();
    std::vector<SageLayer> layers;
    Eigen::MatrixXd mlp_w1;
    Eigen::VectorXd mlp_b1;
    Eigen::MatrixXd mlp_w2;
    Eigen::VectorXd mlp_b2;

    int readout_width() const { return kPoolKinds * 2 * config.hidden_dim; }
};

/// Visits every learnable tensor in a fixed order as fn(name, tensor).
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    static constexpr std::array<const char*, kNodeTypes> type_names = {"vessel", "region"};
    static constexpr std::array<const char*, kRelations> rel_names = {"touches", "borders", "bordered_by"};
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        for (int t = 0; t < kNodeTypes; ++t) fn(prefix + "self_weight." + type_names[t], p.layers[l].self_weight[t]);
        for (int t = 0; t < kNodeTypes; ++t) fn(prefix + "self_bias." + type_names[t], p.layers[l].self_bias[t]);
        for (int r = 0; r < kRelations; ++r) fn(prefix + "relation_weight." + rel_names[r], p.layers[l].relation_weight[r]);
    }
    fn(std::string("mlp.w1"), p.mlp_w1);
    fn(std::string("mlp.b1"), p.mlp_b1);
    fn(std::string("mlp.w2"), p.mlp_w2);
    fn(std::string("mlp.b2"), p.mlp_b2);
}

std::size_t parameter_count(const ModelParams& params);
std::vector<double> flatten(const ModelParams& params);
void unflatten(ModelParams& params, std::span<const double> values);
bool all_finite(const ModelParams& params);

struct Prediction {
    std::array<double, kNumClasses> logits{};
    std::array<double, kNumClasses> probabilities{};
    int predicted_class = 0;
};

/// Normalized model input for one graph. Gates are kept separately so they can
/// be varied along an attribution path.
struct GraphInput {
    RowMatrix vessel_x;
    RowMatrix region_x;
    std::vector<int> region_pool;  // 1 = ICA, 2 = FAZ (pool-kind index)
    struct Message {
        int relation;
        int src;
        int dst;
        int edge;
    };
    std::vector<Message> messages;
    Eigen::VectorXd gates;

    int rows(int type) const { return type == kVesselType ? static_cast<int>(vessel_x.rows()) : static_cast<int>(region_x.rows()); }
    RowMatrix& features(int type) { return type == kVesselType ? vessel_x : region_x; }
    const RowMatrix& features(int type) const { return type == kVesselType ? vessel_x : region_x; }
};

/// Scalar whose gradient is requested: a class logit or the weighted loss.
struct Target {
    enum class Kind { Logit, Loss } kind = Kind::Logit;
    int cls = 0;
    std::array<double, kNumClasses> class_weights{1.0, 1.0, 1.0};
    double scale = 1.0;

    static Target logit(int cls, double scale = 1.0) { return {Kind::Logit, cls, {1.0, 1.0, 1.0}, scale}; }
    static Target loss(int label, const std::array<double, kNumClasses>& weights) { return {Kind::Loss, label, weights, 1.0}; }
};

struct Gradients {
    double value = 0.0;  // the differentiated scalar
    Prediction prediction;
    ModelParams params;  // same shapes as the model, holding d value / d weight
    RowMatrix vessel_x;
    RowMatrix region_x;
    Eigen::VectorXd gates;
};

struct EpochStats {
    double mean_loss = 0.0;
    double train_balanced_accuracy = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

ModelParams init_model(const ModelConfig& config);

/// Population mean/std per node type and feature; std clamped to >= 1e-6.
FeatureStats fit_normalization(std::span<const HeteroGraph> dataset);

std::array<double, kNodeFeatureDim> normalize(const FeatureStats& stats, int type, const std::array<double, kNodeFeatureDim>& raw);
std::array<double, kNodeFeatureDim> denormalize(const FeatureStats& stats, int type, const std::array<double, kNodeFeatureDim>& scaled);

GraphInput prepare_input(const ModelParams& params, const HeteroGraph& graph);

Prediction forward(const ModelParams& params, const GraphInput& input);
Prediction forward(const ModelParams& params, const GraphInput& input, const Eigen::VectorXd& gates);
Prediction forward(const ModelParams& params, const HeteroGraph& graph);
Prediction predict(const ModelParams& params, const HeteroGraph& graph);

/// Weighted cross-entropy -w[label] * log softmax(logits)[label].
double loss(const Prediction& prediction, int label, std::span<const double> class_weights);
double loss(const std::array<double, kNumClasses>& logits, int label, std::span<const double> class_weights);

Gradients gradients(const ModelParams& params, const GraphInput& input, const Target& target);
Gradients gradients(const ModelParams& params, const GraphInput& input, const Eigen::VectorXd& gates, const Target& target);

/// w_c = N / (C * N_c); classes absent from the data get weight 0.
std::array<double, kNumClasses> class_weights(std::span<const int> labels, ClassWeighting weighting);

TrainResult train(std::span<const HeteroGraph> dataset, const ModelConfig& config);

/// Index of the largest value, lowest index on ties.
int argmax(std::span<const double> values);

}  // namespace octagraph
