#include "octagraph/model_io.hpp"

#include "octagraph/error.hpp"

namespace octagraph {

Json config_to_json(const ModelConfig& c) {
    Json j;
    j["hidden_dim"] = c.hidden_dim;
    j["num_layers"] = c.num_layers;
    j["mlp_hidden"] = c.mlp_hidden;
    j["num_classes"] = c.num_classes;
    j["seed"] = c.seed;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["class_weighting"] = c.class_weighting == ClassWeighting::None ? "none" : "inverse_frequency";
    return j;
}

ModelConfig config_from_json(const Json& j, ModelConfig c) {
    if (!j.is_object()) throw_schema("model config must be an object");
    try {
        if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<int>();
        if (j.contains("num_layers")) c.num_layers = j.at("num_layers").get<int>();
        if (j.contains("mlp_hidden")) c.mlp_hidden = j.at("mlp_hidden").get<int>();
        if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
        if (j.contains("class_weighting")) {
            const auto w = j.at("class_weighting").get<std::string>();
            if (w == "none") {
                c.class_weighting = ClassWeighting::None;
            } else if (w == "inverse_frequency") {
                c.class_weighting = ClassWeighting::InverseFrequency;
            } else {
                throw_schema("unknown class_weighting '" + w + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw_schema(std::string("model config: ") + e.what());
    }
    return c;
}

std::string encode_model(const ModelParams& p) {
    Json j;
    j["version"] = kFormatVersion;
    j["config"] = config_to_json(p.config);
    Json norm;
    static constexpr std::array<const char*, kNodeTypes> names = {"vessel", "region"};
    for (int t = 0; t < kNodeTypes; ++t) {
        norm[names[t]] = {{"mean", p.norm.mean[t]}, {"std", p.norm.std[t]}};
    }
    j["normalization"] = std::move(norm);
    Json tensors = Json::array();
    for_each_tensor(p, [&](const std::string& name, const auto& t) {
        Json entry;
        entry["name"] = name;
        entry["rows"] = t.rows();
        entry["cols"] = t.cols();
        Json data = Json::array();
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
        }
        entry["data"] = std::move(data);
        tensors.push_back(std::move(entry));
    });
    j["tensors"] = std::move(tensors);
    return dump_canonical(j);
}

ModelParams decode_model(std::string_view bytes) {
    const Json j = parse_json(bytes);
    require_version(j);
    const ModelConfig config = config_from_json(require(j, "config"));
    ModelParams p = init_model(config);
    const Json& norm = require(j, "normalization");
    static constexpr std::array<const char*, kNodeTypes> names = {"vessel", "region"};
    for (int t = 0; t < kNodeTypes; ++t) {
        const Json& entry = require(norm, names[t]);
        p.norm.mean[t] = read_as<std::array<double, kNodeFeatureDim>>(entry, "mean");
        p.norm.std[t] = read_as<std::array<double, kNodeFeatureDim>>(entry, "std");
    }
    const Json& tensors = require(j, "tensors");
    if (!tensors.is_array()) throw_schema("tensors must be an array");
    std::size_t i = 0;
    for_each_tensor(p, [&](const std::string& name, auto& t) {
        if (i >= tensors.size()) throw_schema("missing tensor " + name);
        const Json& entry = tensors[i++];
        if (read_as<std::string>(entry, "name") != name) throw_schema("tensor order mismatch at " + name);
        if (read_as<long>(entry, "rows") != t.rows() || read_as<long>(entry, "cols") != t.cols()) {
            throw Error(ErrorCode::ShapeMismatch, "tensor " + name + " shape differs from config");
        }
        const auto data = read_as<std::vector<double>>(entry, "data");
        if (data.size() != static_cast<std::size_t>(t.size())) throw_schema("tensor " + name + " data length");
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[k++];
        }
    });
    if (i != tensors.size()) throw_schema("unexpected extra tensors");
    return p;
}

Json prediction_to_json(const std::string& source_id, const Prediction& pred) {
    Json j;
    j["version"] = kFormatVersion;
    j["source_id"] = source_id;
    j["logits"] = pred.logits;
    j["probabilities"] = pred.probabilities;
    j["predicted_class"] = pred.predicted_class;
    j["predicted_label"] = class_name(pred.predicted_class);
    return j;
}

Prediction prediction_from_json(const Json& j) {
    require_version(j);
    Prediction p;
    p.logits = read_as<std::array<double, kNumClasses>>(j, "logits");
    p.probabilities = read_as<std::array<double, kNumClasses>>(j, "probabilities");
    p.predicted_class = read_as<int>(j, "predicted_class");
    if (p.predicted_class < 0 || p.predicted_class >= kNumClasses) throw_schema("predicted_class out of range");
    return p;
}

}  // namespace octagraph
