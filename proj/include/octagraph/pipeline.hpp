#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/gnn.hpp"
#include "octagraph/synth.hpp"
#include "octagraph/teacher_client.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace octagraph {

struct RunConfig {
    std::uint64_t seed = 7;
    int threshold = kDefaultThreshold;
    GraphOptions graph;
    ModelConfig model;
    double train_fraction = 0.7;
    int top_k = 10;
    int ig_steps = 64;
    int stage2_per_image = 30;
    int retrieval_k = 3;
    TeacherConfig teacher;
    bool mock_teacher = true;
    int workers = 0;  // 0: hardware concurrency
    std::optional<std::string> model_path;  // skip training and use this model

    static RunConfig from_json(const Json& json);
    Json to_json() const;
};

/// Confusion matrix, balanced accuracy, per-class scores and the pooled
/// Healthy-vs-DR view for (true, predicted) pairs.
Json evaluation_metrics(std::span<const std::pair<int, int>> pairs);

/// Stratified, seeded train/test assignment of labeled cases; unlabeled cases
/// are in neither list. Returns manifest positions.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
Split split_cases(const Manifest& manifest, double train_fraction, std::uint64_t seed);

struct RunSummary {
    std::filesystem::path dir;
    std::size_t cases = 0;
    std::size_t stage1_samples = 0;
    std::size_t stage2_samples = 0;
    Json metrics;
};

/// ingest -> graph -> train (or load) -> predict -> attribute -> table -> index
/// -> prompts -> teacher -> dataset -> metrics. Stage errors name the case.
RunSummary run_pipeline(const std::filesystem::path& manifest_path, const RunConfig& config,
                        const std::filesystem::path& out_dir);

}  // namespace octagraph
