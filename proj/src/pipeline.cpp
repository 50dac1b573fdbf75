#include "octagraph/pipeline.hpp"

#include "octagraph/attribution.hpp"
#include "octagraph/error.hpp"
#include "octagraph/graph_io.hpp"
#include "octagraph/instruct.hpp"
#include "octagraph/knowledge_table.hpp"
#include "octagraph/metrics.hpp"
#include "octagraph/model_io.hpp"
#include "octagraph/parallel.hpp"
#include "octagraph/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace octagraph {

namespace fs = std::filesystem;

namespace {

// Runs fn and re-raises any library error with the case id in front.
template <typename Fn>
auto for_case(const std::string& source_id, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), "case '" + source_id + "': " + e.message());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "case '" + source_id + "': " + e.what());
    }
}

void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + p.string() + "': " + ec.message());
}

Json scores_json(const ClassScores& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j) {
    RunConfig c;
    if (!j.is_object()) throw_schema("run config must be an object");
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threshold")) c.threshold = j.at("threshold").get<int>();
        if (j.contains("min_region_area")) c.graph.min_region_area = j.at("min_region_area").get<int>();
        if (j.contains("model")) c.model = config_from_json(j.at("model"));
        if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
        if (j.contains("top_k")) c.top_k = j.at("top_k").get<int>();
        if (j.contains("ig_steps")) c.ig_steps = j.at("ig_steps").get<int>();
        if (j.contains("stage2_per_image")) c.stage2_per_image = j.at("stage2_per_image").get<int>();
        if (j.contains("retrieval_k")) c.retrieval_k = j.at("retrieval_k").get<int>();
        if (j.contains("workers")) c.workers = j.at("workers").get<int>();
        if (j.contains("model_path")) c.model_path = j.at("model_path").get<std::string>();
        if (j.contains("teacher")) {
            const Json& t = j.at("teacher");
            if (t.contains("mock")) c.mock_teacher = t.at("mock").get<bool>();
            if (t.contains("base_url")) c.teacher.base_url = t.at("base_url").get<std::string>();
            if (t.contains("model")) c.teacher.model = t.at("model").get<std::string>();
            if (t.contains("long_context")) c.teacher.long_context = t.at("long_context").get<bool>();
            if (t.contains("timeout_seconds")) c.teacher.timeout_seconds = t.at("timeout_seconds").get<double>();
            if (t.contains("max_retries")) c.teacher.max_retries = t.at("max_retries").get<int>();
            if (t.contains("parallelism")) c.teacher.parallelism = t.at("parallelism").get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw_schema(std::string("run config: ") + e.what());
    }
    if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) throw Error(ErrorCode::InvalidConfig, "train_fraction must be in (0, 1]");
    if (c.top_k < 0 || c.stage2_per_image < 0 || c.retrieval_k < 1) throw Error(ErrorCode::InvalidConfig, "negative count in run config");
    if (c.ig_steps < 1) throw Error(ErrorCode::InvalidSteps, "ig_steps must be >= 1");
    return c;
}

Json RunConfig::to_json() const {
    Json j;
    j["seed"] = seed;
    j["threshold"] = threshold;
    j["min_region_area"] = graph.min_region_area;
    j["model"] = config_to_json(model);
    j["train_fraction"] = train_fraction;
    j["top_k"] = top_k;
    j["ig_steps"] = ig_steps;
    j["stage2_per_image"] = stage2_per_image;
    j["retrieval_k"] = retrieval_k;
    j["workers"] = workers;
    if (model_path) j["model_path"] = *model_path;
    j["teacher"] = {{"mock", mock_teacher},
                    {"base_url", teacher.base_url},
                    {"model", teacher.model},
                    {"long_context", teacher.long_context},
                    {"timeout_seconds", teacher.timeout_seconds},
                    {"max_retries", teacher.max_retries},
                    {"parallelism", teacher.parallelism}};
    return j;
}

Json evaluation_metrics(std::span<const std::pair<int, int>> pairs) {
    const ConfusionMatrix m = confusion(pairs, kNumClasses);
    Json j;
    j["count"] = m.total();
    j["confusion"] = m.counts;
    j["balanced_accuracy"] = balanced_accuracy(m);
    Json per_class;
    const auto scores = precision_recall_f1(m);
    for (int c = 0; c < kNumClasses; ++c) per_class[std::string(class_name(c))] = scores_json(scores[c]);
    j["per_class"] = std::move(per_class);

    const auto pooled_pairs = pool_binary(pairs);
    const ConfusionMatrix pooled = confusion(pooled_pairs, 2);
    const auto pooled_scores = precision_recall_f1(pooled);
    j["pooled"] = {{"confusion", pooled.counts},
                   {"balanced_accuracy", balanced_accuracy(pooled)},
                   {"Healthy", scores_json(pooled_scores[0])},
                   {"DR", scores_json(pooled_scores[1])}};
    return j;
}

Split split_cases(const Manifest& manifest, double train_fraction, std::uint64_t seed) {
    Split s;
    std::mt19937_64 rng(seed);
    for (int label = 0; label < kNumClasses; ++label) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            if (manifest.entries[i].label == label) members.push_back(i);
        }
        for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng() % i]);
        const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(members.size())));
        s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
        s.test.insert(s.test.end(), members.begin() + static_cast<long>(n_train), members.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

RunSummary run_pipeline(const fs::path& manifest_path, const RunConfig& config, const fs::path& out_dir) {
    const Manifest manifest = load_manifest(manifest_path);
    {
        std::set<std::string> seen;
        for (const auto& e : manifest.entries) {
            if (!seen.insert(e.source_id).second) throw Error(ErrorCode::DuplicateSourceId, "duplicate source_id '" + e.source_id + "'");
        }
    }
    const int workers = config.workers > 0 ? config.workers : default_workers();
    const std::size_t n = manifest.entries.size();
    for (const char* sub : {"graphs", "predictions", "reports", "heatmaps", "tables", "prompts"}) make_dir(out_dir / sub);

    // Ingest and graph construction.
    std::vector<BinaryMask> masks(n);
    std::vector<HeteroGraph> graphs(n);
    std::vector<std::string> images(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const ManifestEntry& e = manifest.entries[i];
        for_case(e.source_id, [&] {
            const fs::path image = resolve_entry(manifest_path, e);
            images[i] = image.string();
            masks[i] = load_mask(image, config.threshold);
            masks[i].source_id = e.source_id;
            graphs[i] = graph_from_mask(masks[i], config.graph, e.label);
            write_file((out_dir / "graphs" / (e.source_id + ".json")).string(), encode_graph(graphs[i]));
            return 0;
        });
    });

    // Model.
    const Split split = split_cases(manifest, config.train_fraction, config.seed);
    ModelParams params;
    Json training = nullptr;
    if (config.model_path) {
        params = decode_model(read_file(*config.model_path));
    } else {
        std::vector<HeteroGraph> train_set;
        for (std::size_t i : split.train) train_set.push_back(graphs[i]);
        if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "no labeled training cases in manifest");
        TrainResult result = train(train_set, config.model);
        params = std::move(result.params);
        training = {{"epochs", result.history.size()},
                    {"final_loss", result.history.empty() ? 0.0 : result.history.back().mean_loss},
                    {"final_train_balanced_accuracy",
                     result.history.empty() ? 0.0 : result.history.back().train_balanced_accuracy}};
    }
    write_file((out_dir / "model.json").string(), encode_model(params));

    // Prediction, attribution, heatmap, table.
    std::vector<Prediction> predictions(n);
    std::vector<AttributionReport> reports(n);
    std::vector<KnowledgeTable> tables(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const std::string& id = manifest.entries[i].source_id;
        for_case(id, [&] {
            predictions[i] = predict(params, graphs[i]);
            write_file((out_dir / "predictions" / (id + ".json")).string(),
                       dump_canonical(prediction_to_json(id, predictions[i])));
            reports[i] = attribute(params, graphs[i], predictions[i].predicted_class, config.ig_steps);
            write_file((out_dir / "reports" / (id + ".json")).string(), encode_report(reports[i]));
            write_pgm(out_dir / "heatmaps" / (id + ".pgm"), export_heatmap(reports[i], graphs[i], masks[i]));
            tables[i] = build_table(graphs[i], reports[i], predictions[i], config.top_k);
            write_file((out_dir / "tables" / (id + ".json")).string(), encode_table(tables[i]));
            return 0;
        });
    });

    // Case index over training cases (all labeled cases when the model was given).
    std::vector<std::size_t> indexed = split.train;
    if (config.model_path) {
        indexed.insert(indexed.end(), split.test.begin(), split.test.end());
        std::sort(indexed.begin(), indexed.end());
    }
    std::vector<CaseEntry> entries;
    for (std::size_t i : indexed) {
        const std::string& id = manifest.entries[i].source_id;
        entries.push_back({distribution_vector(graphs[i]), images[i], "graphs/" + id + ".json", "tables/" + id + ".json"});
    }
    const CaseIndex index = build_index(std::move(entries));
    write_file((out_dir / "index.json").string(), encode_index(index));

    // Prompts.
    std::vector<PromptSet> prompt_sets(n);
    Stage2Options stage2;
    stage2.model_name = config.teacher.model;
    parallel_for(n, workers, [&](std::size_t i) {
        const std::string& id = manifest.entries[i].source_id;
        for_case(id, [&] {
            std::vector<RetrievedCase> context;
            if (config.teacher.long_context && !index.entries.empty()) {
                const auto matches = query_top_k(index, distribution_vector(graphs[i]), static_cast<int>(kContextCases));
                if (matches.size() == kContextCases) {
                    for (const Match& m : matches) {
                        const CaseEntry& ce = index.entries[m.entry];
                        context.push_back({ce.vector.source_id, ce.vector.label, m.distance, ce.vector.values, ce.image});
                    }
                }
            }
            PromptSet& set = prompt_sets[i];
            set.source_id = id;
            set.image = images[i];
            if (tables[i].ground_truth) set.requests.push_back(render_stage1(tables[i], context, config.teacher.model));
            auto s2 = render_stage2(tables[i], config.stage2_per_image, config.seed, context, stage2);
            set.requests.insert(set.requests.end(), s2.begin(), s2.end());
            write_file((out_dir / "prompts" / (id + ".json")).string(), encode_prompts({set}));
            return 0;
        });
    });

    // Teacher and datasets.
    MockTeacher mock;
    std::unique_ptr<HttpTeacher> http;
    if (!config.mock_teacher) http = std::make_unique<HttpTeacher>(config.teacher);
    Teacher& teacher = config.mock_teacher ? static_cast<Teacher&>(mock) : *http;
    std::vector<InstructionSample> stage1;
    std::vector<InstructionSample> stage2_samples;
    for (std::size_t i = 0; i < n; ++i) {
        const PromptSet& set = prompt_sets[i];
        if (set.requests.empty()) continue;
        for_case(set.source_id, [&] {
            const auto replies = generate_pairs(teacher, set.requests, config.teacher.parallelism);
            std::vector<QaPair> s1;
            std::vector<QaPair> s2;
            for (std::size_t r = 0; r < replies.size(); ++r) {
                auto& dst = set.requests[r].stage == 1 ? s1 : s2;
                dst.insert(dst.end(), replies[r].begin(), replies[r].end());
            }
            if (!s1.empty()) {
                auto samples = assemble_samples(set.source_id, set.image, 1, s1);
                stage1.insert(stage1.end(), samples.begin(), samples.end());
            }
            if (!s2.empty()) {
                auto samples = assemble_samples(set.source_id, set.image, 2, s2);
                stage2_samples.insert(stage2_samples.end(), samples.begin(), samples.end());
            }
            return 0;
        });
    }
    write_file((out_dir / "dataset_stage1.jsonl").string(), encode_jsonl(stage1));
    write_file((out_dir / "dataset_stage2.jsonl").string(), encode_jsonl(stage2_samples));

    // Metrics.
    const auto pairs_for = [&](const std::vector<std::size_t>& ids) {
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t i : ids) pairs.emplace_back(*manifest.entries[i].label, predictions[i].predicted_class);
        return pairs;
    };
    double max_node_residual = 0.0;
    double max_edge_residual = 0.0;
    for (const auto& r : reports) {
        max_node_residual = std::max(max_node_residual, r.node_path.residual);
        max_edge_residual = std::max(max_edge_residual, r.edge_path.residual);
    }
    Json metrics;
    metrics["version"] = kFormatVersion;
    metrics["cases"] = n;
    metrics["train_cases"] = split.train.size();
    metrics["test_cases"] = split.test.size();
    metrics["training"] = training;
    metrics["train"] = evaluation_metrics(pairs_for(split.train));
    metrics["test"] = evaluation_metrics(pairs_for(split.test));
    metrics["attribution"] = {{"steps", config.ig_steps},
                              {"max_node_residual", max_node_residual},
                              {"max_edge_residual", max_edge_residual}};
    metrics["dataset"] = {{"stage1_samples", stage1.size()}, {"stage2_samples", stage2_samples.size()}};
    write_file((out_dir / "metrics.json").string(), dump_canonical(metrics));

    RunSummary summary;
    summary.dir = out_dir;
    summary.cases = n;
    summary.stage1_samples = stage1.size();
    summary.stage2_samples = stage2_samples.size();
    summary.metrics = std::move(metrics);
    return summary;
}

}  // namespace octagraph
