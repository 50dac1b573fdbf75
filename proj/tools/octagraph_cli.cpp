#include "octagraph/attribution.hpp"
#include "octagraph/error.hpp"
#include "octagraph/graph_io.hpp"
#include "octagraph/instruct.hpp"
#include "octagraph/knowledge_table.hpp"
#include "octagraph/metrics.hpp"
#include "octagraph/model_io.hpp"
#include "octagraph/pipeline.hpp"
#include "octagraph/retrieval.hpp"
#include "octagraph/synth.hpp"
#include "octagraph/teacher_client.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace octagraph;

namespace {

void emit(const Json& j, bool as_json) {
    if (as_json) {
        std::cout << dump_canonical(j);
        return;
    }
    std::cout << j.dump(2) << "\n";
}

void write_or_print(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_file(out, text);
    }
}

HeteroGraph load_graph(const std::string& path) { return decode_graph(read_file(path)); }

// Manifest entries may point at masks (built into graphs here) or graph JSON files.
std::vector<HeteroGraph> graphs_from_manifest(const std::string& manifest_path, int threshold, const GraphOptions& options) {
    const Manifest m = load_manifest(manifest_path);
    std::vector<HeteroGraph> graphs;
    for (const ManifestEntry& e : m.entries) {
        const fs::path p = resolve_entry(manifest_path, e);
        try {
            HeteroGraph g;
            if (p.extension() == ".json") {
                g = load_graph(p.string());
                if (e.label) g.label = e.label;
            } else {
                BinaryMask mask = load_mask(p, threshold);
                mask.source_id = e.source_id;
                g = graph_from_mask(mask, options, e.label);
            }
            g.source_id = e.source_id;
            graphs.push_back(std::move(g));
        } catch (const Error& err) {
            throw Error(err.code(), "case '" + e.source_id + "': " + err.message());
        }
    }
    return graphs;
}

std::vector<HeteroGraph> collect_graphs(const std::string& manifest, const std::vector<std::string>& files, int threshold) {
    std::vector<HeteroGraph> graphs;
    if (!manifest.empty()) graphs = graphs_from_manifest(manifest, threshold, {});
    for (const auto& f : files) graphs.push_back(load_graph(f));
    if (graphs.empty()) throw Error(ErrorCode::EmptyDataset, "no graphs given (use --data or --graph)");
    return graphs;
}

// Quadrant counts recovered from the table's densities and totals.
DistributionVector table_vector(const KnowledgeTable& t) {
    DistributionVector d;
    d.source_id = t.source_id;
    d.label = t.ground_truth;
    const double nodes = t.vessel_count + t.region_count;
    for (int q = 0; q < 4; ++q) {
        d.values[q] = std::round(t.node_density[q] * nodes);
        d.values[4 + q] = std::round(t.edge_density[q] * t.edge_count);
    }
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-based OCTA knowledge pipeline: vessel graphs, GNN staging, attribution, teacher prompts"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "Machine-readable output");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load and validate a binary vessel mask");
    std::string ingest_mask, ingest_out;
    int threshold = kDefaultThreshold;
    ingest->add_option("--mask", ingest_mask, "PGM mask")->required();
    ingest->add_option("--threshold", threshold, "Foreground threshold (>=)");
    ingest->add_option("--out", ingest_out, "Write the binarized mask as PGM");
    ingest->add_flag("--json", as_json);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic masks and a manifest");
    DatasetConfig synth_cfg;
    std::string synth_out;
    int synth_size = kDefaultSynthSide;
    synth->add_option("--healthy", synth_cfg.counts[0], "Healthy masks");
    synth->add_option("--npdr", synth_cfg.counts[1], "NPDR masks");
    synth->add_option("--pdr", synth_cfg.counts[2], "PDR masks");
    synth->add_option("--seed", synth_cfg.seed, "Base seed");
    synth->add_option("--size", synth_size, "Mask side length");
    synth->add_option("--prefix", synth_cfg.prefix, "source_id prefix");
    synth->add_option("--out", synth_out, "Output directory")->required();

    // graph
    auto* graph = app.add_subcommand("graph", "Build the heterogeneous vessel graph of a mask");
    std::string graph_mask, graph_out, graph_label;
    GraphOptions graph_opts;
    graph->add_option("--mask", graph_mask, "PGM mask")->required();
    graph->add_option("--label", graph_label, "Ground truth (Healthy, NPDR, PDR or 0-2)");
    graph->add_option("--threshold", threshold, "Foreground threshold (>=)");
    graph->add_option("--min-region-area", graph_opts.min_region_area, "Smallest kept intercapillary area");
    graph->add_option("--out", graph_out, "Graph JSON (stdout if omitted)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the GNN on labeled graphs");
    std::string train_data, train_out, train_config;
    std::vector<std::string> train_graphs;
    ModelConfig model_cfg;
    train_cmd->add_option("--data", train_data, "Manifest of masks or graph JSON files");
    train_cmd->add_option("--graph", train_graphs, "Graph JSON file(s)");
    train_cmd->add_option("--config", train_config, "Model config JSON");
    train_cmd->add_option("--epochs", model_cfg.epochs, "Epochs");
    train_cmd->add_option("--seed", model_cfg.seed, "Initialization and shuffle seed");
    train_cmd->add_option("--lr", model_cfg.learning_rate, "Adam learning rate");
    train_cmd->add_option("--out", train_out, "Model JSON")->required();
    train_cmd->add_flag("--json", as_json);

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Classify a graph");
    std::string model_path, graph_path, predict_out;
    predict_cmd->add_option("--model", model_path, "Model JSON")->required();
    predict_cmd->add_option("--graph", graph_path, "Graph JSON")->required();
    predict_cmd->add_option("--out", predict_out, "Prediction JSON (stdout if omitted)");

    // attribute
    auto* attr = app.add_subcommand("attribute", "Integrated gradients over nodes and edges");
    std::string attr_out, heatmap_out, heatmap_mask;
    int steps = kDefaultIgSteps;
    int target = -1;
    attr->add_option("--model", model_path, "Model JSON")->required();
    attr->add_option("--graph", graph_path, "Graph JSON")->required();
    attr->add_option("--steps", steps, "Riemann steps");
    attr->add_option("--target", target, "Target class (default: predicted)");
    attr->add_option("--out", attr_out, "Report JSON (stdout if omitted)");
    attr->add_option("--heatmap", heatmap_out, "Write a vessel importance heatmap PGM");
    attr->add_option("--mask", heatmap_mask, "Mask for heatmap dimensions (default: graph dims)");

    // table
    auto* table_cmd = app.add_subcommand("table", "Compile the knowledge table");
    std::string report_path, pred_path, table_out;
    int top_k = kDefaultTopK;
    table_cmd->add_option("--graph", graph_path, "Graph JSON")->required();
    table_cmd->add_option("--report", report_path, "Attribution report JSON")->required();
    table_cmd->add_option("--model-pred", pred_path, "Prediction JSON")->required();
    table_cmd->add_option("--top-k", top_k, "Nodes and edges to keep");
    table_cmd->add_option("--out", table_out, "Table JSON (stdout if omitted)");

    // index
    auto* index_cmd = app.add_subcommand("index", "Build the similar-case index");
    std::string index_data, index_out;
    index_cmd->add_option("--data", index_data, "Manifest of masks or graph JSON files")->required();
    index_cmd->add_option("--out", index_out, "Index JSON")->required();

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "Nearest cases by quadrant distribution");
    std::string index_path;
    int k = kDefaultRetrievalK;
    bool normalized = false;
    retrieve->add_option("--index", index_path, "Index JSON")->required();
    retrieve->add_option("--graph", graph_path, "Query graph JSON")->required();
    retrieve->add_option("-k", k, "Matches to return");
    retrieve->add_flag("--normalized", normalized, "Compare L2-normalized vectors");
    retrieve->add_flag("--json", as_json);

    // prompts
    auto* prompts_cmd = app.add_subcommand("prompts", "Render teacher prompts for a table");
    std::string table_path, prompts_out, image_path;
    int stage = 2;
    int n = kStage2PerImage;
    std::uint64_t seed = 7;
    std::string teacher_model = "o1";
    prompts_cmd->add_option("--table", table_path, "Table JSON")->required();
    prompts_cmd->add_option("--index", index_path, "Index JSON; adds 3 similar cases as context");
    prompts_cmd->add_option("--stage", stage, "1 or 2")->check(CLI::IsMember({1, 2}));
    prompts_cmd->add_option("-n", n, "Stage-2 prompt count");
    prompts_cmd->add_option("--seed", seed, "Template seed");
    prompts_cmd->add_option("--image", image_path, "Image path recorded with the prompts");
    prompts_cmd->add_option("--model-name", teacher_model, "Teacher model name");
    prompts_cmd->add_option("--out", prompts_out, "Prompts JSON (stdout if omitted)");

    // dataset
    auto* dataset = app.add_subcommand("dataset", "Query the teacher and write instruction-tuning JSONL");
    std::string prompts_path, dataset_out;
    bool live = false;
    bool mock = false;
    int parallelism = 4;
    dataset->add_option("--prompts", prompts_path, "Prompts JSON")->required();
    auto* live_flag = dataset->add_flag("--live", live, "Call the endpoint from TEACHER_BASE_URL");
    dataset->add_flag("--mock", mock, "Use the offline mock teacher")->excludes(live_flag);
    dataset->add_option("--parallelism", parallelism, "Requests in flight");
    dataset->add_option("--out", dataset_out, "JSONL output (stdout if omitted)");

    // eval
    auto* eval = app.add_subcommand("eval", "Classification metrics for labeled graphs");
    std::string eval_data;
    std::vector<std::string> eval_graphs;
    eval->add_option("--model", model_path, "Model JSON")->required();
    eval->add_option("--data", eval_data, "Manifest of masks or graph JSON files");
    eval->add_option("--graph", eval_graphs, "Graph JSON file(s)");
    eval->add_flag("--json", as_json);

    // run
    auto* run = app.add_subcommand("run", "Full pipeline over a manifest");
    std::string run_data, run_out, run_config;
    bool run_live = false;
    run->add_option("--data", run_data, "Manifest JSON")->required();
    run->add_option("--out", run_out, "Run directory")->required();
    run->add_option("--config", run_config, "Run config JSON");
    run->add_option("--model", model_path, "Use this model instead of training");
    run->add_flag("--live", run_live, "Use the live teacher endpoint instead of the mock");
    run->add_flag("--json", as_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            const BinaryMask mask = load_mask(ingest_mask, threshold);
            if (!ingest_out.empty()) write_pgm(ingest_out, to_gray(mask));
            const MaskStats s = mask_stats(mask);
            Json j;
            j["source_id"] = mask.source_id;
            j["dims"] = {mask.height, mask.width};
            j["vessel_pixels"] = s.vessel_count;
            j["vessel_fraction"] = s.vessel_fraction;
            j["quadrant_pixels"] = s.quadrant_count;
            j["quadrant_fraction"] = s.quadrant_fraction;
            emit(j, as_json);
        } else if (*synth) {
            synth_cfg.height = synth_cfg.width = synth_size;
            const Manifest m = generate_dataset(synth_cfg, synth_out);
            std::cout << "wrote " << m.entries.size() << " masks to " << synth_out << "\n";
        } else if (*graph) {
            BinaryMask mask = load_mask(graph_mask, threshold);
            std::optional<int> label;
            if (!graph_label.empty()) label = parse_class(graph_label);
            write_or_print(graph_out, encode_graph(graph_from_mask(mask, graph_opts, label)));
        } else if (*train_cmd) {
            ModelConfig cfg = model_cfg;
            if (!train_config.empty()) {
                cfg = config_from_json(parse_json(read_file(train_config)));
                // Flags given on the command line win over the file.
                if (train_cmd->count("--epochs")) cfg.epochs = model_cfg.epochs;
                if (train_cmd->count("--seed")) cfg.seed = model_cfg.seed;
                if (train_cmd->count("--lr")) cfg.learning_rate = model_cfg.learning_rate;
            }
            const auto graphs = collect_graphs(train_data, train_graphs, threshold);
            const TrainResult result = train(graphs, cfg);
            write_file(train_out, encode_model(result.params));
            Json j;
            j["graphs"] = graphs.size();
            j["epochs"] = result.history.size();
            if (!result.history.empty()) {
                j["final_loss"] = result.history.back().mean_loss;
                j["final_train_balanced_accuracy"] = result.history.back().train_balanced_accuracy;
            }
            emit(j, as_json);
        } else if (*predict_cmd) {
            const ModelParams params = decode_model(read_file(model_path));
            const HeteroGraph g = load_graph(graph_path);
            write_or_print(predict_out, dump_canonical(prediction_to_json(g.source_id, predict(params, g))));
        } else if (*attr) {
            const ModelParams params = decode_model(read_file(model_path));
            const HeteroGraph g = load_graph(graph_path);
            const AttributionReport report = attribute(params, g, target, steps);
            write_or_print(attr_out, encode_report(report));
            if (!heatmap_out.empty()) {
                const BinaryMask mask = heatmap_mask.empty() ? BinaryMask(g.height, g.width, g.source_id)
                                                             : load_mask(heatmap_mask, threshold);
                write_pgm(heatmap_out, export_heatmap(report, g, mask));
            }
        } else if (*table_cmd) {
            const HeteroGraph g = load_graph(graph_path);
            const AttributionReport report = decode_report(read_file(report_path));
            const Prediction pred = prediction_from_json(parse_json(read_file(pred_path)));
            write_or_print(table_out, encode_table(build_table(g, report, pred, top_k)));
        } else if (*index_cmd) {
            const Manifest m = load_manifest(index_data);
            const auto graphs = graphs_from_manifest(index_data, threshold, {});
            std::vector<CaseEntry> entries;
            for (std::size_t i = 0; i < graphs.size(); ++i) {
                const fs::path p = resolve_entry(index_data, m.entries[i]);
                const bool is_graph = p.extension() == ".json";
                entries.push_back({distribution_vector(graphs[i]), is_graph ? std::string() : p.string(),
                                   is_graph ? p.string() : std::string(), std::string()});
            }
            write_file(index_out, encode_index(build_index(std::move(entries))));
        } else if (*retrieve) {
            const CaseIndex index = decode_index(read_file(index_path));
            const HeteroGraph g = load_graph(graph_path);
            Json out = Json::array();
            for (const Match& match : query_top_k(index, distribution_vector(g), k, normalized)) {
                const CaseEntry& e = index.entries[match.entry];
                out.push_back({{"source_id", match.source_id},
                               {"distance", match.distance},
                               {"label", e.vector.label ? Json(*e.vector.label) : Json(nullptr)},
                               {"image", e.image}});
            }
            emit(out, as_json);
        } else if (*prompts_cmd) {
            const KnowledgeTable t = decode_table(read_file(table_path));
            std::vector<RetrievedCase> context;
            if (!index_path.empty()) {
                const CaseIndex index = decode_index(read_file(index_path));
                const auto matches = query_top_k(index, table_vector(t), static_cast<int>(kContextCases));
                if (matches.size() != kContextCases) {
                    throw Error(ErrorCode::EmptyIndex, "index holds fewer than 3 cases besides the query");
                }
                for (const Match& m : matches) {
                    const CaseEntry& e = index.entries[m.entry];
                    context.push_back({e.vector.source_id, e.vector.label, m.distance, e.vector.values, e.image});
                }
            }
            PromptSet set{t.source_id, image_path, {}};
            if (stage == 1) {
                set.requests.push_back(render_stage1(t, context, teacher_model));
            } else {
                Stage2Options options;
                options.model_name = teacher_model;
                set.requests = render_stage2(t, n, seed, context, options);
            }
            write_or_print(prompts_out, encode_prompts({set}));
        } else if (*dataset) {
            if (!live && !mock) throw Error(ErrorCode::InvalidArgument, "choose --live or --mock");
            const auto sets = decode_prompts(read_file(prompts_path));
            MockTeacher mock_teacher;
            TeacherConfig cfg = TeacherConfig::from_env();
            HttpTeacher http(cfg);
            Teacher& teacher = live ? static_cast<Teacher&>(http) : mock_teacher;
            std::vector<InstructionSample> samples;
            for (const PromptSet& set : sets) {
                const auto replies = generate_pairs(teacher, set.requests, parallelism);
                for (int st : {1, 2}) {
                    std::vector<QaPair> pairs;
                    for (std::size_t r = 0; r < replies.size(); ++r) {
                        if (set.requests[r].stage == st) pairs.insert(pairs.end(), replies[r].begin(), replies[r].end());
                    }
                    if (pairs.empty()) continue;
                    auto s = assemble_samples(set.source_id, set.image, st, pairs);
                    samples.insert(samples.end(), s.begin(), s.end());
                }
            }
            if (samples.empty()) throw Error(ErrorCode::EmptyPairs, "prompts file produced no Q&A pairs");
            write_or_print(dataset_out, encode_jsonl(samples));
        } else if (*eval) {
            const ModelParams params = decode_model(read_file(model_path));
            const auto graphs = collect_graphs(eval_data, eval_graphs, threshold);
            std::vector<std::pair<int, int>> pairs;
            for (const HeteroGraph& g : graphs) {
                if (!g.label) throw Error(ErrorCode::MissingGroundTruth, "graph '" + g.source_id + "' has no label");
                pairs.emplace_back(*g.label, predict(params, g).predicted_class);
            }
            emit(evaluation_metrics(pairs), as_json);
        } else if (*run) {
            RunConfig cfg = run_config.empty() ? RunConfig{} : RunConfig::from_json(parse_json(read_file(run_config)));
            if (!model_path.empty()) cfg.model_path = model_path;
            if (run_live) {
                cfg.mock_teacher = false;
                cfg.teacher = TeacherConfig::from_env(cfg.teacher);
            }
            const RunSummary summary = run_pipeline(run_data, cfg, run_out);
            emit(summary.metrics, as_json);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
