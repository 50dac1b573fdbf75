#include "octagraph/instruct.hpp"

#include "octagraph/error.hpp"

#include <cstdio>
#include <random>

namespace octagraph {

namespace {

constexpr std::string_view kSystemText =
    "You are an ophthalmology teacher preparing instruction-tuning data for a vision-language model that reads "
    "OCTA images of the deep vascular complex. Ground every statement in the structured graph knowledge table you "
    "are given: quadrant densities, the most important vessel segments and intercapillary areas with their "
    "features, and the most important connections. Refer to locations by quadrant (top-left, top-right, "
    "bottom-left, bottom-right). Reply with a JSON array of objects with exactly two string fields, \"question\" "
    "and \"answer\", and nothing else.";

constexpr std::string_view kStage1Question =
    "What is the diabetic retinopathy stage of this OCTA image, and which vascular features support it?";

std::string fixed(double v, int decimals = kTableDecimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string probability_triple(const std::array<double, kNumClasses>& p) {
    return "(" + fixed(p[0]) + ", " + fixed(p[1]) + ", " + fixed(p[2]) + ")";
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string guidance_header(const KnowledgeTable& t) {
    std::string s;
    s += "Ground truth label: ";
    s += t.ground_truth ? std::string(class_name(*t.ground_truth)) : std::string("unavailable");
    s += "\nGNN class probabilities (Healthy, NPDR, PDR): " + probability_triple(t.probabilities);
    s += "\nGNN predicted class: " + std::string(class_name(t.predicted_class)) + "\n";
    return s;
}

std::string table_block(const KnowledgeTable& t) {
    return std::string(kTableBegin) + "\n" + encode_table(t) + std::string(kTableEnd) + "\n";
}

std::string context_blocks(const std::vector<RetrievedCase>& context) {
    if (context.empty()) return {};
    if (context.size() != kContextCases) {
        throw Error(ErrorCode::InvalidArgument,
                    "retrieval context must hold exactly 3 cases, got " + std::to_string(context.size()));
    }
    std::string s = "Similar training cases (by quadrant node/edge distribution):\n";
    for (std::size_t i = 0; i < context.size(); ++i) {
        const RetrievedCase& c = context[i];
        s += std::string(kCaseBegin) + std::to_string(i + 1) + ">>>\n";
        s += "source_id: " + c.source_id + "\n";
        s += "label: " + (c.label ? std::string(class_name(*c.label)) : std::string("unknown")) + "\n";
        s += "image: " + c.image + "\n";
        s += "distance: " + fixed(c.distance) + "\n";
        s += "distribution (nodes q0-q3, edges q0-q3):";
        for (double v : c.vector) s += " " + fixed(v, 0);
        s += "\n" + std::string(kCaseEnd) + "\n";
    }
    return s;
}

std::string question_block(const std::string& question) {
    return std::string(kQuestionBegin) + "\n" + question + "\n" + std::string(kQuestionEnd) + "\n";
}

struct Instantiated {
    std::string question;
    std::string focus;
};

std::string location_phrase(double row, double col, int quadrant) {
    return "around row " + fixed(row, 0) + ", column " + fixed(col, 0) + " in the " +
           std::string(quadrant_name(quadrant)) + " quadrant";
}

Instantiated quadrant_query(const KnowledgeTable& t, int q, std::mt19937_64& rng) {
    static constexpr std::array<std::string_view, 3> forms = {
        "Are there vascular abnormalities in the {q} quadrant of this OCTA image?",
        "How does the capillary network in the {q} quadrant compare with the rest of the image?",
        "Describe the vessel density and any capillary dropout in the {q} quadrant.",
    };
    std::string question(forms[draw(rng, forms.size())]);
    question.replace(question.find("{q}"), 3, quadrant_name(q));
    std::string focus = std::string(quadrant_name(q)) + " quadrant: node density " + fixed(t.node_density[q]) +
                        ", edge density " + fixed(t.edge_density[q]);
    int listed = 0;
    for (const NodeRecord& n : t.nodes) {
        if (n.quadrant != q) continue;
        focus += listed++ == 0 ? "; important nodes in this quadrant: " : ", ";
        focus += std::string(to_string(n.kind)) + " " + std::to_string(n.id);
    }
    return {question, focus};
}

Instantiated node_query(const KnowledgeTable& t, std::mt19937_64& rng) {
    const NodeRecord& n = t.nodes[draw(rng, t.nodes.size())];
    const std::string where = location_phrase(n.centroid_row, n.centroid_col, n.quadrant);
    std::string question;
    if (n.kind == NodeKind::Vessel) {
        static constexpr std::array<std::string_view, 2> forms = {
            "Is there anything distinctive about the vessel segment ",
            "What do the vessels ",
        };
        const std::size_t f = draw(rng, forms.size());
        question = std::string(forms[f]) + where + (f == 0 ? "?" : " reveal about retinal health?");
    } else if (n.kind == NodeKind::FAZ) {
        question = "What does the avascular region " + where + " indicate?";
    } else {
        question = "What does the intercapillary area " + where + " suggest about perfusion?";
    }
    std::string focus = std::string(to_string(n.kind)) + " " + std::to_string(n.id) + " (importance " +
                        fixed(n.importance) + "); top features:";
    for (const FeatureRecord& f : n.features) focus += " " + f.name + "=" + fixed(f.value) + " (IG " + fixed(f.ig) + ")";
    return {question, focus};
}

Instantiated faz_query(const KnowledgeTable& t, std::mt19937_64& rng) {
    static constexpr std::array<std::string_view, 3> forms = {
        "Is the foveal avascular zone enlarged or irregular in this image?",
        "Describe the size and shape of the foveal avascular zone.",
        "How does the foveal avascular zone relate to the surrounding capillaries?",
    };
    const FazRecord& f = *t.faz;
    return {std::string(forms[draw(rng, forms.size())]),
            "FAZ: area " + fixed(f.area) + ", perimeter " + fixed(f.perimeter) + ", eccentricity " +
                fixed(f.eccentricity) + ", " + std::string(quadrant_name(f.quadrant)) + " quadrant"};
}

Instantiated edge_query(const KnowledgeTable& t, std::mt19937_64& rng) {
    const EdgeRecord& e = t.edges[draw(rng, t.edges.size())];
    const std::string q(quadrant_name(e.quadrant));
    std::string question = e.relation == Relation::Touches
                               ? "How well connected are the vessel branches in the " + q + " quadrant?"
                               : "Do the vessels bordering the intercapillary areas in the " + q +
                                     " quadrant look preserved?";
    std::string focus = "edge " + std::to_string(e.id) + " (" + std::string(to_string(e.relation)) + ", nodes " +
                        std::to_string(e.src) + "-" + std::to_string(e.dst) + ", importance " + fixed(e.importance) +
                        ", gate IG " + fixed(e.ig) + ", centroid distance " + fixed(e.centroid_distance) + ")";
    return {question, focus};
}

Stage2Category draw_category(const std::array<double, kStage2Categories>& w, std::mt19937_64& rng) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = unit_draw(rng) * total;
    for (int c = 0; c < kStage2Categories; ++c) {
        if (u < w[c]) return static_cast<Stage2Category>(c);
        u -= w[c];
    }
    for (int c = kStage2Categories - 1; c >= 0; --c) {
        if (w[c] > 0) return static_cast<Stage2Category>(c);
    }
    return Stage2Category::Quadrant;
}

void check_role_order(const InstructionSample& s) {
    if (s.stage != 1 && s.stage != 2) throw_schema("stage must be 1 or 2");
    if (s.conversations.empty()) throw_schema("sample '" + s.id + "' has no turns");
    for (std::size_t i = 0; i < s.conversations.size(); ++i) {
        const char* expected = i % 2 == 0 ? "user" : "assistant";
        if (s.conversations[i].role != expected) throw_schema("sample '" + s.id + "' roles must alternate user/assistant");
    }
}

Json request_to_json(const TeacherRequest& r) {
    Json j;
    j["stage"] = r.stage;
    j["category"] = r.category;
    j["model"] = r.model_name;
    j["temperature"] = r.temperature;
    j["system"] = r.system_text;
    j["user"] = r.user_text;
    j["question"] = r.question;
    return j;
}

TeacherRequest request_from_json(const Json& j) {
    TeacherRequest r;
    r.stage = read_as<int>(j, "stage");
    if (r.stage != 1 && r.stage != 2) throw_schema("stage must be 1 or 2");
    r.category = read_as<std::string>(j, "category");
    r.model_name = read_as<std::string>(j, "model");
    r.temperature = read_as<double>(j, "temperature");
    r.system_text = read_as<std::string>(j, "system");
    r.user_text = read_as<std::string>(j, "user");
    r.question = read_as<std::string>(j, "question");
    if (r.user_text.empty()) throw_schema("user text must be non-empty");
    return r;
}

}  // namespace

std::string_view to_string(Stage2Category c) {
    switch (c) {
        case Stage2Category::Quadrant: return "quadrant";
        case Stage2Category::TopNode: return "top_node";
        case Stage2Category::Faz: return "faz";
        case Stage2Category::Edge: return "edge";
    }
    return "quadrant";
}

std::string_view quadrant_name(int q) {
    static constexpr std::array<std::string_view, 4> names = {"top-left", "top-right", "bottom-left", "bottom-right"};
    if (q < 0 || q > 3) throw Error(ErrorCode::OutOfRange, "quadrant " + std::to_string(q));
    return names[q];
}

std::optional<std::string_view> extract_between(std::string_view text, std::string_view begin, std::string_view end) {
    const auto b = text.find(begin);
    if (b == std::string_view::npos) return std::nullopt;
    const auto start = b + begin.size();
    const auto e = text.find(end, start);
    if (e == std::string_view::npos) return std::nullopt;
    return text.substr(start, e - start);
}

TeacherRequest render_stage1(const KnowledgeTable& table, const std::vector<RetrievedCase>& context,
                             const std::string& model_name, double temperature) {
    if (!table.ground_truth) {
        throw Error(ErrorCode::MissingGroundTruth, "table '" + table.source_id + "' has no ground truth label");
    }
    TeacherRequest r;
    r.stage = 1;
    r.category = "diagnosis";
    r.system_text = std::string(kSystemText);
    r.question = std::string(kStage1Question);
    r.model_name = model_name;
    r.temperature = temperature;
    r.user_text = "Stage 1: overall diagnosis.\n" + guidance_header(table) + table_block(table) +
                  context_blocks(context) + question_block(r.question) +
                  "Write exactly one question-answer pair. Keep the question as given. The answer must state the "
                  "ground-truth stage and explain it with the most important nodes and features in the table, "
                  "naming the quadrants where they lie.\n";
    return r;
}

std::vector<TeacherRequest> render_stage2(const KnowledgeTable& table, int n, std::uint64_t seed,
                                          const std::vector<RetrievedCase>& context, const Stage2Options& options) {
    if (n < 0) throw Error(ErrorCode::InvalidArgument, "n must be >= 0");
    for (double w : options.weights) {
        if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "stage-2 category weights must be >= 0");
    }
    std::mt19937_64 rng(seed ^ fnv1a(table.source_id));
    const std::string context_text = context_blocks(context);

    struct Slot {
        Stage2Category category;
        int quadrant;  // -1: drawn at instantiation
    };
    std::vector<Slot> slots;
    if (n >= 8) {
        for (int q = 0; q < 4; ++q) slots.push_back({Stage2Category::Quadrant, q});
    }
    while (static_cast<int>(slots.size()) < n) slots.push_back({draw_category(options.weights, rng), -1});
    for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[draw(rng, i)]);

    std::vector<TeacherRequest> out;
    out.reserve(slots.size());
    for (Slot slot : slots) {
        // Categories without material in this table fall back to a quadrant query.
        if ((slot.category == Stage2Category::TopNode && table.nodes.empty()) ||
            (slot.category == Stage2Category::Faz && !table.faz) ||
            (slot.category == Stage2Category::Edge && table.edges.empty())) {
            slot.category = Stage2Category::Quadrant;
        }
        Instantiated inst;
        switch (slot.category) {
            case Stage2Category::Quadrant:
                inst = quadrant_query(table, slot.quadrant >= 0 ? slot.quadrant : static_cast<int>(draw(rng, 4)), rng);
                break;
            case Stage2Category::TopNode: inst = node_query(table, rng); break;
            case Stage2Category::Faz: inst = faz_query(table, rng); break;
            case Stage2Category::Edge: inst = edge_query(table, rng); break;
        }
        TeacherRequest r;
        r.stage = 2;
        r.category = std::string(to_string(slot.category));
        r.system_text = std::string(kSystemText);
        r.question = inst.question;
        r.model_name = options.model_name;
        r.temperature = options.temperature;
        r.user_text = "Stage 2: location-specific question (" + r.category + ").\n" + guidance_header(table) +
                      "Focus: " + inst.focus + "\n" + table_block(table) + context_text + question_block(r.question) +
                      "Write exactly one question-answer pair. Keep the question as given. Answer from the image's "
                      "perspective, citing the quadrant and the graph features that support the answer.\n";
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<QaPair> parse_qa_pairs(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("teacher reply is not JSON: ") + e.what());
    }
    if (!j.is_array() || j.empty()) throw Error(ErrorCode::MalformedResponse, "teacher reply must be a non-empty JSON array");
    std::vector<QaPair> pairs;
    for (const Json& item : j) {
        if (!item.is_object() || item.size() != 2 || !item.contains("question") || !item.contains("answer") ||
            !item["question"].is_string() || !item["answer"].is_string()) {
            throw Error(ErrorCode::MalformedResponse, "each item must be {\"question\": string, \"answer\": string}");
        }
        QaPair p{item["question"].get<std::string>(), item["answer"].get<std::string>()};
        if (p.question.empty() || p.answer.empty()) throw Error(ErrorCode::MalformedResponse, "empty question or answer");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::string encode_qa_pairs(const std::vector<QaPair>& pairs) {
    Json j = Json::array();
    for (const QaPair& p : pairs) j.push_back({{"question", p.question}, {"answer", p.answer}});
    return dump_canonical(j);
}

std::vector<InstructionSample> assemble_samples(const std::string& source_id, const std::string& image, int stage,
                                                const std::vector<QaPair>& pairs) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyPairs, "no Q&A pairs for '" + source_id + "'");
    if (stage != 1 && stage != 2) throw Error(ErrorCode::InvalidArgument, "stage must be 1 or 2");
    std::vector<InstructionSample> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        char ordinal[16];
        std::snprintf(ordinal, sizeof ordinal, "%03zu", i + 1);
        InstructionSample s;
        s.id = source_id + "-s" + std::to_string(stage) + "-" + ordinal;
        s.image = image;
        s.stage = stage;
        s.conversations = {{"user", std::string(kImageToken) + pairs[i].question}, {"assistant", pairs[i].answer}};
        out.push_back(std::move(s));
    }
    return out;
}

void validate_sample(const InstructionSample& sample) { check_role_order(sample); }

Json sample_to_json(const InstructionSample& s) {
    Json j;
    j["id"] = s.id;
    j["image"] = s.image;
    j["stage"] = s.stage;
    Json turns = Json::array();
    for (const Turn& t : s.conversations) turns.push_back({{"role", t.role}, {"content", t.content}});
    j["conversations"] = std::move(turns);
    return j;
}

InstructionSample sample_from_json(const Json& j) {
    InstructionSample s;
    s.id = read_as<std::string>(j, "id");
    s.image = read_as<std::string>(j, "image");
    s.stage = read_as<int>(j, "stage");
    const Json& turns = require(j, "conversations");
    if (!turns.is_array()) throw_schema("conversations must be an array");
    for (const Json& t : turns) s.conversations.push_back({read_as<std::string>(t, "role"), read_as<std::string>(t, "content")});
    check_role_order(s);
    return s;
}

std::string encode_jsonl(const std::vector<InstructionSample>& samples) {
    std::string out;
    for (const InstructionSample& s : samples) {
        check_role_order(s);
        out += dump_canonical(sample_to_json(s));
    }
    return out;
}

std::vector<InstructionSample> decode_jsonl(std::string_view text) {
    std::vector<InstructionSample> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) throw_schema("JSONL must end with a newline");
        const std::string_view line = text.substr(pos, nl - pos);
        if (line.empty()) throw_schema("empty JSONL line");
        out.push_back(sample_from_json(parse_json(line)));
        pos = nl + 1;
    }
    return out;
}

Json prompts_to_json(const std::vector<PromptSet>& sets) {
    Json j;
    j["version"] = kFormatVersion;
    Json arr = Json::array();
    for (const PromptSet& s : sets) {
        Json e;
        e["source_id"] = s.source_id;
        e["image"] = s.image;
        Json reqs = Json::array();
        for (const TeacherRequest& r : s.requests) reqs.push_back(request_to_json(r));
        e["requests"] = std::move(reqs);
        arr.push_back(std::move(e));
    }
    j["prompt_sets"] = std::move(arr);
    return j;
}

std::vector<PromptSet> prompts_from_json(const Json& j) {
    require_version(j);
    const Json& arr = require(j, "prompt_sets");
    if (!arr.is_array()) throw_schema("prompt_sets must be an array");
    std::vector<PromptSet> out;
    for (const Json& e : arr) {
        PromptSet s;
        s.source_id = read_as<std::string>(e, "source_id");
        s.image = read_as<std::string>(e, "image");
        const Json& reqs = require(e, "requests");
        if (!reqs.is_array()) throw_schema("requests must be an array");
        for (const Json& r : reqs) s.requests.push_back(request_from_json(r));
        out.push_back(std::move(s));
    }
    return out;
}

std::string encode_prompts(const std::vector<PromptSet>& sets) { return dump_canonical(prompts_to_json(sets)); }

std::vector<PromptSet> decode_prompts(std::string_view bytes) { return prompts_from_json(parse_json(bytes)); }

}  // namespace octagraph
