#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/knowledge_table.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace octagraph {

inline constexpr int kStage2PerImage = 30;
inline constexpr double kDefaultTemperature = 0.2;

// Delimiters the teacher (and the mock teacher) use to find embedded content.
inline constexpr std::string_view kTableBegin = "<<<TABLE>>>";
inline constexpr std::string_view kTableEnd = "<<<END TABLE>>>";
inline constexpr std::string_view kCaseBegin = "<<<CASE ";
inline constexpr std::string_view kCaseEnd = "<<<END CASE>>>";
inline constexpr std::string_view kQuestionBegin = "<<<QUESTION>>>";
inline constexpr std::string_view kQuestionEnd = "<<<END QUESTION>>>";
inline constexpr std::string_view kImageToken = "<image>\n";

enum class Stage2Category : int { Quadrant = 0, TopNode = 1, Faz = 2, Edge = 3 };
inline constexpr int kStage2Categories = 4;
std::string_view to_string(Stage2Category category);

std::string_view quadrant_name(int quadrant);

struct TeacherRequest {
    int stage = 1;
    std::string category;  // "diagnosis" for stage 1
    std::string system_text;
    std::string user_text;
    std::string question;  // student-facing question the teacher must answer
    double temperature = kDefaultTemperature;
    std::string model_name;

    friend bool operator==(const TeacherRequest&, const TeacherRequest&) = default;
};

/// A similar training case rendered into long-context prompts.
struct RetrievedCase {
    std::string source_id;
    std::optional<int> label;
    double distance = 0.0;
    std::array<double, 8> vector{};
    std::string image;

    friend bool operator==(const RetrievedCase&, const RetrievedCase&) = default;
};

inline constexpr std::size_t kContextCases = 3;

struct Stage2Options {
    std::array<double, kStage2Categories> weights{1.0, 1.0, 1.0, 1.0};
    std::string model_name;
    double temperature = kDefaultTemperature;
};

TeacherRequest render_stage1(const KnowledgeTable& table, const std::vector<RetrievedCase>& context = {},
                             const std::string& model_name = {}, double temperature = kDefaultTemperature);

/// n requests from the template pool; with n >= 8 all four quadrants get a query.
std::vector<TeacherRequest> render_stage2(const KnowledgeTable& table, int n, std::uint64_t seed,
                                          const std::vector<RetrievedCase>& context = {},
                                          const Stage2Options& options = {});

struct QaPair {
    std::string question;
    std::string answer;

    friend bool operator==(const QaPair&, const QaPair&) = default;
};

/// Accepts only a JSON array of {"question": string, "answer": string} objects.
std::vector<QaPair> parse_qa_pairs(std::string_view text);
std::string encode_qa_pairs(const std::vector<QaPair>& pairs);

struct Turn {
    std::string role;  // "user" or "assistant"
    std::string content;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct InstructionSample {
    std::string id;
    std::string image;
    int stage = 1;
    std::vector<Turn> conversations;

    friend bool operator==(const InstructionSample&, const InstructionSample&) = default;
};

/// One sample per pair, ids "<source_id>-s<stage>-<ordinal>" with ordinals from 1.
std::vector<InstructionSample> assemble_samples(const std::string& source_id, const std::string& image, int stage,
                                                const std::vector<QaPair>& pairs);

void validate_sample(const InstructionSample& sample);
Json sample_to_json(const InstructionSample& sample);
InstructionSample sample_from_json(const Json& json);
std::string encode_jsonl(const std::vector<InstructionSample>& samples);
std::vector<InstructionSample> decode_jsonl(std::string_view text);

/// Prompts for one image, as written by `prompts` and read by `dataset`.
struct PromptSet {
    std::string source_id;
    std::string image;
    std::vector<TeacherRequest> requests;

    friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

Json prompts_to_json(const std::vector<PromptSet>& sets);
std::vector<PromptSet> prompts_from_json(const Json& json);
std::string encode_prompts(const std::vector<PromptSet>& sets);
std::vector<PromptSet> decode_prompts(std::string_view bytes);

/// Text between the first `begin` marker and the following `end` marker.
std::optional<std::string_view> extract_between(std::string_view text, std::string_view begin, std::string_view end);

}  // namespace octagraph
