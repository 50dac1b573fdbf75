#include "octagraph/teacher_client.hpp"

#include "octagraph/error.hpp"
#include "octagraph/parallel.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace octagraph {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix + /chat/completions
};

Endpoint split_url(const std::string& base_url) {
    const auto scheme = base_url.find("://");
    if (base_url.empty() || scheme == std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "teacher base URL must look like http(s)://host[:port][/prefix], got '" +
                                                  base_url + "'");
    }
    const auto slash = base_url.find('/', scheme + 3);
    Endpoint e;
    e.origin = base_url.substr(0, slash);
    std::string prefix = slash == std::string::npos ? std::string() : base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    e.path = prefix + "/chat/completions";
    return e;
}

bool retryable_status(int status) { return status >= 500 || status == 429; }

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

TeacherConfig TeacherConfig::from_env(TeacherConfig c) {
    c.base_url = env_or("TEACHER_BASE_URL", c.base_url);
    c.api_key = env_or("TEACHER_API_KEY", c.api_key);
    c.model = env_or("TEACHER_MODEL", c.model);
    return c;
}

TeacherConfig TeacherConfig::from_env() { return from_env(TeacherConfig{}); }

void sleep_for(std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); }

std::string chat_request_body(const TeacherConfig& config, const TeacherRequest& request) {
    Json j;
    j["model"] = request.model_name.empty() ? config.model : request.model_name;
    j["messages"] = Json::array({{{"role", "system"}, {"content", request.system_text}},
                                 {{"role", "user"}, {"content", request.user_text}}});
    j["temperature"] = request.temperature;
    return j.dump();
}

std::string chat_reply_content(std::string_view body) {
    const Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedResponse, "reply is not JSON");
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw Error(ErrorCode::MalformedResponse, "reply has no choices[0]");
    }
    const Json& choice = j["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
        !choice["message"].contains("content") || !choice["message"]["content"].is_string()) {
        throw Error(ErrorCode::MalformedResponse, "reply has no choices[0].message.content");
    }
    return choice["message"]["content"].get<std::string>();
}

HttpTeacher::HttpTeacher(TeacherConfig config, Sleeper sleeper) : config_(std::move(config)), sleeper_(std::move(sleeper)) {}

std::string HttpTeacher::complete(const TeacherRequest& request) {
    const Endpoint endpoint = split_url(config_.base_url);
    httplib::Client client(endpoint.origin);
    if (!client.is_valid()) throw Error(ErrorCode::InvalidConfig, "unsupported teacher URL '" + config_.base_url + "'");
    const auto whole = static_cast<time_t>(config_.timeout_seconds);
    const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, micros);
    client.set_read_timeout(whole, micros);
    client.set_write_timeout(whole, micros);
    if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);
    const std::string body = chat_request_body(config_, request);

    std::string last_error;
    auto delay = config_.initial_backoff;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(delay);
            delay *= 2;
        }
        const httplib::Result res = client.Post(endpoint.path, body, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw Error(ErrorCode::AuthError, "teacher rejected credentials (HTTP " + std::to_string(res->status) + ")");
        }
        if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw Error(ErrorCode::TransportError, "teacher returned HTTP " + std::to_string(res->status));
        }
        return chat_reply_content(res->body);
    }
    throw Error(ErrorCode::TransportError,
                "teacher unreachable after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::string MockTeacher::complete(const TeacherRequest& request) {
    const auto question = extract_between(request.user_text, kQuestionBegin, kQuestionEnd);
    const auto table_text = extract_between(request.user_text, kTableBegin, kTableEnd);
    if (!question || !table_text) throw Error(ErrorCode::MalformedResponse, "mock teacher: prompt lacks table or question");
    const KnowledgeTable t = decode_table(*table_text);
    const int cls = t.ground_truth.value_or(t.predicted_class);

    std::string answer = "The image is consistent with " + std::string(class_name(cls)) + ".";
    answer += " Node density by quadrant (top-left, top-right, bottom-left, bottom-right) is " +
              fixed(t.node_density[0]) + ", " + fixed(t.node_density[1]) + ", " + fixed(t.node_density[2]) + ", " +
              fixed(t.node_density[3]) + ".";
    if (!t.nodes.empty()) {
        const NodeRecord& n = t.nodes.front();
        answer += " The most influential element is " + std::string(to_string(n.kind)) + " " + std::to_string(n.id) +
                  " in the " + std::string(quadrant_name(n.quadrant)) + " quadrant";
        if (!n.features.empty()) answer += ", driven by " + n.features.front().name + " = " + fixed(n.features.front().value);
        answer += ".";
    }
    if (const auto focus = extract_between(request.user_text, "Focus: ", "\n")) {
        answer += " Relevant detail: " + std::string(*focus) + ".";
    }
    std::string q(*question);
    while (!q.empty() && (q.front() == '\n')) q.erase(q.begin());
    while (!q.empty() && (q.back() == '\n')) q.pop_back();
    return encode_qa_pairs({{q, answer}});
}

std::string call_teacher(const TeacherConfig& config, const TeacherRequest& request, const Sleeper& sleeper) {
    HttpTeacher teacher(config, sleeper);
    return teacher.complete(request);
}

std::vector<std::vector<QaPair>> generate_pairs(Teacher& teacher, std::span<const TeacherRequest> requests,
                                                int parallelism) {
    std::vector<std::vector<QaPair>> results(requests.size());
    parallel_for(requests.size(), parallelism,
                 [&](std::size_t i) { results[i] = parse_qa_pairs(teacher.complete(requests[i])); });
    return results;
}

}  // namespace octagraph
