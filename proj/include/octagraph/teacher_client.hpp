#pragma once

#include "octagraph/instruct.hpp"

#include <chrono>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace octagraph {

struct TeacherConfig {
    std::string base_url;  // e.g. https://api.example.com/v1; "/chat/completions" is appended
    std::string api_key;
    std::string model = "o1";
    bool long_context = false;  // include retrieved cases in prompts
    double timeout_seconds = 60.0;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    int parallelism = 4;

    /// Overrides fields from TEACHER_BASE_URL, TEACHER_API_KEY and TEACHER_MODEL when set.
    static TeacherConfig from_env(TeacherConfig defaults);
    static TeacherConfig from_env();
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
void sleep_for(std::chrono::milliseconds delay);

class Teacher {
public:
    virtual ~Teacher() = default;
    /// Raw reply text for one request.
    virtual std::string complete(const TeacherRequest& request) = 0;
};

/// Chat-completions client. Retries 5xx, 429, timeouts and connection failures
/// with exponential backoff; 401/403 fail immediately with AuthError.
class HttpTeacher : public Teacher {
public:
    explicit HttpTeacher(TeacherConfig config, Sleeper sleeper = sleep_for);
    std::string complete(const TeacherRequest& request) override;

private:
    TeacherConfig config_;
    Sleeper sleeper_;
};

/// Offline teacher: answers each request's question from the table embedded
/// in the prompt, as a one-element Q&A array.
class MockTeacher : public Teacher {
public:
    std::string complete(const TeacherRequest& request) override;
};

std::string call_teacher(const TeacherConfig& config, const TeacherRequest& request, const Sleeper& sleeper = sleep_for);

/// Request body as sent on the wire.
std::string chat_request_body(const TeacherConfig& config, const TeacherRequest& request);
/// choices[0].message.content, or MalformedResponse.
std::string chat_reply_content(std::string_view body);

/// Calls the teacher for every request with at most `parallelism` in flight and
/// parses each reply. Results follow request order; the first failure (in
/// request order) is rethrown.
std::vector<std::vector<QaPair>> generate_pairs(Teacher& teacher, std::span<const TeacherRequest> requests,
                                                int parallelism);

}  // namespace octagraph
