#include "octagraph/error.hpp"
#include "octagraph/teacher_client.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <mutex>
#include <thread>

using namespace octagraph;
using namespace std::chrono_literals;

namespace {

std::string reply_with(const std::string& content) {
    Json j;
    j["choices"] = Json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
    return j.dump();
}

// Local chat-completions endpoint; the handler decides each response.
class FakeServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit FakeServer(Handler handler) {
        server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            {
                std::lock_guard<std::mutex> lock(mu_);
                last_auth_ = req.get_header_value("Authorization");
                last_body_ = req.body;
            }
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    TeacherConfig config() const {
        TeacherConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.api_key = "secret";
        c.model = "teacher-model";
        c.timeout_seconds = 5;
        return c;
    }
    int hits() const { return hits_; }
    std::string last_auth() {
        std::lock_guard<std::mutex> lock(mu_);
        return last_auth_;
    }
    std::string last_body() {
        std::lock_guard<std::mutex> lock(mu_);
        return last_body_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    std::mutex mu_;
    std::string last_auth_, last_body_;
};

TeacherRequest simple_request() {
    TeacherRequest r;
    r.system_text = "sys";
    r.user_text = "user";
    r.temperature = 0.2;
    return r;
}

struct RecordingSleeper {
    std::vector<std::chrono::milliseconds> delays;
    Sleeper fn() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

void expect_code(ErrorCode code, const std::function<void()>& fn) {
    try {
        fn();
        ADD_FAILURE() << "no throw";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

}  // namespace

TEST(HttpTeacher, SendsChatRequest) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(reply_with("hello"), "application/json");
    });
    RecordingSleeper sleeper;
    EXPECT_EQ(call_teacher(server.config(), simple_request(), sleeper.fn()), "hello");
    EXPECT_EQ(server.last_auth(), "Bearer secret");
    const Json body = Json::parse(server.last_body());
    EXPECT_EQ(body["model"], "teacher-model");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "user");
    EXPECT_EQ(body["temperature"], 0.2);
    EXPECT_TRUE(sleeper.delays.empty());
}

TEST(HttpTeacher, RetriesServerErrorsWithBackoff) {
    std::atomic<int> calls{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (calls++ < 3) {
            res.status = 500;
            return;
        }
        res.set_content(reply_with("late"), "application/json");
    });
    RecordingSleeper sleeper;
    EXPECT_EQ(call_teacher(server.config(), simple_request(), sleeper.fn()), "late");
    EXPECT_EQ(server.hits(), 4);
    EXPECT_EQ(sleeper.delays, (std::vector<std::chrono::milliseconds>{1000ms, 2000ms, 4000ms}));
}

TEST(HttpTeacher, GivesUpAfterMaxRetries) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    RecordingSleeper sleeper;
    expect_code(ErrorCode::TransportError, [&] { call_teacher(server.config(), simple_request(), sleeper.fn()); });
    EXPECT_EQ(server.hits(), 4);
    EXPECT_EQ(sleeper.delays.size(), 3u);
}

TEST(HttpTeacher, RateLimitIsRetried) {
    std::atomic<int> calls{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 429;
            return;
        }
        res.set_content(reply_with("ok"), "application/json");
    });
    RecordingSleeper sleeper;
    EXPECT_EQ(call_teacher(server.config(), simple_request(), sleeper.fn()), "ok");
    EXPECT_EQ(sleeper.delays.size(), 1u);
}

TEST(HttpTeacher, AuthFailureIsImmediate) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    RecordingSleeper sleeper;
    expect_code(ErrorCode::AuthError, [&] { call_teacher(server.config(), simple_request(), sleeper.fn()); });
    EXPECT_EQ(server.hits(), 1);
    EXPECT_TRUE(sleeper.delays.empty());
}

TEST(HttpTeacher, MalformedReply) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    RecordingSleeper sleeper;
    expect_code(ErrorCode::MalformedResponse, [&] { call_teacher(server.config(), simple_request(), sleeper.fn()); });
}

TEST(HttpTeacher, ConnectionRefusedIsTransportError) {
    TeacherConfig c;
    {
        FakeServer server([](const httplib::Request&, httplib::Response&) {});
        c = server.config();
    }
    c.max_retries = 1;
    RecordingSleeper sleeper;
    expect_code(ErrorCode::TransportError, [&] { call_teacher(c, simple_request(), sleeper.fn()); });
    EXPECT_EQ(sleeper.delays.size(), 1u);
}

TEST(HttpTeacher, BadUrl) {
    TeacherConfig c;
    c.base_url = "localhost:8080";
    expect_code(ErrorCode::InvalidConfig, [&] { call_teacher(c, simple_request(), [](auto) {}); });
}

TEST(ChatReply, Content) {
    EXPECT_EQ(chat_reply_content(reply_with("x")), "x");
    for (const char* bad : {"", "[]", R"({"choices":[]})", R"({"choices":[{"message":{}}]})",
                            R"({"choices":[{"message":{"content":7}}]})"}) {
        expect_code(ErrorCode::MalformedResponse, [&] { chat_reply_content(bad); });
    }
}

TEST(TeacherConfig, FromEnv) {
    ::setenv("TEACHER_BASE_URL", "http://h:1/v1", 1);
    ::setenv("TEACHER_MODEL", "m2", 1);
    ::unsetenv("TEACHER_API_KEY");
    TeacherConfig d;
    d.api_key = "keep";
    const TeacherConfig c = TeacherConfig::from_env(d);
    EXPECT_EQ(c.base_url, "http://h:1/v1");
    EXPECT_EQ(c.model, "m2");
    EXPECT_EQ(c.api_key, "keep");
    ::unsetenv("TEACHER_BASE_URL");
    ::unsetenv("TEACHER_MODEL");
}

TEST(MockTeacher, AnswersFromEmbeddedTable) {
    const KnowledgeTable t = octagraph::testing::random_table(3, 2);
    MockTeacher teacher;
    const TeacherRequest r = render_stage1(t);
    const auto pairs = parse_qa_pairs(teacher.complete(r));
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].question, r.question);
    EXPECT_NE(pairs[0].answer.find("PDR"), std::string::npos);
    EXPECT_EQ(teacher.complete(r), teacher.complete(r));
    TeacherRequest bare;
    bare.user_text = "no markers";
    EXPECT_THROW(teacher.complete(bare), Error);
}

TEST(GeneratePairs, PreservesRequestOrder) {
    const KnowledgeTable t = octagraph::testing::random_table(4, 0);
    const auto requests = render_stage2(t, 30, 5);
    MockTeacher teacher;
    const auto results = generate_pairs(teacher, requests, 4);
    ASSERT_EQ(results.size(), requests.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        ASSERT_EQ(results[i].size(), 1u);
        EXPECT_EQ(results[i][0].question, requests[i].question);
    }
    EXPECT_EQ(generate_pairs(teacher, requests, 1), results);
}

TEST(GeneratePairs, FirstFailureInRequestOrder) {
    class Flaky : public Teacher {
    public:
        std::string complete(const TeacherRequest& r) override {
            if (r.question == "bad1") throw Error(ErrorCode::AuthError, "first");
            if (r.question == "bad2") throw Error(ErrorCode::TransportError, "second");
            return encode_qa_pairs({{r.question, "a"}});
        }
    };
    std::vector<TeacherRequest> reqs(6);
    for (int i = 0; i < 6; ++i) reqs[i].question = "q" + std::to_string(i);
    reqs[2].question = "bad1";
    reqs[4].question = "bad2";
    Flaky flaky;
    expect_code(ErrorCode::AuthError, [&] { generate_pairs(flaky, reqs, 3); });
}

TEST(GeneratePairs, ConcurrentHttp) {
    FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body);
        const std::string q = body["messages"][1]["content"];
        res.set_content(reply_with(encode_qa_pairs({{q, "answer to " + q}})), "application/json");
    });
    std::vector<TeacherRequest> reqs(12, simple_request());
    for (int i = 0; i < 12; ++i) reqs[i].user_text = "u" + std::to_string(i);
    HttpTeacher teacher(server.config(), [](auto) {});
    const auto results = generate_pairs(teacher, reqs, 4);
    for (int i = 0; i < 12; ++i) EXPECT_EQ(results[i][0].answer, "answer to u" + std::to_string(i));
    EXPECT_EQ(server.hits(), 12);
}
