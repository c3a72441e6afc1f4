#include "doctest.h"
#include "sites.hpp"

#include "webskill/induction.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

using namespace webskill;
using namespace webskill::testing;
using json = nlohmann::json;

namespace {

// Local stand-in for a chat-completions endpoint. Replies are served in order;
// a reply starting with "!" is sent as that HTTP status instead.
class StubServer {
public:
    explicit StubServer(std::deque<std::string> replies) : replies_(std::move(replies)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard<std::mutex> lock(mu_);
            ++requests_;
            auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            std::string reply = replies_.empty() ? "" : replies_.front();
            if (!replies_.empty()) replies_.pop_front();
            if (!reply.empty() && reply[0] == '!') {
                res.status = std::stoi(reply.substr(1));
                return;
            }
            if (reply == "garbage") {
                res.set_content("{\"nothing\": true}", "application/json");
                return;
            }
            json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}};
            res.set_content(body.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    ChatConfig config() const {
        ChatConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.timeout_seconds = 5;
        c.retries = 2;
        c.api_key_env = "WEBSKILL_TEST_KEY";
        return c;
    }
    int requests() {
        std::lock_guard<std::mutex> lock(mu_);
        return requests_;
    }
    std::string auth() {
        std::lock_guard<std::mutex> lock(mu_);
        return auth_;
    }
    std::string last_body() {
        std::lock_guard<std::mutex> lock(mu_);
        return last_body_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mu_;
    std::deque<std::string> replies_;
    int requests_ = 0;
    std::string auth_, last_body_;
};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

} // namespace

TEST_CASE("chat client sends the request and reads the first choice") {
    StubServer stub({"click(#a)"});
    setenv("WEBSKILL_TEST_KEY", "sk-local", 1);
    ChatClient client(stub.config());
    CHECK(client.complete({{"user", "hi"}}) == "click(#a)");
    CHECK(stub.auth() == "Bearer sk-local");
    auto body = json::parse(stub.last_body());
    CHECK(body["messages"][0]["content"] == "hi");
    CHECK(body["model"] == "default");
    unsetenv("WEBSKILL_TEST_KEY");
}

TEST_CASE("chat client omits the key header when the variable is unset") {
    StubServer stub({"ok"});
    unsetenv("WEBSKILL_TEST_KEY");
    ChatClient(stub.config()).complete({{"user", "hi"}});
    CHECK(stub.auth().empty());
}

TEST_CASE("chat client retries server errors and gives up on client errors") {
    {
        StubServer stub({"!500", "!503", "fine"});
        CHECK(ChatClient(stub.config()).complete({{"user", "x"}}) == "fine");
        CHECK(stub.requests() == 3);
    }
    {
        StubServer stub({"!500", "!500", "!500", "late"});
        CHECK(code_of([&] { ChatClient(stub.config()).complete({{"user", "x"}}); }) == ErrorCode::Transport);
        CHECK(stub.requests() == 3);
    }
    {
        StubServer stub({"!401", "never"});
        CHECK(code_of([&] { ChatClient(stub.config()).complete({{"user", "x"}}); }) == ErrorCode::Transport);
        CHECK(stub.requests() == 1);
    }
}

TEST_CASE("chat client reports malformed bodies and unreachable hosts") {
    {
        StubServer stub({"garbage"});
        CHECK(code_of([&] { ChatClient(stub.config()).complete({{"user", "x"}}); }) == ErrorCode::MalformedReply);
    }
    ChatConfig c;
    c.base_url = "http://127.0.0.1:1/v1";
    c.retries = 0;
    c.timeout_seconds = 1;
    CHECK(code_of([&] { ChatClient(c).complete({{"user", "x"}}); }) == ErrorCode::Transport);
}

TEST_CASE("candidate lines drop fences and action prefixes") {
    auto lines = candidate_lines("```\nAction: `click(#a)`\n\n  press(\"Enter\")  \n```");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "click(#a)");
    CHECK(lines[1] == "press(\"Enter\")");
}

TEST_CASE("remote policy skips unparsable lines and asks again") {
    StubServer stub({"I would click the search box.", "Thinking...\nclick(#xe-search)"});
    RemotePolicy policy(stub.config());
    auto spec = shop();
    auto task = cap_task(*spec, "search");
    auto [state, obs] = reset(spec, task);
    WorkingMemory memory;
    std::vector<ResolvedSkill> skills;
    SkillLibrary lib;
    PolicyContext ctx{task, obs, memory, skills, state, lib};
    auto stmt = policy.propose(ctx);
    CHECK(print(stmt) == "click(#xe-search)");
    CHECK(stub.requests() == 2);
}

TEST_CASE("remote judge reads YES or NO from the first line") {
    auto spec = shop();
    auto task = cap_task(*spec, "search");
    OraclePolicy oracle(false);
    auto ep = execute_task(spec, task, SkillLibrary{}, oracle);
    {
        StubServer stub({"YES\nThe results are shown."});
        auto v = RemoteJudge(stub.config()).verdict(ep.trajectory, task, ep.final_state);
        CHECK(v.success);
        CHECK(v.rationale == "The results are shown.");
    }
    {
        StubServer stub({"no"});
        CHECK_FALSE(RemoteJudge(stub.config()).verdict(ep.trajectory, task, ep.final_state).success);
    }
    {
        StubServer stub({"maybe"});
        CHECK(code_of([&] { RemoteJudge(stub.config()).verdict(ep.trajectory, task, ep.final_state); }) ==
              ErrorCode::MalformedReply);
    }
}
