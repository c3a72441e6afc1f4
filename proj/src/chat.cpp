#include "webskill/chat.hpp"

#include "webskill/error.hpp"

#include "httplib.h"
#include "json.hpp"

#include <cstdlib>
#include <sstream>

namespace webskill {

using json = nlohmann::json;

ChatClient::ChatClient(ChatConfig config) : config_(std::move(config)) {
    const auto& url = config_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorCode::Config, "endpoint must start with http:// or https://: " + url);
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") fail(ErrorCode::Config, "unsupported endpoint scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") fail(ErrorCode::Config, "https endpoints need a build with OpenSSL");
#endif
    auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    std::string base = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();
    path_ = base + "/chat/completions";
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", config_.model},
                 {"messages", msgs},
                 {"temperature", config_.temperature},
                 {"max_tokens", config_.max_tokens}};
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        httplib::Client cli(origin_);
        cli.set_connection_timeout(config_.timeout_seconds, 0);
        cli.set_read_timeout(config_.timeout_seconds, 0);
        auto res = cli.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            if (res->status >= 400 && res->status < 500 && res->status != 429) break;
            continue;
        }
        try {
            auto j = json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            fail(ErrorCode::MalformedReply, std::string("not a chat completion: ") + e.what());
        }
    }
    fail(ErrorCode::Transport, origin_ + path_ + ": " + last_error);
}

std::vector<std::string> candidate_lines(const std::string& reply) {
    std::vector<std::string> out;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.rfind("```", 0) == 0) continue;
        for (std::string prefix : {"Action:", "action:", "ACTION:"})
            if (line.rfind(prefix, 0) == 0) line = line.substr(prefix.size());
        b = line.find_first_not_of(' ');
        if (b == std::string::npos) continue;
        line = line.substr(b);
        while (!line.empty() && line.front() == '`') line.erase(line.begin());
        while (!line.empty() && line.back() == '`') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

} // namespace webskill
