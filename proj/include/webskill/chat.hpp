#pragma once

// Minimal OpenAI-compatible chat-completions client.

#include <string>
#include <vector>

namespace webskill {

struct ChatConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";  // POSTs to <base_url>/chat/completions
    std::string model = "default";
    std::string api_key_env = "WEBSKILL_API_KEY";       // key is read from this variable, never from config
    int timeout_seconds = 60;
    int retries = 2;  // extra attempts after the first
    double temperature = 0.0;
    int max_tokens = 512;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

class ChatClient {
public:
    explicit ChatClient(ChatConfig config);

    /// Content of the first choice. Transport on connection or HTTP failure
    /// after retries; MalformedReply when the body is not a completion.
    std::string complete(const std::vector<ChatMessage>& messages) const;

    const ChatConfig& config() const { return config_; }

private:
    ChatConfig config_;
    std::string origin_;  // scheme://host:port
    std::string path_;    // request path
};

/// Lines of a model reply worth parsing: blanks and code fences dropped,
/// surrounding backticks and an `Action:` prefix stripped.
std::vector<std::string> candidate_lines(const std::string& reply);

} // namespace webskill
