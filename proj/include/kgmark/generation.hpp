#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kgmark/scheme.hpp"

namespace kgmark::autolabel {

struct ChatMessage {
    std::string role;  // "user" or "assistant"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// One call to the text-generation endpoint: the whole conversation so far plus the
/// stage metadata the mock uses for fallback matching.
struct GenerationRequest {
    std::vector<ChatMessage> messages;
    TaskKind task = TaskKind::ner;
    std::string stage;
    std::string type;
    bool reask = false;
};

/// Conversation serialized as "role: content" lines; this is what fixtures hash.
std::string full_prompt(const std::vector<ChatMessage>& messages);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    /// Returns the reply text. Throws Error(unavailable) once the retry budget is spent.
    virtual std::string complete(const GenerationRequest& request) = 0;
};

/// Canned replies from a fixture file.
///
///     {"rules": [
///        {"prompt_sha256": "<hex>", "reply": "..."},
///        {"contains": "the type of Apple is ORG", "task": "ner", "stage": "types", "reply": "[ORG]"},
///        {"task": "ner", "stage": "entities", "type": "ORG", "reply": "[Apple]"},
///        {"task": "ner", "stage": "types", "fail": true}
///      ],
///      "default_reply": "none"}
///
/// A rule whose `prompt_sha256` equals the hash of the full prompt wins outright.
/// Otherwise the first rule (file order) whose present keys all match is used; keys are
/// `contains` (substring of the full prompt), `task`, `stage`, `type` and `reask`.
/// `fail: true` simulates a transport failure.
class MockGenerationClient : public GenerationClient {
public:
    struct Rule {
        std::optional<std::string> prompt_sha256;
        std::optional<std::string> contains;
        std::optional<TaskKind> task;
        std::optional<std::string> stage;
        std::optional<std::string> type;
        std::optional<bool> reask;
        std::string reply;
        bool fail = false;
    };

    MockGenerationClient() = default;
    MockGenerationClient(std::vector<Rule> rules, std::string default_reply = {});
    MockGenerationClient(MockGenerationClient&& other) noexcept
        : rules_(std::move(other.rules_)), default_reply_(std::move(other.default_reply_)), down_(other.down_),
          calls_(other.calls_)
    {
    }

    static MockGenerationClient from_json(std::string_view json_text);
    static MockGenerationClient from_file(const std::filesystem::path& path);

    std::string complete(const GenerationRequest& request) override;

    /// Every request fails while set, as if the endpoint were down.
    void set_unavailable(bool down);
    std::size_t calls() const;

private:
    std::vector<Rule> rules_;
    std::string default_reply_;
    bool down_ = false;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

struct HttpClientConfig {
    std::string url;                      // e.g. http://localhost:9000/v1/generate
    std::string token_env = "KGMARK_GEN_TOKEN";
    std::chrono::seconds timeout{30};
    int retries = 2;                      // attempts after the first
};

/// POSTs {"messages": [...], "metadata": {...}} and reads "reply" (or an
/// OpenAI-style choices[0].message.content) from the JSON response.
class HttpGenerationClient : public GenerationClient {
public:
    explicit HttpGenerationClient(HttpClientConfig config);
    std::string complete(const GenerationRequest& request) override;

private:
    HttpClientConfig config_;
};

} // namespace kgmark::autolabel
