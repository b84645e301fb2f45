#include "kgmark/generation.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "kgmark/error.hpp"

namespace kgmark::autolabel {

using nlohmann::json;

std::string full_prompt(const std::vector<ChatMessage>& messages)
{
    std::string out;
    for (const auto& m : messages) {
        out += m.role;
        out += ": ";
        out += m.content;
        out += '\n';
    }
    return out;
}

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::validation, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

MockGenerationClient::MockGenerationClient(std::vector<Rule> rules, std::string default_reply)
    : rules_(std::move(rules)), default_reply_(std::move(default_reply))
{
}

MockGenerationClient MockGenerationClient::from_json(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("mock fixture: ") + e.what());
    }
    std::vector<Rule> rules;
    for (const auto& r : j.value("rules", json::array())) {
        Rule rule;
        if (r.contains("prompt_sha256")) rule.prompt_sha256 = r["prompt_sha256"].get<std::string>();
        if (r.contains("contains")) rule.contains = r["contains"].get<std::string>();
        if (r.contains("task")) rule.task = parse_task(r["task"].get<std::string>());
        if (r.contains("stage")) rule.stage = r["stage"].get<std::string>();
        if (r.contains("type")) rule.type = r["type"].get<std::string>();
        if (r.contains("reask")) rule.reask = r["reask"].get<bool>();
        rule.reply = r.value("reply", std::string{});
        rule.fail = r.value("fail", false);
        rules.push_back(std::move(rule));
    }
    return MockGenerationClient(std::move(rules), j.value("default_reply", std::string{}));
}

MockGenerationClient MockGenerationClient::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::not_found, "cannot open mock fixture " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string MockGenerationClient::complete(const GenerationRequest& request)
{
    {
        std::lock_guard lock(mu_);
        ++calls_;
        if (down_) fail(ErrorCode::unavailable, "generation endpoint unavailable (mock)");
    }
    auto prompt = full_prompt(request.messages);
    auto hash = sha256_hex(prompt);

    const Rule* chosen = nullptr;
    for (const auto& r : rules_) {
        if (r.prompt_sha256 && *r.prompt_sha256 == hash) {
            chosen = &r;
            break;
        }
    }
    if (!chosen) {
        for (const auto& r : rules_) {
            if (r.prompt_sha256) continue;
            if (r.contains && prompt.find(*r.contains) == std::string::npos) continue;
            if (r.task && *r.task != request.task) continue;
            if (r.stage && *r.stage != request.stage) continue;
            if (r.type && *r.type != request.type) continue;
            if (r.reask && *r.reask != request.reask) continue;
            chosen = &r;
            break;
        }
    }
    if (!chosen) return default_reply_;
    if (chosen->fail) fail(ErrorCode::unavailable, "generation endpoint unavailable (mock rule)");
    return chosen->reply;
}

void MockGenerationClient::set_unavailable(bool down)
{
    std::lock_guard lock(mu_);
    down_ = down;
}

std::size_t MockGenerationClient::calls() const
{
    std::lock_guard lock(mu_);
    return calls_;
}

} // namespace kgmark::autolabel
