// Outbound HTTP: the text-generation endpoint and the optional embedding service.
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "kgmark/error.hpp"
#include "kgmark/generation.hpp"
#include "kgmark/pipeline.hpp"

namespace kgmark {

namespace {

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url)
{
    auto scheme = url.find("://");
    if (scheme == std::string::npos) fail(ErrorCode::validation, "endpoint URL needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

httplib::Client make_client(const Endpoint& ep, std::chrono::seconds timeout)
{
    httplib::Client cli(ep.base);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    return cli;
}

} // namespace

namespace autolabel {

HttpGenerationClient::HttpGenerationClient(HttpClientConfig config) : config_(std::move(config))
{
    split_url(config_.url);  // validate eagerly
}

std::string HttpGenerationClient::complete(const GenerationRequest& request)
{
    using nlohmann::json;
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"messages", messages},
              {"metadata",
               {{"task", to_string(request.task)}, {"stage", request.stage}, {"type", request.type}, {"reask", request.reask}}}};
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    const auto ep = split_url(config_.url);
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        auto cli = make_client(ep, config_.timeout);
        auto res = cli.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) fail(ErrorCode::unavailable, "generation endpoint answered " + std::to_string(res->status));
        try {
            auto j = json::parse(res->body);
            if (j.contains("reply")) return j.at("reply").get<std::string>();
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
        }
    }
    fail(ErrorCode::unavailable, "generation endpoint unavailable: " + last_error);
}

} // namespace autolabel

namespace pipeline {

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::chrono::seconds timeout)
    : url_(std::move(url)), timeout_(timeout)
{
    split_url(url_);
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(std::span<const std::string> texts)
{
    using nlohmann::json;
    const auto ep = split_url(url_);
    auto cli = make_client(ep, timeout_);
    json body{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    auto res = cli.Post(ep.path, body.dump(), "application/json");
    if (!res) fail(ErrorCode::unavailable, "embedding endpoint: " + httplib::to_string(res.error()));
    if (res->status != 200) fail(ErrorCode::unavailable, "embedding endpoint answered " + std::to_string(res->status));
    std::vector<std::vector<double>> out;
    try {
        out = json::parse(res->body).at("embeddings").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        fail(ErrorCode::unavailable, std::string("embedding response malformed: ") + e.what());
    }
    if (out.size() != texts.size()) fail(ErrorCode::unavailable, "embedding count does not match text count");
    return out;
}

} // namespace pipeline

} // namespace kgmark
