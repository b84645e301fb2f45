#pragma once
// Replays recorded HTTP exchanges against an in-process server on an ephemeral port.
// Each step: {name, method, path, headers?, body? | raw?, status, expect?{pointer: value}, capture?{var: pointer}}.
// "${var}" inside paths, headers and body strings is replaced by earlier captures.

#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "kgmark/generation.hpp"
#include "kgmark/http_api.hpp"
#include "kgmark/service.hpp"
#include "kgmark/store.hpp"

namespace fixtures {

using nlohmann::json;

struct LiveServer {
    std::shared_ptr<kgmark::api::MemoryStore> store = std::make_shared<kgmark::api::MemoryStore>();
    std::shared_ptr<kgmark::autolabel::MockGenerationClient> gen;
    std::unique_ptr<kgmark::api::Service> service;
    std::unique_ptr<kgmark::api::HttpApi> http;
    std::thread worker;
    int port = -1;

    explicit LiveServer(const std::string& mock_file)
        : gen(std::make_shared<kgmark::autolabel::MockGenerationClient>(
              kgmark::autolabel::MockGenerationClient::from_file(mock_file)))
    {
        kgmark::api::ServiceOptions opts;
        opts.pbkdf2_iterations = 1000;
        opts.clock = [] { return std::int64_t{1700000000}; };
        service = std::make_unique<kgmark::api::Service>(store, gen, opts);
        http = std::make_unique<kgmark::api::HttpApi>(*service);
        port = http->bind("127.0.0.1", 0);
        worker = std::thread([this] { http->serve(); });
        httplib::Client probe("127.0.0.1", port);
        for (int i = 0; i < 200 && !probe.Get("/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    ~LiveServer()
    {
        http->stop();
        if (worker.joinable()) worker.join();
    }

    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

struct Exchange {
    int status = -1;
    json body;
};

inline Exchange call(httplib::Client& c, const std::string& method, const std::string& path, const std::string& body,
                     const httplib::Headers& headers)
{
    httplib::Result r;
    if (method == "GET") r = c.Get(path, headers);
    else if (method == "POST") r = c.Post(path, headers, body, "application/json");
    else if (method == "DELETE") r = c.Delete(path, headers);
    else if (method == "PUT") r = c.Put(path, headers, body, "application/json");
    if (!r) return {};
    Exchange e{r->status, json()};
    e.body = json::parse(r->body, nullptr, false);
    return e;
}

inline std::string substitute(const std::string& s, const std::map<std::string, std::string>& vars)
{
    static const std::regex var(R"(\$\{([A-Za-z0-9_]+)\})");
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), var);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        out += s.substr(last, it->position() - last);
        auto v = vars.find((*it)[1]);
        out += v == vars.end() ? it->str() : v->second;
        last = it->position() + it->length();
    }
    return out + s.substr(last);
}

inline json substitute(const json& j, const std::map<std::string, std::string>& vars)
{
    if (j.is_string()) return substitute(j.get<std::string>(), vars);
    if (j.is_array() || j.is_object()) {
        json out = j;
        for (auto& [k, v] : out.items()) v = substitute(v, vars);
        return out;
    }
    return j;
}

/// Runs every step; returns one message per mismatch (empty means the contract holds).
inline std::vector<std::string> replay_contract(const LiveServer& server, const json& contract)
{
    std::vector<std::string> failures;
    std::map<std::string, std::string> vars;
    auto c = server.client();
    for (const auto& step : contract.at("steps")) {
        const auto name = step.at("name").get<std::string>();
        auto path = substitute(step.at("path").get<std::string>(), vars);
        httplib::Headers headers;
        if (step.contains("headers"))
            for (const auto& [k, v] : step["headers"].items()) headers.emplace(k, substitute(v.get<std::string>(), vars));
        std::string body;
        if (step.contains("raw")) body = step["raw"].get<std::string>();
        else if (step.contains("body")) body = substitute(step["body"], vars).dump();
        auto got = call(c, step.at("method").get<std::string>(), path, body, headers);
        auto want = step.at("status").get<int>();
        if (got.status != want) {
            failures.push_back(name + ": status " + std::to_string(got.status) + ", expected " + std::to_string(want) +
                               " body " + got.body.dump());
            continue;
        }
        if (got.status >= 400 && !(got.body.is_object() && got.body.contains("error") &&
                                   got.body["error"].contains("code") && got.body["error"].contains("message")))
            failures.push_back(name + ": error body lacks {error:{code,message}}");
        if (step.contains("expect"))
            for (const auto& [ptr, value] : step["expect"].items()) {
                json::json_pointer p(ptr);
                auto expected = substitute(value, vars);
                if (!got.body.contains(p)) failures.push_back(name + ": missing " + ptr);
                else if (got.body[p] != expected)
                    failures.push_back(name + ": " + ptr + " = " + got.body[p].dump() + ", expected " + expected.dump());
            }
        if (step.contains("capture"))
            for (const auto& [var, ptr] : step["capture"].items()) {
                json::json_pointer p(ptr.get<std::string>());
                if (!got.body.contains(p)) {
                    failures.push_back(name + ": cannot capture " + var);
                    continue;
                }
                const auto& v = got.body[p];
                vars[var] = v.is_string() ? v.get<std::string>() : v.dump();
            }
    }
    return failures;
}

inline json load_json(const std::string& path)
{
    std::ifstream in(path);
    return json::parse(in);
}

} // namespace fixtures
