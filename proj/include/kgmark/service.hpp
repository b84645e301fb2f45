#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "json.hpp"
#include "kgmark/generation.hpp"
#include "kgmark/pipeline.hpp"
#include "kgmark/store.hpp"

namespace kgmark::api {

using nlohmann::json;

struct ServiceOptions {
    std::filesystem::path template_dir = KGMARK_TEMPLATE_DIR;
    std::size_t max_concurrent_autolabel = 4;
    int pbkdf2_iterations = 100000;
    std::size_t prefix_budget = 512;
    /// Unix seconds; tests pin it.
    std::function<std::int64_t()> clock;
    /// Defaults to the lexical trigram provider.
    std::shared_ptr<pipeline::EmbeddingProvider> embeddings;
};

/// Everything behind the REST routes. Arguments and results are the JSON bodies the
/// routes exchange; failures are kgmark::Error with the matching code.
///
/// Ids: projects "p<n>"; texts "<project>.<local>" (e.g. "p1.t3"); markups are
/// addressed as "<text id>.<markup id>" (e.g. "p1.t3.m5").
///
/// Locking: the registry lock is held only for lookups; project-wide operations lock
/// the project, then its texts in id order; single-text operations lock only that
/// text. Each knowledge base serializes its own writers.
class Service {
public:
    Service(std::shared_ptr<Store> store, std::shared_ptr<autolabel::GenerationClient> generator,
            ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // auth
    json register_user(const json& body);
    json login(const json& body);
    void logout(std::string_view token);
    /// The user owning a session token; Error(unauthorized) otherwise.
    std::string authenticate(std::string_view token) const;

    // projects
    json review(const std::string& user, const json& wizard) const;
    json create_project(const std::string& user, const json& wizard);
    json list_projects(const std::string& user) const;
    json get_project(const std::string& user, const std::string& project) const;
    json update_settings(const std::string& user, const std::string& project, const json& body);
    json add_member(const std::string& user, const std::string& project, const json& body);

    // texts and markups
    json list_texts(const std::string& user, const std::string& project, std::optional<int> cluster) const;
    json add_texts(const std::string& user, const std::string& project, const json& body);
    json get_text(const std::string& user, const std::string& text) const;
    json add_markup(const std::string& user, const std::string& text, const json& body);
    json transition(const std::string& user, const std::string& markup_ref, const json& body);
    json autolabel(const std::string& user, const std::string& text, const json& body);
    json propagate(const std::string& user, const std::string& markup_ref, const json& body);
    json set_saved(const std::string& user, const std::string& text, const json& body);

    // views
    json dashboard(const std::string& user, const std::string& project) const;
    json graph(const std::string& user, const std::string& project, const std::string& quality) const;
    json export_project(const std::string& user, const std::string& project, const std::string& quality,
                        bool saved_only) const;
    json import_texts(const std::string& user, const std::string& project, const json& payload);
    json knowledge_base(const std::string& user, const std::string& project) const;
    json load_knowledge_base(const std::string& user, const std::string& project, const json& dump);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace kgmark::api
