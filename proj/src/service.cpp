#include "kgmark/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <semaphore>
#include <set>
#include <shared_mutex>
#include <tuple>

#include "kgmark/auth.hpp"
#include "kgmark/autolabel.hpp"
#include "kgmark/error.hpp"
#include "kgmark/knowledge_base.hpp"
#include "kgmark/serialization.hpp"

namespace kgmark::api {

using serial::field;
using serial::field_or;

namespace {

struct TextState {
    std::string id;     // global, "p1.t3"
    std::string local;  // "t3"
    std::string raw;    // immutable copy of the document text
    std::mutex mu;
    AnnotatedDocument doc;
    bool saved = false;
};

struct ProjectState {
    std::string id;
    std::shared_ptr<const Ontology> ontology;
    std::atomic<bool> model_update{true};
    std::atomic<bool> clustering{false};

    mutable std::mutex mu;  // config, text list, sequence
    pipeline::ProjectConfig config;
    std::vector<std::string> texts;  // local ids in insertion order
    std::uint64_t next_seq = 1;

    mutable std::mutex members_mu;
    std::vector<std::string> members;

    std::shared_ptr<kb::KnowledgeBase> kb;  // std::atomic_load / atomic_store
    std::mutex kb_persist_mu;

    std::shared_ptr<kb::KnowledgeBase> knowledge() const { return std::atomic_load(&kb); }
    bool has_member(const std::string& user) const
    {
        std::lock_guard lock(members_mu);
        return std::find(members.begin(), members.end(), user) != members.end();
    }
};

struct UserState {
    std::string name;
    Credential credential;
    std::set<std::string> sessions;  // sha256 of each token
};

struct Draft {
    pipeline::ProjectConfig config;
    Ontology ontology;
    std::vector<std::string> texts;
    pipeline::PreprocessReport preprocess;
    std::vector<std::optional<int>> clusters;
    std::vector<std::string> warnings;
    std::string preannotation;
};

std::optional<std::uint64_t> version_of(const json& body)
{
    if (!body.is_object() || !body.contains("version") || body["version"].is_null()) return std::nullopt;
    return field<std::uint64_t>(body, "version");
}

std::pair<std::string, std::string> split_ref(const std::string& ref)
{
    auto dot = ref.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == ref.size())
        fail(ErrorCode::not_found, "malformed markup reference '" + ref + "'");
    return {ref.substr(0, dot), ref.substr(dot + 1)};
}

std::string project_of(const std::string& text_id)
{
    auto dot = text_id.find('.');
    if (dot == std::string::npos) fail(ErrorCode::not_found, "unknown text '" + text_id + "'");
    return text_id.substr(0, dot);
}

bool valid_local_id(const std::string& s) { return valid_key(s) && s.find('.') == std::string::npos; }

std::vector<std::string> parse_input(const json& body)
{
    if (!body.is_object()) fail(ErrorCode::validation, "input must be an object");
    std::vector<std::string> out;
    if (body.contains("texts")) {
        for (const auto& t : field<json>(body, "texts")) {
            if (t.is_string()) out.push_back(t.get<std::string>());
            else out.push_back(field<std::string>(t, "text"));
        }
        return out;
    }
    auto format = field_or<std::string>(body, "format", "lines");
    auto content = field<std::string>(body, "content");
    if (format == "lines") {
        std::size_t b = 0;
        while (b <= content.size()) {
            auto e = content.find('\n', b);
            if (e == std::string::npos) e = content.size();
            auto line = content.substr(b, e - b);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) out.push_back(line);
            b = e + 1;
        }
    } else if (format == "json") {
        json arr;
        try {
            arr = json::parse(content);
        } catch (const json::exception& e) {
            fail(ErrorCode::validation, std::string("uploaded JSON does not parse: ") + e.what());
        }
        return parse_input(json{{"texts", arr}});
    } else {
        fail(ErrorCode::validation, "unknown upload format '" + format + "'");
    }
    return out;
}

Ontology parse_scheme(TaskKind task, const json& scheme)
{
    Ontology o;
    if (scheme.contains("type_list")) {
        auto [ents, rels] = autolabel::type_list_to_scheme(task, field<std::string>(scheme, "type_list"));
        o = parse_scheme_text(task, ents, rels);
    } else {
        o = parse_scheme_text(task, field_or<std::vector<std::string>>(scheme, "entity_lines", {}),
                              field_or<std::vector<std::string>>(scheme, "relation_lines", {}));
    }
    auto violations = validate_ontology(o);
    if (!violations.empty()) {
        std::string msg = "invalid scheme:";
        for (const auto& v : violations) msg += " " + v.message + ";";
        fail(ErrorCode::validation, msg);
    }
    if (o.entity_types.empty() || (task != TaskKind::ner && o.relation_types.empty()))
        fail(ErrorCode::validation, "scheme declares no annotation types");
    return o;
}

json preprocess_json(const pipeline::PreprocessReport& r)
{
    return json{{"duplicates", r.duplicates}, {"chars_removed", r.chars_removed}};
}

// Export order: entities by (start, sequence), then relations by sequence.
std::vector<Markup> ordered(std::vector<Markup> ms)
{
    auto seq = [](const Markup& m) {
        try {
            return std::stoull(m.id.substr(1));
        } catch (...) {
            return 0ull;
        }
    };
    std::stable_sort(ms.begin(), ms.end(), [&](const Markup& a, const Markup& b) {
        if (a.is_entity != b.is_entity) return a.is_entity;
        if (a.is_entity && a.start != b.start) return *a.start < *b.start;
        return seq(a) < seq(b);
    });
    return ms;
}

enum class Quality { accepted, suggested, all };

Quality parse_quality(const std::string& q)
{
    if (q.empty() || q == "all") return Quality::all;
    if (q == "accepted") return Quality::accepted;
    if (q == "suggested") return Quality::suggested;
    fail(ErrorCode::validation, "quality must be accepted, suggested or all");
}

// Markups passing the quality filter; relations need both endpoints kept.
AnnotatedDocument filtered(const AnnotatedDocument& doc, Quality q)
{
    if (q == Quality::all) return doc;
    auto keep = [&](const Markup& m) { return q == Quality::accepted ? !m.suggested : m.suggested; };
    std::set<std::string> entities;
    std::vector<Markup> out;
    for (const auto& m : doc.markups())
        if (m.is_entity && keep(m)) {
            entities.insert(m.id);
            out.push_back(m);
        }
    for (const auto& m : doc.markups())
        if (!m.is_entity && keep(m) && entities.count(*m.source) && entities.count(*m.target)) out.push_back(m);
    auto r = AnnotatedDocument::restore(doc.doc_id(), doc.text(), doc.language(), std::move(out), doc.version());
    r.set_cluster_id(doc.cluster_id());
    return r;
}

json markups_json(const std::vector<Markup>& ms)
{
    json a = json::array();
    for (const auto& m : ordered(ms)) a.push_back(serial::to_json(m));
    return a;
}

json triples_json(const AnnotatedDocument& doc, const Ontology& o)
{
    json a = json::array();
    for (const auto& t : unified_triples(doc, o)) a.push_back(serial::to_json(t));
    return a;
}

} // namespace

struct Service::Impl {
    std::shared_ptr<Store> store;
    std::shared_ptr<autolabel::GenerationClient> generator;
    ServiceOptions options;
    autolabel::TemplateStore templates;
    std::counting_semaphore<> slots;

    mutable std::shared_mutex registry_mu;
    std::map<std::string, std::shared_ptr<ProjectState>> projects;
    std::map<std::string, std::shared_ptr<TextState>> texts;
    std::uint64_t next_project = 1;

    mutable std::mutex users_mu;
    std::map<std::string, UserState> users;
    std::map<std::string, std::string> sessions;  // token hash -> user

    Impl(std::shared_ptr<Store> s, std::shared_ptr<autolabel::GenerationClient> g, ServiceOptions o)
        : store(std::move(s)), generator(std::move(g)), options(std::move(o)), templates(options.template_dir),
          slots(static_cast<std::ptrdiff_t>(std::max<std::size_t>(options.max_concurrent_autolabel, 1)))
    {
        if (!options.clock)
            options.clock = [] {
                return std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                    .count();
            };
        if (!options.embeddings) options.embeddings = std::make_shared<pipeline::LexicalEmbeddingProvider>();
        load();
    }

    std::int64_t now() const { return options.clock(); }

    // ---- persistence ----------------------------------------------------------------

    json user_record(const UserState& u) const
    {
        return json{{"name", u.name},
                    {"salt", u.credential.salt},
                    {"hash", u.credential.hash},
                    {"iterations", u.credential.iterations},
                    {"sessions", u.sessions}};
    }

    // caller holds p.mu
    void persist_project(const ProjectState& p) const
    {
        std::vector<std::string> members;
        {
            std::lock_guard lock(p.members_mu);
            members = p.members;
        }
        store->put("projects", p.id,
                   json{{"id", p.id},
                        {"config", serial::to_json(p.config)},
                        {"ontology", serial::to_json(*p.ontology)},
                        {"members", members},
                        {"texts", p.texts},
                        {"next_text_seq", p.next_seq}});
    }

    void persist_text(const std::string& project, const TextState& t, const AnnotatedDocument& doc, bool saved) const
    {
        json cluster = doc.cluster_id() ? json(*doc.cluster_id()) : json(nullptr);
        json markups = json::array();
        for (const auto& m : doc.markups()) markups.push_back(serial::to_json(m));
        store->put("texts", t.id,
                   json{{"id", t.id},
                        {"project", project},
                        {"local_id", t.local},
                        {"text", doc.text()},
                        {"language", to_string(doc.language())},
                        {"markups", markups},
                        {"version", doc.version()},
                        {"cluster_id", cluster},
                        {"saved", saved}});
    }

    void persist_kb(ProjectState& p) const
    {
        std::lock_guard lock(p.kb_persist_mu);
        store->put("kb", p.id, json::parse(p.knowledge()->dump()));
    }

    void load()
    {
        for (auto& [name, r] : store->list("users")) {
            UserState u;
            u.name = field<std::string>(r, "name");
            u.credential = Credential{field<std::string>(r, "salt"), field<std::string>(r, "hash"),
                                      field<int>(r, "iterations")};
            u.sessions = field_or<std::set<std::string>>(r, "sessions", {});
            for (const auto& s : u.sessions) sessions[s] = u.name;
            users.emplace(u.name, std::move(u));
        }
        for (auto& [id, r] : store->list("projects")) {
            auto p = std::make_shared<ProjectState>();
            p->id = id;
            p->config = serial::config_from_json(field<json>(r, "config"));
            p->ontology = std::make_shared<const Ontology>(serial::ontology_from_json(field<json>(r, "ontology")));
            p->model_update = p->config.model_update;
            p->clustering = p->config.clustering;
            p->members = field<std::vector<std::string>>(r, "members");
            p->texts = field<std::vector<std::string>>(r, "texts");
            p->next_seq = field<std::uint64_t>(r, "next_text_seq");
            if (auto dump = store->get("kb", id))
                p->kb = std::make_shared<kb::KnowledgeBase>(kb::KnowledgeBase::load(dump->dump()));
            else
                p->kb = std::make_shared<kb::KnowledgeBase>(id, p->config.language, p->config.kb_threshold);
            for (const auto& local : p->texts) {
                auto tid = id + "." + local;
                auto rec = store->get("texts", tid);
                if (!rec) fail(ErrorCode::parse, "project " + id + " lists missing text " + tid);
                auto t = std::make_shared<TextState>();
                t->id = tid;
                t->local = local;
                std::vector<Markup> ms;
                for (const auto& m : field<json>(*rec, "markups")) ms.push_back(serial::markup_from_json(m));
                t->doc = AnnotatedDocument::restore(local, field<std::string>(*rec, "text"),
                                                    parse_language(field<std::string>(*rec, "language")), std::move(ms),
                                                    field<std::uint64_t>(*rec, "version"));
                if (rec->contains("cluster_id") && !(*rec)["cluster_id"].is_null())
                    t->doc.set_cluster_id(field<int>(*rec, "cluster_id"));
                t->saved = field_or<bool>(*rec, "saved", false);
                t->raw = t->doc.text();
                texts.emplace(tid, std::move(t));
            }
            if (id.size() > 1 && id[0] == 'p') {
                try {
                    next_project = std::max<std::uint64_t>(next_project, std::stoull(id.substr(1)) + 1);
                } catch (...) {
                }
            }
            projects.emplace(id, std::move(p));
        }
    }

    // ---- access ---------------------------------------------------------------------

    std::shared_ptr<ProjectState> project(const std::string& user, const std::string& id) const
    {
        std::shared_ptr<ProjectState> p;
        {
            std::shared_lock lock(registry_mu);
            auto it = projects.find(id);
            if (it != projects.end()) p = it->second;
        }
        // Non-members get the same answer as for a missing project.
        if (!p || !p->has_member(user)) fail(ErrorCode::not_found, "unknown project '" + id + "'");
        return p;
    }

    std::pair<std::shared_ptr<ProjectState>, std::shared_ptr<TextState>> text(const std::string& user,
                                                                              const std::string& id) const
    {
        auto p = project(user, project_of(id));
        std::shared_lock lock(registry_mu);
        auto it = texts.find(id);
        if (it == texts.end()) fail(ErrorCode::not_found, "unknown text '" + id + "'");
        return {p, it->second};
    }

    // caller holds p.mu
    std::vector<std::shared_ptr<TextState>> texts_of(const ProjectState& p) const
    {
        std::vector<std::shared_ptr<TextState>> out;
        std::shared_lock lock(registry_mu);
        for (const auto& local : p.texts) out.push_back(texts.at(p.id + "." + local));
        return out;
    }

    // Locks every text of the project in id order; caller holds p.mu.
    static std::vector<std::unique_lock<std::mutex>> lock_all(std::vector<std::shared_ptr<TextState>> ts)
    {
        std::sort(ts.begin(), ts.end(), [](const auto& a, const auto& b) { return a->id < b->id; });
        std::vector<std::unique_lock<std::mutex>> locks;
        for (auto& t : ts) locks.emplace_back(t->mu);
        return locks;
    }

    // ---- mutation core --------------------------------------------------------------

    // Replaces t.doc with `work` when it changed: persist first, then swap, then feed
    // the accepted-fact delta to the knowledge base. Caller holds t.mu.
    void commit(ProjectState& p, TextState& t, AnnotatedDocument work)
    {
        if (work.version() == t.doc.version()) return;
        persist_text(p.id, t, work, t.saved);
        auto before = kb::accepted_facts(t.doc);
        t.doc = std::move(work);
        if (p.model_update) {
            auto events = kb::diff_facts(before, kb::accepted_facts(t.doc), now());
            if (!events.empty()) {
                p.knowledge()->ingest(events);
                persist_kb(p);
            }
        }
    }

    // Rebuilds the knowledge base from every accepted markup; caller holds p.mu and all text locks.
    void rebuild_kb(ProjectState& p, const std::vector<std::shared_ptr<TextState>>& ts)
    {
        auto fresh = std::make_shared<kb::KnowledgeBase>(p.id, p.config.language, p.config.kb_threshold);
        auto ts_now = now();
        for (const auto& t : ts) fresh->ingest(kb::diff_facts({}, kb::accepted_facts(t->doc), ts_now));
        std::atomic_store(&p.kb, fresh);
        persist_kb(p);
    }

    // ---- wizard ---------------------------------------------------------------------

    Draft draft(const json& wizard) const
    {
        Draft d;
        d.config = serial::config_from_json(field<json>(wizard, "config"));
        d.ontology = parse_scheme(d.config.task, field<json>(wizard, "scheme"));
        std::vector<std::string> raw;
        if (wizard.contains("input")) raw = parse_input(wizard["input"]);
        auto pre = pipeline::preprocess(raw, d.config.preprocessing);
        d.texts = std::move(pre.texts);
        d.preprocess = std::move(pre.report);
        for (const auto& t : d.texts)
            if (trim(t).empty()) fail(ErrorCode::validation, "a text is empty after preprocessing");
        d.clusters.assign(d.texts.size(), std::nullopt);
        if (d.config.clustering && !d.texts.empty()) {
            auto c = pipeline::cluster(d.texts, *options.embeddings, d.config.cluster_cutoff);
            for (std::size_t i = 0; i < d.texts.size(); ++i) d.clusters[i] = c.assignment[i];
            d.warnings = std::move(c.warnings);
        }
        d.preannotation = field_or<std::string>(wizard, "preannotation", "");
        return d;
    }

    json project_summary(const ProjectState& p) const
    {
        std::lock_guard lock(p.mu);
        return json{{"id", p.id},
                    {"name", p.config.name},
                    {"task", to_string(p.config.task)},
                    {"language", to_string(p.config.language)},
                    {"texts", p.texts.size()}};
    }

    json text_json(const TextState& t, const AnnotatedDocument& doc, bool saved, const Ontology& o) const
    {
        return json{{"id", t.id},
                    {"doc_id", t.local},
                    {"text", doc.text()},
                    {"tokens", serial::tokens_to_json(doc.tokens())},
                    {"markups", markups_json(doc.markups())},
                    {"triples", triples_json(doc, o)},
                    {"version", doc.version()},
                    {"cluster_id", doc.cluster_id() ? json(*doc.cluster_id()) : json(nullptr)},
                    {"saved", saved},
                    {"counts", serial::to_json(counts(doc, o))}};
    }

    // Snapshot of every text (id, document, saved flag) in project order.
    std::vector<std::tuple<std::shared_ptr<TextState>, AnnotatedDocument, bool>> snapshot(const ProjectState& p) const
    {
        std::vector<std::shared_ptr<TextState>> ts;
        {
            std::lock_guard lock(p.mu);
            ts = texts_of(p);
        }
        std::vector<std::tuple<std::shared_ptr<TextState>, AnnotatedDocument, bool>> out;
        for (auto& t : ts) {
            std::lock_guard lock(t->mu);
            out.emplace_back(t, t->doc, t->saved);
        }
        return out;
    }

    // Creates text states for new documents; caller holds p.mu.
    std::vector<std::shared_ptr<TextState>> add_documents(ProjectState& p, std::vector<AnnotatedDocument> docs,
                                                          const std::vector<bool>& saved)
    {
        std::vector<std::shared_ptr<TextState>> created;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            auto t = std::make_shared<TextState>();
            t->local = docs[i].doc_id();
            t->id = p.id + "." + t->local;
            t->raw = docs[i].text();
            t->saved = i < saved.size() && saved[i];
            t->doc = std::move(docs[i]);
            persist_text(p.id, *t, t->doc, t->saved);
            created.push_back(std::move(t));
        }
        for (const auto& t : created) p.texts.push_back(t->local);
        persist_project(p);
        std::unique_lock lock(registry_mu);
        for (const auto& t : created) texts.emplace(t->id, t);
        return created;
    }

    std::string next_local(ProjectState& p) { return "t" + std::to_string(p.next_seq++); }
};

// ---- construction ---------------------------------------------------------------------

Service::Service(std::shared_ptr<Store> store, std::shared_ptr<autolabel::GenerationClient> generator,
                 ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(store), std::move(generator), std::move(options)))
{
}

Service::~Service() = default;

// ---- auth -----------------------------------------------------------------------------

json Service::register_user(const json& body)
{
    auto name = field<std::string>(body, "name");
    auto password = field<std::string>(body, "password");
    if (!valid_local_id(name) || name.size() > 64)
        fail(ErrorCode::validation, "user names use letters, digits, '_' and '-' (at most 64)");
    if (password.size() < 8) fail(ErrorCode::validation, "passwords need at least 8 characters");
    UserState u{name, hash_password(password, impl_->options.pbkdf2_iterations), {}};
    std::lock_guard lock(impl_->users_mu);
    if (impl_->users.count(name)) fail(ErrorCode::conflict, "user '" + name + "' already exists");
    impl_->store->put("users", name, impl_->user_record(u));
    impl_->users.emplace(name, std::move(u));
    return json{{"name", name}};
}

json Service::login(const json& body)
{
    auto name = field<std::string>(body, "name");
    auto password = field<std::string>(body, "password");
    std::lock_guard lock(impl_->users_mu);
    auto it = impl_->users.find(name);
    if (it == impl_->users.end() || !verify_password(password, it->second.credential))
        fail(ErrorCode::unauthorized, "wrong user name or password");
    auto token = random_token();
    auto digest = autolabel::sha256_hex(token);
    auto u = it->second;
    u.sessions.insert(digest);
    impl_->store->put("users", name, impl_->user_record(u));
    it->second = std::move(u);
    impl_->sessions[digest] = name;
    return json{{"name", name}, {"token", token}};
}

void Service::logout(std::string_view token)
{
    auto digest = autolabel::sha256_hex(token);
    std::lock_guard lock(impl_->users_mu);
    auto s = impl_->sessions.find(digest);
    if (s == impl_->sessions.end()) return;
    auto& u = impl_->users.at(s->second);
    u.sessions.erase(digest);
    impl_->store->put("users", u.name, impl_->user_record(u));
    impl_->sessions.erase(s);
}

std::string Service::authenticate(std::string_view token) const
{
    if (token.empty()) fail(ErrorCode::unauthorized, "authentication required");
    auto digest = autolabel::sha256_hex(token);
    std::lock_guard lock(impl_->users_mu);
    auto s = impl_->sessions.find(digest);
    if (s == impl_->sessions.end()) fail(ErrorCode::unauthorized, "unknown or expired session");
    return s->second;
}

// ---- projects -------------------------------------------------------------------------

json Service::review(const std::string&, const json& wizard) const
{
    auto d = impl_->draft(wizard);
    auto summary = pipeline::review_summary(pipeline::ProjectDraft{d.config, d.ontology, d.texts});
    json clusters = json::array();
    for (const auto& c : d.clusters) clusters.push_back(c ? json(*c) : json(nullptr));
    auto [ents, rels] = render_scheme_text(d.ontology);
    return json{{"summary", serial::to_json(summary)},
                {"preprocess", preprocess_json(d.preprocess)},
                {"clusters", clusters},
                {"warnings", d.warnings},
                {"scheme", {{"entity_lines", ents}, {"relation_lines", rels}}},
                {"type_list", autolabel::render_type_list(d.ontology)}};
}

json Service::create_project(const std::string& user, const json& wizard)
{
    auto d = impl_->draft(wizard);
    auto p = std::make_shared<ProjectState>();
    {
        std::unique_lock lock(impl_->registry_mu);
        p->id = "p" + std::to_string(impl_->next_project++);
    }
    p->config = d.config;
    p->ontology = std::make_shared<const Ontology>(d.ontology);
    p->model_update = d.config.model_update;
    p->clustering = d.config.clustering;
    p->members = {user};
    p->kb = std::make_shared<kb::KnowledgeBase>(p->id, d.config.language, d.config.kb_threshold);

    std::vector<AnnotatedDocument> docs;
    for (std::size_t i = 0; i < d.texts.size(); ++i) {
        AnnotatedDocument doc("t" + std::to_string(p->next_seq++), d.texts[i], d.config.language);
        doc.set_cluster_id(d.clusters[i]);
        docs.push_back(std::move(doc));
    }
    pipeline::PreannotationReport pre;
    if (!d.preannotation.empty()) pre = pipeline::import_preannotation(docs, *p->ontology, d.preannotation);

    std::lock_guard lock(p->mu);
    impl_->persist_kb(*p);
    impl_->add_documents(*p, std::move(docs), {});
    {
        std::unique_lock reg(impl_->registry_mu);
        impl_->projects.emplace(p->id, p);
    }
    json errors = json::array();
    for (const auto& e : pre.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    return json{{"project", json{{"id", p->id}, {"name", p->config.name}, {"texts", p->texts.size()}}},
                {"preprocess", preprocess_json(d.preprocess)},
                {"warnings", d.warnings},
                {"preannotation", {{"rows", pre.rows}, {"created", pre.created.size()}, {"errors", errors}}}};
}

json Service::list_projects(const std::string& user) const
{
    std::vector<std::shared_ptr<ProjectState>> ps;
    {
        std::shared_lock lock(impl_->registry_mu);
        for (const auto& [id, p] : impl_->projects)
            if (p->has_member(user)) ps.push_back(p);
    }
    json out = json::array();
    for (const auto& p : ps) out.push_back(impl_->project_summary(*p));
    return out;
}

json Service::get_project(const std::string& user, const std::string& id) const
{
    auto p = impl_->project(user, id);
    std::lock_guard lock(p->mu);
    std::vector<std::string> members;
    {
        std::lock_guard m(p->members_mu);
        members = p->members;
    }
    auto [ents, rels] = render_scheme_text(*p->ontology);
    return json{{"id", p->id},
                {"config", serial::to_json(p->config)},
                {"ontology", serial::to_json(*p->ontology)},
                {"scheme", {{"entity_lines", ents}, {"relation_lines", rels}}},
                {"type_list", autolabel::render_type_list(*p->ontology)},
                {"members", members},
                {"texts", p->texts.size()}};
}

json Service::update_settings(const std::string& user, const std::string& id, const json& body)
{
    auto p = impl_->project(user, id);
    std::lock_guard lock(p->mu);
    auto ts = impl_->texts_of(*p);
    auto locks = Impl::lock_all(ts);
    if (body.contains("model_update")) {
        bool on = field<bool>(body, "model_update");
        if (on && !p->config.model_update) impl_->rebuild_kb(*p, ts);
        p->config.model_update = on;
        p->model_update = on;
    }
    if (body.contains("clustering")) {
        bool on = field<bool>(body, "clustering");
        std::vector<std::optional<int>> assignment(ts.size());
        if (on && !ts.empty()) {
            std::vector<std::string> raw;
            for (const auto& t : ts) raw.push_back(t->raw);
            auto c = pipeline::cluster(raw, *impl_->options.embeddings, p->config.cluster_cutoff);
            for (std::size_t i = 0; i < ts.size(); ++i) assignment[i] = c.assignment[i];
        }
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (ts[i]->doc.cluster_id() == assignment[i]) continue;
            auto work = ts[i]->doc;
            work.set_cluster_id(assignment[i]);
            impl_->persist_text(p->id, *ts[i], work, ts[i]->saved);
            ts[i]->doc = std::move(work);
        }
        p->config.clustering = on;
        p->clustering = on;
    }
    impl_->persist_project(*p);
    return json{{"model_update", p->config.model_update}, {"clustering", p->config.clustering}};
}

json Service::add_member(const std::string& user, const std::string& id, const json& body)
{
    auto p = impl_->project(user, id);
    auto name = field<std::string>(body, "name");
    {
        std::lock_guard lock(impl_->users_mu);
        if (!impl_->users.count(name)) fail(ErrorCode::not_found, "unknown user '" + name + "'");
    }
    std::lock_guard lock(p->mu);
    {
        std::lock_guard m(p->members_mu);
        if (std::find(p->members.begin(), p->members.end(), name) == p->members.end()) p->members.push_back(name);
    }
    impl_->persist_project(*p);
    std::lock_guard m(p->members_mu);
    return json{{"members", p->members}};
}

// ---- texts ----------------------------------------------------------------------------

json Service::list_texts(const std::string& user, const std::string& id, std::optional<int> cluster) const
{
    auto p = impl_->project(user, id);
    json out = json::array();
    for (const auto& [t, doc, saved] : impl_->snapshot(*p)) {
        if (cluster && doc.cluster_id() != cluster) continue;
        out.push_back(json{{"id", t->id},
                           {"doc_id", t->local},
                           {"text", doc.text()},
                           {"version", doc.version()},
                           {"cluster_id", doc.cluster_id() ? json(*doc.cluster_id()) : json(nullptr)},
                           {"saved", saved},
                           {"counts", serial::to_json(counts(doc, *p->ontology))}});
    }
    return out;
}

json Service::add_texts(const std::string& user, const std::string& id, const json& body)
{
    auto p = impl_->project(user, id);
    auto raw = parse_input(body);
    std::lock_guard lock(p->mu);
    auto pre = pipeline::preprocess(raw, p->config.preprocessing);
    auto existing = impl_->texts_of(*p);

    std::vector<std::string> fresh;
    std::vector<std::size_t> skipped;  // duplicates of texts already in the project
    std::set<std::string> known;
    if (p->config.preprocessing.deduplicate)
        for (const auto& t : existing) known.insert(t->raw);
    for (std::size_t i = 0; i < pre.texts.size(); ++i) {
        if (trim(pre.texts[i]).empty()) fail(ErrorCode::validation, "a text is empty after preprocessing");
        if (known.count(pre.texts[i])) {
            skipped.push_back(i);
            continue;
        }
        fresh.push_back(pre.texts[i]);
    }

    std::vector<AnnotatedDocument> docs;
    for (const auto& t : fresh) docs.emplace_back(impl_->next_local(*p), t, p->config.language);

    json warnings = json::array();
    if (p->clustering && !docs.empty()) {
        auto locks = Impl::lock_all(existing);
        std::vector<std::string> all;
        for (const auto& t : existing) all.push_back(t->raw);
        for (const auto& d : docs) all.push_back(d.text());
        auto c = pipeline::cluster(all, *impl_->options.embeddings, p->config.cluster_cutoff);
        for (const auto& w : c.warnings) warnings.push_back(w);
        for (std::size_t i = 0; i < existing.size(); ++i) {
            auto& t = *existing[i];
            if (t.doc.cluster_id() == c.assignment[i]) continue;
            auto work = t.doc;
            work.set_cluster_id(c.assignment[i]);
            impl_->persist_text(p->id, t, work, t.saved);
            t.doc = std::move(work);
        }
        for (std::size_t i = 0; i < docs.size(); ++i) docs[i].set_cluster_id(c.assignment[existing.size() + i]);
    }
    auto created = impl_->add_documents(*p, std::move(docs), {});
    json ids = json::array();
    for (const auto& t : created) ids.push_back(t->id);
    return json{{"created", ids},
                {"preprocess", preprocess_json(pre.report)},
                {"already_present", skipped},
                {"warnings", warnings}};
}

json Service::get_text(const std::string& user, const std::string& id) const
{
    auto [p, t] = impl_->text(user, id);
    std::lock_guard lock(t->mu);
    return impl_->text_json(*t, t->doc, t->saved, *p->ontology);
}

json Service::add_markup(const std::string& user, const std::string& id, const json& body)
{
    auto [p, t] = impl_->text(user, id);
    const bool is_entity = field_or<bool>(body, "isEntity", true);
    const auto label = body.contains("label") ? field<std::string>(body, "label") : field<std::string>(body, "name");
    const auto state = field_or<bool>(body, "suggested", false) ? MarkupState::suggested : MarkupState::accepted;

    std::lock_guard lock(t->mu);
    check_version(t->doc, version_of(body));
    auto work = t->doc;
    AddResult r = is_entity ? kgmark::add_markup(work, *p->ontology,
                                                 EntityDraft{label, field<int>(body, "start"), field<int>(body, "end")},
                                                 state)
                            : kgmark::add_markup(work, *p->ontology,
                                                 RelationDraft{label, field<std::string>(body, "source"),
                                                               field<std::string>(body, "target")},
                                                 state);
    impl_->commit(*p, *t, std::move(work));
    return json{{"markup", serial::to_json(r.markup)}, {"created", r.created}, {"version", t->doc.version()}};
}

json Service::transition(const std::string& user, const std::string& ref, const json& body)
{
    auto [tid, mid] = split_ref(ref);
    auto [p, t] = impl_->text(user, tid);
    auto action = parse_action(field<std::string>(body, "action"));
    std::lock_guard lock(t->mu);
    check_version(t->doc, version_of(body));
    auto work = t->doc;
    auto s = kgmark::transition(work, mid, action);
    impl_->commit(*p, *t, std::move(work));
    return json{{"accepted", s.accepted}, {"deleted", s.deleted}, {"version", t->doc.version()}};
}

json Service::autolabel(const std::string& user, const std::string& id, const json& body)
{
    auto [p, t] = impl_->text(user, id);
    auto expected = version_of(body);
    std::string text;
    Language lang;
    {
        std::lock_guard lock(t->mu);
        check_version(t->doc, expected);
        text = t->doc.text();
        lang = t->doc.language();
    }
    if (!impl_->generator) fail(ErrorCode::unavailable, "no generation endpoint configured");

    std::string prefix;
    if (p->model_update) {
        auto entries = p->knowledge()->entries();
        prefix = kb::generate_prefix(text, lang, *entries, impl_->options.prefix_budget);
    }
    auto plan = autolabel::build_plan(impl_->templates, lang, text, *p->ontology, prefix);

    autolabel::ExecutionResult result;
    {
        impl_->slots.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{impl_->slots};
        result = autolabel::execute_plan(*impl_->generator, plan);
    }

    std::lock_guard lock(t->mu);
    check_version(t->doc, expected);  // the document may have moved on during generation
    auto work = t->doc;
    auto m = autolabel::materialize(work, *p->ontology, result.triples);
    impl_->commit(*p, *t, std::move(work));

    json created = json::array(), unanchorable = json::array(), warnings = json::array();
    for (const auto& mk : m.created) created.push_back(serial::to_json(mk));
    for (const auto& u : m.unanchorable)
        unanchorable.push_back({{"triple", serial::to_json(u.triple)}, {"reason", u.reason}});
    for (const auto& w : result.warnings) warnings.push_back({{"stage", w.stage}, {"type", w.type}, {"message", w.message}});
    return json{{"created", created},
                {"unanchorable", unanchorable},
                {"warnings", warnings},
                {"prefix", prefix},
                {"version", t->doc.version()}};
}

json Service::propagate(const std::string& user, const std::string& ref, const json& body)
{
    auto [tid, mid] = split_ref(ref);
    auto [p, seed] = impl_->text(user, tid);
    auto scope_name = field_or<std::string>(body, "scope", "project");
    PropagationScope scope;
    if (scope_name == "project") scope = PropagationScope::project;
    else if (scope_name == "document") scope = PropagationScope::document;
    else fail(ErrorCode::validation, "scope must be project or document");

    std::lock_guard lock(p->mu);
    auto ts = scope == PropagationScope::project ? impl_->texts_of(*p) : std::vector<std::shared_ptr<TextState>>{seed};
    auto locks = Impl::lock_all(ts);
    check_version(seed->doc, version_of(body));

    std::vector<AnnotatedDocument> docs;
    std::size_t seed_index = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] == seed) seed_index = i;
        docs.push_back(ts[i]->doc);
    }
    auto created = kgmark::propagate(docs, seed_index, mid, *p->ontology, scope);

    json versions = json::object();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (docs[i].version() == ts[i]->doc.version()) continue;
        impl_->commit(*p, *ts[i], std::move(docs[i]));
        versions[ts[i]->id] = ts[i]->doc.version();
    }
    json out = json::array();
    for (const auto& c : created)
        out.push_back({{"text_id", p->id + "." + c.doc_id}, {"markup", serial::to_json(c.markup)}});
    return json{{"created", out}, {"versions", versions}, {"version", seed->doc.version()}};
}

json Service::set_saved(const std::string& user, const std::string& id, const json& body)
{
    auto [p, t] = impl_->text(user, id);
    bool saved = field<bool>(body, "saved");
    std::lock_guard lock(t->mu);
    if (t->saved != saved) {
        impl_->persist_text(p->id, *t, t->doc, saved);
        t->saved = saved;
    }
    return json{{"saved", t->saved}, {"version", t->doc.version()}};
}

// ---- views ----------------------------------------------------------------------------

json Service::dashboard(const std::string& user, const std::string& id) const
{
    auto p = impl_->project(user, id);
    Counts total;
    std::size_t saved_n = 0;
    std::map<std::string, std::size_t> by_type;
    std::map<std::string, std::size_t> clusters;
    auto snap = impl_->snapshot(*p);
    for (const auto& [t, doc, saved] : snap) {
        total += counts(doc, *p->ontology);
        saved_n += saved;
        for (const auto& m : doc.markups()) ++by_type[m.name];
        if (doc.cluster_id()) ++clusters[std::to_string(*doc.cluster_id())];
    }
    return json{{"texts", snap.size()},
                {"saved", saved_n},
                {"counts", serial::to_json(total)},
                {"by_type", by_type},
                {"clusters", clusters},
                {"kb_entries", p->knowledge()->entries()->size()}};
}

json Service::graph(const std::string& user, const std::string& id, const std::string& quality) const
{
    auto p = impl_->project(user, id);
    const auto q = parse_quality(quality);

    struct Node {
        std::string type, label;
        bool accepted = false;
        std::size_t count = 0;
    };
    struct Edge {
        bool accepted = false;
        std::size_t count = 0;
    };
    std::vector<Node> nodes;
    std::map<std::pair<std::string, std::string>, std::size_t> node_index;
    std::map<std::tuple<std::size_t, std::string, std::size_t>, Edge> edges;
    std::vector<std::tuple<std::size_t, std::string, std::size_t>> edge_order;

    for (const auto& [t, full, saved] : impl_->snapshot(*p)) {
        auto doc = filtered(full, q);
        std::map<std::string, std::size_t> local;  // markup id -> node
        for (const auto& m : doc.markups()) {
            if (!m.is_entity) continue;
            auto key = std::make_pair(m.name, fold_case(*m.entity_text));
            auto [it, fresh] = node_index.emplace(key, nodes.size());
            if (fresh) nodes.push_back({m.name, *m.entity_text});
            auto& n = nodes[it->second];
            n.accepted = n.accepted || !m.suggested;
            ++n.count;
            local[m.id] = it->second;
        }
        for (const auto& m : doc.markups()) {
            if (m.is_entity) continue;
            auto key = std::make_tuple(local.at(*m.source), m.name, local.at(*m.target));
            auto [it, fresh] = edges.emplace(key, Edge{});
            if (fresh) edge_order.push_back(key);
            it->second.accepted = it->second.accepted || !m.suggested;
            ++it->second.count;
        }
    }
    json jn = json::array(), je = json::array();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        jn.push_back({{"id", "n" + std::to_string(i)},
                      {"type", nodes[i].type},
                      {"label", nodes[i].label},
                      {"quality", nodes[i].accepted ? "accepted" : "suggested"},
                      {"count", nodes[i].count}});
    for (const auto& key : edge_order) {
        const auto& e = edges.at(key);
        je.push_back({{"source", "n" + std::to_string(std::get<0>(key))},
                      {"target", "n" + std::to_string(std::get<2>(key))},
                      {"label", std::get<1>(key)},
                      {"quality", e.accepted ? "accepted" : "suggested"},
                      {"count", e.count}});
    }
    return json{{"nodes", jn}, {"edges", je}};
}

json Service::export_project(const std::string& user, const std::string& id, const std::string& quality,
                             bool saved_only) const
{
    auto p = impl_->project(user, id);
    const auto q = parse_quality(quality);
    json out = json::array();
    for (const auto& [t, full, saved] : impl_->snapshot(*p)) {
        if (saved_only && !saved) continue;
        auto doc = filtered(full, q);
        out.push_back(json{{"doc_id", t->local},
                           {"text", doc.text()},
                           {"tokens", serial::tokens_to_json(doc.tokens())},
                           {"markups", markups_json(doc.markups())},
                           {"triples", triples_json(doc, *p->ontology)},
                           {"cluster_id", doc.cluster_id() ? json(*doc.cluster_id()) : json(nullptr)},
                           {"saved", saved}});
    }
    return json{{"texts", out}};
}

json Service::import_texts(const std::string& user, const std::string& id, const json& payload)
{
    auto p = impl_->project(user, id);
    const auto& o = *p->ontology;
    std::lock_guard lock(p->mu);
    std::set<std::string> taken(p->texts.begin(), p->texts.end());

    std::vector<AnnotatedDocument> docs;
    std::vector<bool> saved;
    std::size_t index = 0;
    for (const auto& tj : field<json>(payload, "texts")) {
        const auto where = "texts[" + std::to_string(index++) + "]: ";
        auto local = field<std::string>(tj, "doc_id");
        if (!valid_local_id(local)) fail(ErrorCode::validation, where + "doc_id '" + local + "' is not a valid id");
        if (!taken.insert(local).second) fail(ErrorCode::conflict, where + "doc_id '" + local + "' already exists");

        std::vector<Markup> ms;
        for (const auto& mj : field_or<json>(tj, "markups", json::array())) {
            auto m = serial::markup_from_json(mj);
            const std::string* label_id = nullptr;
            if (m.is_entity) {
                if (const auto* e = o.find_entity(m.name)) label_id = &e->id;
            } else if (const auto* r = o.find_relation(m.name)) {
                label_id = &r->id;
            }
            if (!label_id || *label_id != m.label_id)
                fail(ErrorCode::validation, where + "markup " + m.id + " has label '" + m.name + "' (" + m.label_id +
                                                ") unknown to this project");
            ms.push_back(std::move(m));
        }
        AnnotatedDocument doc;
        try {
            doc = AnnotatedDocument::restore(local, field<std::string>(tj, "text"), p->config.language, std::move(ms), 0);
        } catch (const Error& e) {
            fail(ErrorCode::validation, where + e.what());
        }
        for (const auto& m : doc.markups()) {
            if (m.is_entity) continue;
            const auto* rel = o.find_relation(m.name);
            if (!o.relation_admits(*rel, doc.find(*m.source)->name, doc.find(*m.target)->name))
                fail(ErrorCode::validation, where + "relation " + m.id + " violates its type constraint");
        }
        if (tj.contains("tokens") && serial::tokens_to_json(doc.tokens()) != tj["tokens"])
            fail(ErrorCode::validation, where + "tokens do not match this project's tokenizer");
        if (tj.contains("cluster_id") && !tj["cluster_id"].is_null()) doc.set_cluster_id(field<int>(tj, "cluster_id"));
        saved.push_back(field_or<bool>(tj, "saved", false));
        docs.push_back(std::move(doc));
    }

    for (const auto& d : docs) {
        const auto& l = d.doc_id();
        if (l.size() > 1 && l[0] == 't' && l.find_first_not_of("0123456789", 1) == std::string::npos)
            p->next_seq = std::max<std::uint64_t>(p->next_seq, std::stoull(l.substr(1)) + 1);
    }
    auto created = impl_->add_documents(*p, std::move(docs), saved);
    if (p->model_update) {
        auto ts = impl_->now();
        auto base = p->knowledge();
        bool any = false;
        for (const auto& t : created) {
            std::lock_guard tl(t->mu);
            auto events = kb::diff_facts({}, kb::accepted_facts(t->doc), ts);
            any = any || !events.empty();
            base->ingest(events);
        }
        if (any) impl_->persist_kb(*p);
    }
    json ids = json::array();
    for (const auto& t : created) ids.push_back(t->id);
    return json{{"created", ids}};
}

json Service::knowledge_base(const std::string& user, const std::string& id) const
{
    auto p = impl_->project(user, id);
    return json::parse(p->knowledge()->dump());
}

json Service::load_knowledge_base(const std::string& user, const std::string& id, const json& dump)
{
    auto p = impl_->project(user, id);
    auto loaded = std::make_shared<kb::KnowledgeBase>(kb::KnowledgeBase::load(dump.dump()));
    if (loaded->project() != p->id) fail(ErrorCode::validation, "dump belongs to project '" + loaded->project() + "'");
    std::lock_guard lock(p->mu);
    auto locks = Impl::lock_all(impl_->texts_of(*p));
    std::atomic_store(&p->kb, loaded);
    impl_->persist_kb(*p);
    return json{{"entries", loaded->entries()->size()}};
}

} // namespace kgmark::api
