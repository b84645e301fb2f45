#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "fixtures.hpp"
#include "kgmark/error.hpp"
#include "kgmark/markup.hpp"
#include "kgmark/serialization.hpp"
#include "kgmark/service.hpp"
#include "service_fixtures.hpp"

using namespace kgmark;
using fixtures::Harness;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::parse;
}

std::string id_of(const json& add_result) { return add_result["markup"]["_id"].get<std::string>(); }

// Brute-force fact tally of accepted markups across a project, via its own export.
std::size_t accepted_org_apple(Harness& h, const std::string& pid)
{
    std::size_t n = 0;
    auto exported = h.service->export_project(h.user, pid, "accepted", false);
    for (const auto& t : exported["texts"])
        for (const auto& m : t["markups"])
            if (m["name"] == "ORG" && fold_case(m.value("entityText", "")) == "apple") ++n;
    return n;
}

} // namespace

TEST(Auth, RegisterLoginAuthenticate)
{
    Harness h;
    EXPECT_EQ(code_of([&] { h.service->register_user(json{{"name", "alice"}, {"password", "whatever1"}}); }),
              ErrorCode::conflict);
    EXPECT_EQ(code_of([&] { h.service->register_user(json{{"name", "bob"}, {"password", "short"}}); }),
              ErrorCode::validation);
    EXPECT_EQ(code_of([&] { h.service->login(json{{"name", "alice"}, {"password", "wrong password"}}); }),
              ErrorCode::unauthorized);
    auto token = h.service->login(json{{"name", "alice"}, {"password", "correct horse"}})["token"].get<std::string>();
    EXPECT_EQ(h.service->authenticate(token), "alice");
    EXPECT_EQ(code_of([&] { h.service->authenticate("nope"); }), ErrorCode::unauthorized);
    h.service->logout(token);
    EXPECT_EQ(code_of([&] { h.service->authenticate(token); }), ErrorCode::unauthorized);
}

TEST(Auth, PasswordsAreNotStoredInClear)
{
    Harness h;
    auto rec = h.store->get("users", "alice");
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->dump().find("correct horse"), std::string::npos);
}

TEST(Projects, WizardCreatesTextsAndOntology)
{
    Harness h;
    auto w = fixtures::ner_wizard({fixtures::james, "Hello  World", "hello  world"});
    w["config"]["preprocessing"] = {{"lowercase", false}, {"deduplicate", true}};
    auto r = h.service->create_project(h.user, w);
    auto pid = r["project"]["id"].get<std::string>();
    EXPECT_EQ(r["project"]["texts"], 3);
    auto p = h.service->get_project(h.user, pid);
    EXPECT_EQ(p["ontology"]["entity_types"].size(), 4u);
    EXPECT_EQ(p["type_list"], "[PER, LOC, ORG, MISC]");

    auto w2 = w;
    w2["config"]["preprocessing"]["lowercase"] = true;
    auto r2 = h.service->create_project(h.user, w2);
    EXPECT_EQ(r2["project"]["texts"], 2);
    EXPECT_EQ(r2["preprocess"]["duplicates"], json::array({2}));
}

TEST(Projects, WizardValidation)
{
    Harness h;
    auto bad = fixtures::wizard("re", {"x"}, {"Organization"}, {"person-company@[Person, Organization]"});
    EXPECT_EQ(code_of([&] { h.service->create_project(h.user, bad); }), ErrorCode::validation);
    auto bad_line = fixtures::wizard("re", {"x"}, {"Person"}, {"broken@[Person]"});
    EXPECT_EQ(code_of([&] { h.service->create_project(h.user, bad_line); }), ErrorCode::parse);
    EXPECT_EQ(code_of([&] { h.service->create_project(h.user, json{{"config", json::object()}}); }),
              ErrorCode::validation);
    EXPECT_TRUE(h.service->list_projects(h.user).empty());
}

TEST(Projects, ReviewSummaryIsDryRun)
{
    Harness h;
    auto r = h.service->review(h.user, fixtures::ee_wizard({fixtures::marry}));
    EXPECT_EQ(r["summary"]["entity_types"], 2);
    EXPECT_EQ(r["summary"]["relation_types"], 3);
    EXPECT_TRUE(h.service->list_projects(h.user).empty());
}

TEST(Projects, UploadFormatsAndClustering)
{
    Harness h;
    auto w = fixtures::ner_wizard({});
    w["input"] = {{"format", "lines"}, {"content", "stock market rally\n\nmarket stocks rallying\r\nrainfall in Tokyo\n"}};
    w["config"]["clustering"] = true;
    auto pid = h.create(w);
    auto texts = h.service->list_texts(h.user, pid, std::nullopt);
    ASSERT_EQ(texts.size(), 3u);
    EXPECT_EQ(texts[0]["cluster_id"], texts[1]["cluster_id"]);
    EXPECT_NE(texts[0]["cluster_id"], texts[2]["cluster_id"]);
    EXPECT_EQ(h.service->list_texts(h.user, pid, texts[2]["cluster_id"].get<int>()).size(), 1u);

    auto added = h.service->add_texts(h.user, pid, json{{"format", "json"}, {"content", "[\"rain in Tokyo\"]"}});
    EXPECT_EQ(added["created"], json::array({pid + ".t4"}));
    EXPECT_FALSE(h.text(pid, 4)["cluster_id"].is_null());

    h.service->update_settings(h.user, pid, json{{"clustering", false}});
    EXPECT_TRUE(h.text(pid, 1)["cluster_id"].is_null());
}

TEST(Projects, MembershipGuardsAccess)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    h.service->register_user(json{{"name", "bob"}, {"password", "bob password"}});
    EXPECT_EQ(code_of([&] { h.service->get_project("bob", pid); }), ErrorCode::not_found);
    EXPECT_EQ(code_of([&] { h.service->get_text("bob", pid + ".t1"); }), ErrorCode::not_found);
    EXPECT_TRUE(h.service->list_projects("bob").empty());
    h.service->add_member(h.user, pid, json{{"name", "bob"}});
    EXPECT_NO_THROW(h.service->get_text("bob", pid + ".t1"));
    EXPECT_EQ(code_of([&] { h.service->add_member(h.user, pid, json{{"name", "carol"}}); }), ErrorCode::not_found);
}

TEST(Markups, TransitionBumpsVersion)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    auto tid = pid + ".t1";
    auto m = h.mark(tid, "ORG", 3, 3, true);
    EXPECT_EQ(m["version"], 1);
    auto r = h.service->transition(h.user, tid + "." + id_of(m), json{{"action", "accept"}, {"version", 1}});
    EXPECT_EQ(r["version"], 2);
    EXPECT_EQ(r["accepted"], json::array({id_of(m)}));
    EXPECT_FALSE(h.text(pid, 1)["markups"][0]["suggested"].get<bool>());
}

TEST(Markups, StaleVersionChangesNothing)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    auto tid = pid + ".t1";
    auto m = h.mark(tid, "ORG", 3, 3, true);
    auto before = h.service->get_text(h.user, tid).dump();
    auto stored = h.store->get("texts", tid)->dump();
    EXPECT_EQ(code_of([&] {
                  h.service->transition(h.user, tid + "." + id_of(m), json{{"action", "delete"}, {"version", 0}});
              }),
              ErrorCode::conflict);
    EXPECT_EQ(code_of([&] {
                  h.service->add_markup(h.user, tid,
                                        json{{"label", "PER"}, {"start", 0}, {"end", 0}, {"version", 7}});
              }),
              ErrorCode::conflict);
    EXPECT_EQ(h.service->get_text(h.user, tid).dump(), before);
    EXPECT_EQ(h.store->get("texts", tid)->dump(), stored);
}

TEST(Markups, ConstraintViolationIsValidation)
{
    Harness h;
    auto pid = h.create(fixtures::wizard("re", {fixtures::johnson}, {"Person", "Organization"},
                                         {"person-company@[Person, Organization]"}));
    auto tid = pid + ".t1";
    auto a = id_of(h.mark(tid, "Person", 0, 0));
    auto b = id_of(h.mark(tid, "Person", 13, 14));
    EXPECT_EQ(code_of([&] { h.link(tid, "person-company", a, b); }), ErrorCode::validation);
    EXPECT_EQ(h.text(pid, 1)["version"], 2);
}

TEST(Markups, PropagateAcrossProject)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({"I use google daily", "Google is big", "GOOGLE!", "nothing"}));
    auto seed = h.mark(pid + ".t2", "ORG", 0, 0);
    auto r = h.service->propagate(h.user, pid + ".t2." + id_of(seed), json{{"scope", "project"}});
    EXPECT_EQ(r["created"].size(), 2u);
    EXPECT_EQ(r["versions"].size(), 2u);
    EXPECT_EQ(r["version"], 1);  // the seed document itself gained nothing
    EXPECT_TRUE(h.text(pid, 4)["markups"].empty());
    EXPECT_TRUE(h.text(pid, 1)["markups"][0]["suggested"].get<bool>());
}

TEST(Autolabel, SuggestsMarkups)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    auto r = h.service->autolabel(h.user, pid + ".t1", json::object());
    EXPECT_EQ(r["created"].size(), 4u);
    EXPECT_EQ(r["version"], 1);
    auto doc = h.text(pid, 1);
    for (const auto& m : doc["markups"]) EXPECT_TRUE(m["suggested"].get<bool>());
}

TEST(Autolabel, UnavailableLeavesDocument)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    h.mark(pid + ".t1", "PER", 0, 0);
    auto before = h.service->get_text(h.user, pid + ".t1").dump();
    h.gen->set_unavailable(true);
    EXPECT_EQ(code_of([&] { h.service->autolabel(h.user, pid + ".t1", json::object()); }), ErrorCode::unavailable);
    EXPECT_EQ(h.service->get_text(h.user, pid + ".t1").dump(), before);
}

TEST(Autolabel, AppleLearnability)
{
    Harness h("apple_mock.json");
    auto pid = h.create(fixtures::ner_wizard(
        {"The middle class likes using Apple.", "New Yorker really like Apple phones.", "Apple opened a store."}));
    auto first = h.service->autolabel(h.user, pid + ".t1", json::object());
    EXPECT_TRUE(first["created"].empty());
    EXPECT_EQ(first["prefix"], "");

    h.mark(pid + ".t2", "ORG", 4, 4);
    h.mark(pid + ".t3", "ORG", 0, 0);
    EXPECT_EQ(accepted_org_apple(h, pid), 2u);
    EXPECT_EQ(h.service->dashboard(h.user, pid)["kb_entries"], 1);

    auto second = h.service->autolabel(h.user, pid + ".t1", json::object());
    EXPECT_EQ(second["prefix"], "Note: the type of Apple is ORG;");
    ASSERT_EQ(second["created"].size(), 1u);
    EXPECT_EQ(second["created"][0]["name"], "ORG");
    EXPECT_EQ(second["created"][0]["entityText"], "Apple");
    EXPECT_TRUE(second["created"][0]["suggested"].get<bool>());
}

TEST(KnowledgeBase, DeletionAndToggle)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({"Apple one", "Apple two"}));
    auto a = h.mark(pid + ".t1", "ORG", 0, 0);
    h.mark(pid + ".t2", "ORG", 0, 0);
    EXPECT_EQ(h.service->dashboard(h.user, pid)["kb_entries"], 1);
    h.service->transition(h.user, pid + ".t1." + id_of(a), json{{"action", "delete"}});
    EXPECT_EQ(h.service->dashboard(h.user, pid)["kb_entries"], 0);

    h.service->update_settings(h.user, pid, json{{"model_update", false}});
    h.mark(pid + ".t1", "ORG", 0, 0);
    EXPECT_EQ(h.service->dashboard(h.user, pid)["kb_entries"], 0);  // frozen
    h.service->update_settings(h.user, pid, json{{"model_update", true}});
    EXPECT_EQ(h.service->dashboard(h.user, pid)["kb_entries"], 1);  // rebuilt

    auto dump = h.service->knowledge_base(h.user, pid);
    EXPECT_EQ(dump["format"], "kgmark-kb");
    EXPECT_EQ(h.service->load_knowledge_base(h.user, pid, dump)["entries"], 1);
}

TEST(Export, EmptyProject)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({}));
    EXPECT_EQ(h.service->export_project(h.user, pid, "all", false), json::parse(R"({"texts": []})"));
}

TEST(Export, NerExampleHasFourMarkupsAndTriples)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    auto tid = pid + ".t1";
    h.mark(tid, "PER", 0, 0);
    h.mark(tid, "ORG", 3, 3);
    h.mark(tid, "LOC", 5, 5);
    h.mark(tid, "LOC", 10, 10);
    auto e = h.service->export_project(h.user, pid, "all", false)["texts"][0];
    EXPECT_EQ(e["markups"].size(), 4u);
    ASSERT_EQ(e["triples"].size(), 4u);
    EXPECT_EQ(e["triples"][0]["subject"], "James");
    EXPECT_EQ(e["triples"][0]["relation"], "_");
    EXPECT_EQ(e["triples"][0]["object"], "_");
    const std::set<std::string> names{"isEntity", "suggested", "_id", "name", "labelId", "start", "end", "entityText"};
    for (const auto& m : e["markups"]) {
        std::set<std::string> keys;
        for (const auto& [k, _] : m.items()) keys.insert(k);
        EXPECT_EQ(keys, names);
    }
}

TEST(Export, QualityFilter)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({fixtures::james}));
    auto tid = pid + ".t1";
    h.mark(tid, "PER", 0, 0);
    h.mark(tid, "ORG", 3, 3);
    h.mark(tid, "LOC", 5, 5, true);
    h.mark(tid, "LOC", 10, 10, true);
    h.mark(tid, "MISC", 8, 8, true);
    EXPECT_EQ(h.service->export_project(h.user, pid, "accepted", false)["texts"][0]["markups"].size(), 2u);
    EXPECT_EQ(h.service->export_project(h.user, pid, "suggested", false)["texts"][0]["markups"].size(), 3u);
    EXPECT_EQ(code_of([&] { h.service->export_project(h.user, pid, "best", false); }), ErrorCode::validation);
    EXPECT_TRUE(h.service->export_project(h.user, pid, "all", true)["texts"].empty());
    h.service->set_saved(h.user, tid, json{{"saved", true}});
    EXPECT_EQ(h.service->export_project(h.user, pid, "all", true)["texts"].size(), 1u);
}

TEST(Export, RoundTripIsByteIdentical)
{
    Harness h;
    auto pid = h.create(fixtures::ee_wizard({fixtures::marry, "Nothing happened."}));
    h.service->autolabel(h.user, pid + ".t1", json::object());
    auto text = h.text(pid, 1);
    h.service->transition(h.user, pid + ".t1." + text["markups"][0]["_id"].get<std::string>(), json{{"action", "accept"}});
    h.service->set_saved(h.user, pid + ".t2", json{{"saved", true}});
    auto first = h.service->export_project(h.user, pid, "all", false);

    auto fresh = h.create(fixtures::ee_wizard({}));
    h.service->import_texts(h.user, fresh, first);
    auto second = h.service->export_project(h.user, fresh, "all", false);
    EXPECT_EQ(first.dump(2), second.dump(2));
    EXPECT_EQ(code_of([&] { h.service->import_texts(h.user, fresh, first); }), ErrorCode::conflict);
}

TEST(Export, ImportValidates)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({}));
    auto bad_label = json::parse(R"({"texts": [{"doc_id": "x", "text": "James", "markups": [
        {"isEntity": true, "suggested": false, "_id": "m1", "name": "ANIMAL", "labelId": "E.ANIMAL",
         "start": 0, "end": 0, "entityText": "James"}]}]})");
    EXPECT_EQ(code_of([&] { h.service->import_texts(h.user, pid, bad_label); }), ErrorCode::validation);
    auto bad_text = json::parse(R"({"texts": [{"doc_id": "x", "text": "James", "markups": [
        {"isEntity": true, "suggested": false, "_id": "m1", "name": "PER", "labelId": "E.PER",
         "start": 0, "end": 0, "entityText": "Jim"}]}]})");
    EXPECT_EQ(code_of([&] { h.service->import_texts(h.user, pid, bad_text); }), ErrorCode::validation);
    EXPECT_TRUE(h.service->list_texts(h.user, pid, std::nullopt).empty());
}

TEST(Graph, MarryExample)
{
    Harness h;
    auto pid = h.create(fixtures::ee_wizard({fixtures::marry}));
    h.service->autolabel(h.user, pid + ".t1", json::object());
    auto g = h.service->graph(h.user, pid, "all");
    EXPECT_EQ(g["nodes"].size(), 4u);
    EXPECT_EQ(g["edges"].size(), 3u);
    std::set<std::string> roles;
    for (const auto& e : g["edges"]) roles.insert(e["label"].get<std::string>());
    EXPECT_EQ(roles, (std::set<std::string>{"Person", "Time", "Place"}));
    EXPECT_TRUE(h.service->graph(h.user, pid, "accepted")["nodes"].empty());
}

TEST(Graph, MergesNodesAcrossDocuments)
{
    Harness h;
    auto pid = h.create(fixtures::ner_wizard({"Google grows", "google shrinks"}));
    EXPECT_TRUE(h.service->graph(h.user, pid, "all")["nodes"].empty());
    h.mark(pid + ".t1", "ORG", 0, 0);
    h.mark(pid + ".t2", "ORG", 0, 0);
    auto g = h.service->graph(h.user, pid, "accepted");
    ASSERT_EQ(g["nodes"].size(), 1u);
    EXPECT_EQ(g["nodes"][0]["count"], 2);
    EXPECT_EQ(g["nodes"][0]["quality"], "accepted");
}

TEST(Dashboard, MatchesRecount)
{
    Harness h;
    auto pid = h.create(fixtures::ee_wizard({fixtures::marry, fixtures::marry}));
    h.service->autolabel(h.user, pid + ".t1", json::object());
    auto d = h.service->dashboard(h.user, pid);
    Counts c;
    auto o = serial::ontology_from_json(h.service->get_project(h.user, pid)["ontology"]);
    auto exported = h.service->export_project(h.user, pid, "all", false);
    for (const auto& t : exported["texts"]) {
        std::vector<Markup> ms;
        for (const auto& m : t["markups"]) ms.push_back(serial::markup_from_json(m));
        c += counts(AnnotatedDocument::restore("x", t["text"], Language::en, ms, 0), o);
    }
    EXPECT_EQ(d["counts"], serial::to_json(c));
    EXPECT_EQ(d["counts"]["triples"], 3);
    EXPECT_EQ(d["texts"], 2);
}

TEST(Persistence, FileStoreSurvivesRestart)
{
    auto dir = std::filesystem::temp_directory_path() / ("kgmark-test-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    api::ServiceOptions opts;
    opts.pbkdf2_iterations = 1000;
    std::string token, pid;
    json exported;
    {
        api::Service s(std::make_shared<api::FileStore>(dir), nullptr, opts);
        s.register_user(json{{"name", "alice"}, {"password", "correct horse"}});
        token = s.login(json{{"name", "alice"}, {"password", "correct horse"}})["token"];
        pid = s.create_project("alice", fixtures::ner_wizard({"Apple a", "Apple b"}))["project"]["id"];
        s.add_markup("alice", pid + ".t1", json{{"label", "ORG"}, {"start", 0}, {"end", 0}});
        s.add_markup("alice", pid + ".t2", json{{"label", "ORG"}, {"start", 0}, {"end", 0}});
        exported = s.export_project("alice", pid, "all", false);
    }
    api::Service s(std::make_shared<api::FileStore>(dir), nullptr, opts);
    EXPECT_EQ(s.authenticate(token), "alice");
    EXPECT_EQ(s.export_project("alice", pid, "all", false), exported);
    EXPECT_EQ(s.dashboard("alice", pid)["kb_entries"], 1);
    auto next = s.create_project("alice", fixtures::ner_wizard({}));
    EXPECT_NE(next["project"]["id"], pid);
    EXPECT_EQ(code_of([&] { s.autolabel("alice", pid + ".t1", json::object()); }), ErrorCode::unavailable);
    std::filesystem::remove_all(dir);
}
