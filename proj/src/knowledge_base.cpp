#include "kgmark/knowledge_base.hpp"

#include <algorithm>
#include <atomic>
#include <set>

#include "json.hpp"
#include "kgmark/error.hpp"

namespace kgmark::kb {

using nlohmann::json;

namespace {

const std::set<std::string> english_stopwords = {
    "a",    "an",    "the",  "and",   "or",    "but",   "of",    "in",   "on",    "at",   "to",  "for",
    "with", "by",    "from", "as",    "is",    "are",   "was",   "were", "be",    "been", "it",  "its",
    "this", "that",  "these", "those", "he",   "she",   "they",  "we",   "you",   "i",    "his", "her",
    "their", "our",  "my",   "me",    "him",   "them",  "not",   "no",   "so",    "if",   "then", "there",
    "here", "who",   "what", "which", "when",  "where", "how",   "do",   "does",  "did",  "has", "have",
    "had",  "will",  "would", "can",  "could", "should", "may",  "might", "also", "very", "all", "any"};

const std::set<std::string> chinese_stopwords = {"的", "了", "是", "在", "和", "与", "及", "或", "也", "就", "都",
                                                 "而", "这", "那", "他", "她", "它", "我", "你", "们", "我们",
                                                 "他们", "你们", "一个", "这个", "那个", "什么", "没有"};

const char* kind_name(FactKind k) { return k == FactKind::entity ? "entity" : "relation"; }

FactKind parse_kind(const std::string& s)
{
    if (s == "entity") return FactKind::entity;
    if (s == "relation") return FactKind::relation;
    fail(ErrorCode::parse, "unknown fact kind '" + s + "'");
}

} // namespace

KnowledgeBase::KnowledgeBase(std::string project, Language lang, std::size_t threshold)
    : project_(std::move(project)), lang_(lang), threshold_(std::max<std::size_t>(threshold, 1)),
      snapshot_(std::make_shared<const std::vector<KnowledgeEntry>>())
{
}

KnowledgeBase::Key KnowledgeBase::key_of(const Fact& f)
{
    std::vector<std::string> folded;
    for (const auto& s : f.surfaces) folded.push_back(fold_case(trim(s)));
    return {f.kind, f.label, folded};
}

bool KnowledgeBase::informative(const Fact& fact) const
{
    if (fact.surfaces.empty()) return false;
    for (const auto& raw : fact.surfaces) {
        auto s = trim(raw);
        if (utf8_length(s) <= 1) return false;
        auto f = fold_case(s);
        if (english_stopwords.count(f) || chinese_stopwords.count(f)) return false;
    }
    return true;
}

void KnowledgeBase::ingest(const FactEvent& event) { ingest(std::span<const FactEvent>(&event, 1)); }

void KnowledgeBase::ingest(std::span<const FactEvent> events)
{
    std::lock_guard lock(mu_);
    bool changed = false;
    for (const auto& e : events) {
        if (!informative(e.fact)) continue;
        auto k = key_of(e.fact);
        if (e.change == FactEvent::Change::added) {
            auto [it, inserted] = tallies_.try_emplace(k);
            if (inserted) it->second.display = e.fact;
            ++it->second.count;
            it->second.last_seen = std::max(it->second.last_seen, e.timestamp);
            changed = true;
        } else {
            auto it = tallies_.find(k);
            if (it == tallies_.end()) continue;
            if (--it->second.count == 0) tallies_.erase(it);
            changed = true;
        }
    }
    if (changed) publish();
}

void KnowledgeBase::clear()
{
    std::lock_guard lock(mu_);
    tallies_.clear();
    publish();
}

void KnowledgeBase::publish()
{
    auto next = std::make_shared<std::vector<KnowledgeEntry>>();
    for (const auto& [k, t] : tallies_)
        if (t.count >= threshold_) next->push_back({t.display, t.count, t.last_seen, project_});
    std::atomic_store(&snapshot_, std::shared_ptr<const std::vector<KnowledgeEntry>>(std::move(next)));
}

std::shared_ptr<const std::vector<KnowledgeEntry>> KnowledgeBase::entries() const
{
    return std::atomic_load(&snapshot_);
}

std::size_t KnowledgeBase::tally(const Fact& fact) const
{
    std::lock_guard lock(mu_);
    auto it = tallies_.find(key_of(fact));
    return it == tallies_.end() ? 0 : it->second.count;
}

std::string KnowledgeBase::dump() const
{
    std::lock_guard lock(mu_);
    json tallies = json::array();
    for (const auto& [k, t] : tallies_) {
        tallies.push_back({{"kind", kind_name(t.display.kind)},
                           {"label", t.display.label},
                           {"surfaces", t.display.surfaces},
                           {"count", t.count},
                           {"last_seen", t.last_seen}});
    }
    json j{{"format", "kgmark-kb"},  {"version", 1},         {"project", project_},
           {"language", to_string(lang_)}, {"threshold", threshold_}, {"tallies", tallies}};
    return j.dump(2);
}

KnowledgeBase KnowledgeBase::load(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("knowledge base dump: ") + e.what());
    }
    if (j.value("format", "") != "kgmark-kb" || j.value("version", 0) != 1)
        fail(ErrorCode::parse, "not a version-1 knowledge base dump");
    KnowledgeBase kb(j.at("project").get<std::string>(), parse_language(j.at("language").get<std::string>()),
                     j.at("threshold").get<std::size_t>());
    for (const auto& t : j.at("tallies")) {
        Fact f{parse_kind(t.at("kind").get<std::string>()), t.at("label").get<std::string>(),
               t.at("surfaces").get<std::vector<std::string>>()};
        Tally tally{f, t.at("count").get<std::size_t>(), t.at("last_seen").get<std::int64_t>()};
        if (tally.count > 0) kb.tallies_[key_of(f)] = tally;
    }
    std::lock_guard lock(kb.mu_);
    kb.publish();
    return kb;
}

std::string render_entry(const KnowledgeEntry& e)
{
    const auto& f = e.fact;
    if (f.kind == FactKind::entity) return "the type of " + f.surfaces.at(0) + " is " + f.label + ";";
    return "the relation between " + f.surfaces.at(0) + " and " + f.surfaces.at(1) + " is " + f.label + ";";
}

std::string generate_prefix(std::string_view text, Language lang, std::span<const KnowledgeEntry> entries,
                            std::size_t budget)
{
    auto tokens = tokenize(text, lang);
    std::vector<std::pair<const KnowledgeEntry*, std::string>> hits;
    for (const auto& e : entries) {
        bool all = !e.fact.surfaces.empty();
        for (const auto& s : e.fact.surfaces) {
            if (find_occurrences(text, tokens, trim(s)).empty()) {
                all = false;
                break;
            }
        }
        if (all) hits.emplace_back(&e, render_entry(e));
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.first->count != b.first->count) return a.first->count > b.first->count;
        if (a.first->last_seen != b.first->last_seen) return a.first->last_seen > b.first->last_seen;
        return a.second < b.second;
    });

    std::string out = "Note: ";
    std::size_t used = 0;
    for (const auto& [e, rendered] : hits) {
        std::string candidate = used ? out + " " + rendered : out + rendered;
        if (utf8_length(candidate) > budget) break;
        out = std::move(candidate);
        ++used;
    }
    return used ? out : std::string{};
}

std::map<std::string, Fact> accepted_facts(const AnnotatedDocument& doc)
{
    std::map<std::string, Fact> out;
    for (const auto& m : doc.markups()) {
        if (m.suggested) continue;
        if (m.is_entity) {
            out[m.id] = Fact{FactKind::entity, m.name, {*m.entity_text}};
        } else {
            out[m.id] = Fact{FactKind::relation, m.name, {doc.surface_of(*m.source), doc.surface_of(*m.target)}};
        }
    }
    return out;
}

std::vector<FactEvent> diff_facts(const std::map<std::string, Fact>& before, const std::map<std::string, Fact>& after,
                                  std::int64_t timestamp)
{
    std::vector<FactEvent> out;
    for (const auto& [id, f] : before) {
        auto it = after.find(id);
        if (it == after.end() || !(it->second == f)) out.push_back({FactEvent::Change::removed, f, timestamp});
    }
    for (const auto& [id, f] : after) {
        auto it = before.find(id);
        if (it == before.end() || !(it->second == f)) out.push_back({FactEvent::Change::added, f, timestamp});
    }
    return out;
}

} // namespace kgmark::kb
