#include "kgmark/markup.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <tuple>

#include "kgmark/error.hpp"

namespace kgmark {

class MarkupEditor {
public:
    static Markup& insert(AnnotatedDocument& doc, Markup m)
    {
        m.id = "m" + std::to_string(doc.next_seq_++);
        doc.markups_.push_back(std::move(m));
        return doc.markups_.back();
    }
    static std::vector<Markup>& markups(AnnotatedDocument& doc) { return doc.markups_; }
    static void bump(AnnotatedDocument& doc) { ++doc.version_; }
};

namespace {

std::optional<std::uint64_t> id_seq(std::string_view id)
{
    if (id.size() < 2 || id[0] != 'm') return std::nullopt;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), v);
    if (ec != std::errc{} || p != id.data() + id.size()) return std::nullopt;
    return v;
}

const Markup* find_entity_at(const AnnotatedDocument& doc, const std::string& label_id, int start, int end)
{
    for (const auto& m : doc.markups())
        if (m.is_entity && m.label_id == label_id && m.start == start && m.end == end) return &m;
    return nullptr;
}

const Markup* find_relation(const AnnotatedDocument& doc, const std::string& label_id, const std::string& source,
                            const std::string& target)
{
    for (const auto& m : doc.markups())
        if (!m.is_entity && m.label_id == label_id && m.source == source && m.target == target) return &m;
    return nullptr;
}

const EntityTypeDef& require_entity_type(const Ontology& o, const std::string& label)
{
    const auto* def = o.find_entity(label);
    if (!def) fail(ErrorCode::validation, "unknown entity type '" + label + "'");
    return *def;
}

const RelationTypeDef& require_relation_type(const Ontology& o, const std::string& label)
{
    const auto* def = o.find_relation(label);
    if (!def) fail(ErrorCode::validation, "unknown relation type '" + label + "'");
    return *def;
}

// Validates and inserts without touching the version.
AddResult insert_entity(AnnotatedDocument& doc, const Ontology& o, const EntityDraft& d, MarkupState state)
{
    const auto& def = require_entity_type(o, d.label);
    if (d.start < 0 || d.end < d.start || static_cast<std::size_t>(d.end) >= doc.tokens().size())
        fail(ErrorCode::validation, "span [" + std::to_string(d.start) + ", " + std::to_string(d.end) +
                                        "] is out of range");
    if (const auto* dup = find_entity_at(doc, def.id, d.start, d.end)) return {*dup, false};
    Markup m;
    m.is_entity = true;
    m.suggested = state == MarkupState::suggested;
    m.name = def.name;
    m.label_id = def.id;
    m.start = d.start;
    m.end = d.end;
    m.entity_text = span_text(doc.text(), doc.tokens(), d.start, d.end);
    return {MarkupEditor::insert(doc, std::move(m)), true};
}

AddResult insert_relation(AnnotatedDocument& doc, const Ontology& o, const RelationDraft& d, MarkupState state)
{
    const auto& def = require_relation_type(o, d.label);
    const auto* s = doc.find(d.source);
    const auto* t = doc.find(d.target);
    if (!s || !s->is_entity) fail(ErrorCode::validation, "relation source '" + d.source + "' is not an entity markup");
    if (!t || !t->is_entity) fail(ErrorCode::validation, "relation target '" + d.target + "' is not an entity markup");
    if (!o.relation_admits(def, s->name, t->name))
        fail(ErrorCode::validation, "relation constraint violated: '" + def.name + "' does not hold between '" +
                                        s->name + "' and '" + t->name + "'");
    if (const auto* dup = find_relation(doc, def.id, d.source, d.target)) return {*dup, false};
    Markup m;
    m.is_entity = false;
    m.suggested = state == MarkupState::suggested;
    m.name = def.name;
    m.label_id = def.id;
    m.source = d.source;
    m.target = d.target;
    return {MarkupEditor::insert(doc, std::move(m)), true};
}

using Signature = std::tuple<bool, std::string, std::string, std::string, std::string, std::string>;

Signature signature(const AnnotatedDocument& doc, const Markup& m)
{
    if (m.is_entity) return {true, m.label_id, fold_case(m.entity_text.value_or("")), {}, {}, {}};
    const auto* s = doc.find(*m.source);
    const auto* t = doc.find(*m.target);
    return {false,
            m.label_id,
            s ? s->label_id : std::string{},
            fold_case(doc.surface_of(*m.source)),
            t ? t->label_id : std::string{},
            fold_case(doc.surface_of(*m.target))};
}

// The removal set grown by cascading to relations touching removed entities.
std::set<std::string> with_cascade(const AnnotatedDocument& doc, std::set<std::string> ids)
{
    for (const auto& m : doc.markups()) {
        if (!m.is_entity && (ids.count(*m.source) || ids.count(*m.target))) ids.insert(m.id);
    }
    return ids;
}

} // namespace

AnnotatedDocument::AnnotatedDocument(std::string doc_id, std::string text, Language lang)
    : doc_id_(std::move(doc_id)), text_(std::move(text)), language_(lang), tokens_(tokenize(text_, lang))
{
}

const Markup* AnnotatedDocument::find(std::string_view id) const
{
    auto it = std::find_if(markups_.begin(), markups_.end(), [&](const Markup& m) { return m.id == id; });
    return it == markups_.end() ? nullptr : &*it;
}

std::string AnnotatedDocument::surface_of(std::string_view id) const
{
    const auto* m = find(id);
    return (m && m->is_entity) ? m->entity_text.value_or("") : std::string{};
}

AnnotatedDocument AnnotatedDocument::restore(std::string doc_id, std::string text, Language lang,
                                             std::vector<Markup> markups, std::uint64_t version)
{
    AnnotatedDocument doc(std::move(doc_id), std::move(text), lang);
    doc.markups_ = std::move(markups);
    doc.version_ = version;
    for (const auto& m : doc.markups_) {
        auto seq = id_seq(m.id);
        if (!seq) fail(ErrorCode::validation, "markup id '" + m.id + "' is not of the form m<number>");
        doc.next_seq_ = std::max(doc.next_seq_, *seq + 1);
    }
    if (auto problem = check_integrity(doc); !problem.empty()) fail(ErrorCode::validation, problem);
    return doc;
}

void check_version(const AnnotatedDocument& doc, std::optional<std::uint64_t> expected)
{
    if (expected && *expected != doc.version())
        fail(ErrorCode::conflict, "document '" + doc.doc_id() + "' is at version " + std::to_string(doc.version()) +
                                      ", request was based on " + std::to_string(*expected));
}

AddResult add_markup(AnnotatedDocument& doc, const Ontology& o, const EntityDraft& draft, MarkupState state)
{
    auto r = insert_entity(doc, o, draft, state);
    if (r.created) MarkupEditor::bump(doc);
    return r;
}

AddResult add_markup(AnnotatedDocument& doc, const Ontology& o, const RelationDraft& draft, MarkupState state)
{
    auto r = insert_relation(doc, o, draft, state);
    if (r.created) MarkupEditor::bump(doc);
    return r;
}

AddResult MarkupBatch::add(const Ontology& o, const EntityDraft& draft, MarkupState state)
{
    auto r = insert_entity(work_, o, draft, state);
    changed_ |= r.created;
    return r;
}

AddResult MarkupBatch::add(const Ontology& o, const RelationDraft& draft, MarkupState state)
{
    auto r = insert_relation(work_, o, draft, state);
    changed_ |= r.created;
    return r;
}

bool MarkupBatch::commit()
{
    if (!changed_) return false;
    MarkupEditor::bump(work_);
    target_ = std::move(work_);
    changed_ = false;
    return true;
}

TransitionAction parse_action(std::string_view s)
{
    if (s == "accept") return TransitionAction::accept;
    if (s == "delete") return TransitionAction::remove;
    if (s == "accept_all") return TransitionAction::accept_all;
    if (s == "delete_all") return TransitionAction::remove_all;
    fail(ErrorCode::validation, "unknown action '" + std::string(s) + "'");
}

MutationSummary transition(AnnotatedDocument& doc, std::string_view markup_id, TransitionAction action)
{
    const auto* target = doc.find(markup_id);
    if (!target) fail(ErrorCode::not_found, "no markup '" + std::string(markup_id) + "' in document '" + doc.doc_id() + "'");

    MutationSummary summary;
    auto& ms = MarkupEditor::markups(doc);

    if (action == TransitionAction::accept || action == TransitionAction::accept_all) {
        if (!target->suggested) fail(ErrorCode::validation, "markup '" + target->id + "' is already accepted");
        std::set<std::string> ids{target->id};
        if (action == TransitionAction::accept_all) {
            auto sig = signature(doc, *target);
            for (const auto& m : ms)
                if (m.suggested && signature(doc, m) == sig) ids.insert(m.id);
        }
        for (auto& m : ms) {
            if (ids.count(m.id)) {
                m.suggested = false;
                summary.accepted.push_back(m.id);
            }
        }
    } else {
        std::set<std::string> ids{target->id};
        if (action == TransitionAction::remove_all) {
            auto sig = signature(doc, *target);
            for (const auto& m : ms)
                if (signature(doc, m) == sig) ids.insert(m.id);
        }
        ids = with_cascade(doc, std::move(ids));
        std::vector<Markup> kept;
        kept.reserve(ms.size());
        for (auto& m : ms) {
            if (ids.count(m.id)) summary.deleted.push_back(m.id);
            else kept.push_back(std::move(m));
        }
        ms = std::move(kept);
    }
    MarkupEditor::bump(doc);
    summary.version = doc.version();
    return summary;
}

std::vector<CreatedMarkup> propagate_entity(std::span<AnnotatedDocument> docs, const Ontology& o,
                                            const std::string& label, const std::string& surface)
{
    require_entity_type(o, label);
    std::vector<CreatedMarkup> out;
    auto needle = trim(surface);
    if (needle.empty()) return out;
    for (auto& doc : docs) {
        bool touched = false;
        for (auto [s, e] : find_occurrences(doc.text(), doc.tokens(), needle)) {
            auto r = insert_entity(doc, o, {label, s, e}, MarkupState::suggested);
            if (r.created) {
                out.push_back({doc.doc_id(), r.markup});
                touched = true;
            }
        }
        if (touched) MarkupEditor::bump(doc);
    }
    return out;
}

namespace {

struct Endpoint {
    std::string id;
    std::optional<TokenSpan> to_create;
};

std::optional<Endpoint> locate_endpoint(const AnnotatedDocument& doc, const EntityTypeDef& def,
                                        const std::string& surface)
{
    // prefer an existing markup of the same label and surface, leftmost first
    const Markup* best = nullptr;
    for (const auto& m : doc.markups()) {
        if (m.is_entity && m.label_id == def.id && iequals(m.entity_text.value_or(""), surface)) {
            if (!best || *m.start < *best->start) best = &m;
        }
    }
    if (best) return Endpoint{best->id, std::nullopt};
    auto occ = find_occurrences(doc.text(), doc.tokens(), surface);
    if (occ.empty()) return std::nullopt;
    return Endpoint{{}, occ.front()};
}

} // namespace

std::vector<CreatedMarkup> propagate_relation(std::span<AnnotatedDocument> docs, const Ontology& o,
                                              const std::string& label, const std::string& subject_label,
                                              const std::string& subject_surface, const std::string& object_label,
                                              const std::string& object_surface)
{
    const auto& rel = require_relation_type(o, label);
    const auto& sdef = require_entity_type(o, subject_label);
    const auto& odef = require_entity_type(o, object_label);
    std::vector<CreatedMarkup> out;
    auto s_needle = trim(subject_surface);
    auto o_needle = trim(object_surface);
    if (s_needle.empty() || o_needle.empty() || !o.relation_admits(rel, sdef.name, odef.name)) return out;

    for (auto& doc : docs) {
        auto s = locate_endpoint(doc, sdef, s_needle);
        auto t = locate_endpoint(doc, odef, o_needle);
        if (!s || !t) continue;
        bool touched = false;
        auto realize = [&](Endpoint& ep, const EntityTypeDef& def) {
            if (!ep.to_create) return;
            auto r = insert_entity(doc, o, {def.name, ep.to_create->first, ep.to_create->second}, MarkupState::suggested);
            ep.id = r.markup.id;
            if (r.created) {
                out.push_back({doc.doc_id(), r.markup});
                touched = true;
            }
        };
        realize(*s, sdef);
        realize(*t, odef);
        auto r = insert_relation(doc, o, {rel.name, s->id, t->id}, MarkupState::suggested);
        if (r.created) {
            out.push_back({doc.doc_id(), r.markup});
            touched = true;
        }
        if (touched) MarkupEditor::bump(doc);
    }
    return out;
}

std::vector<CreatedMarkup> propagate(std::span<AnnotatedDocument> docs, std::size_t seed_index,
                                     std::string_view seed_id, const Ontology& o, PropagationScope scope)
{
    if (seed_index >= docs.size()) fail(ErrorCode::not_found, "seed document out of range");
    const auto* seed = docs[seed_index].find(seed_id);
    if (!seed) fail(ErrorCode::not_found, "no markup '" + std::string(seed_id) + "'");
    auto scoped = scope == PropagationScope::document ? docs.subspan(seed_index, 1) : docs;

    if (seed->is_entity) {
        std::string label = seed->name, surface = seed->entity_text.value_or("");
        return propagate_entity(scoped, o, label, surface);
    }
    const auto& seed_doc = docs[seed_index];
    const auto* s = seed_doc.find(*seed->source);
    const auto* t = seed_doc.find(*seed->target);
    if (!s || !t) fail(ErrorCode::validation, "relation seed has dangling endpoints");
    std::string label = seed->name, sl = s->name, ss = *s->entity_text, tl = t->name, ts = *t->entity_text;
    return propagate_relation(scoped, o, label, sl, ss, tl, ts);
}

Counts& Counts::operator+=(const Counts& c)
{
    entities += c.entities;
    relations += c.relations;
    triples += c.triples;
    accepted += c.accepted;
    suggested += c.suggested;
    return *this;
}

Counts counts(const AnnotatedDocument& doc, const Ontology& o)
{
    Counts c;
    for (const auto& m : doc.markups()) {
        (m.is_entity ? c.entities : c.relations) += 1;
        (m.suggested ? c.suggested : c.accepted) += 1;
    }
    c.triples = unified_triples(doc, o).size();
    return c;
}

Counts counts(std::span<const AnnotatedDocument> docs, const Ontology& o)
{
    Counts c;
    for (const auto& d : docs) c += counts(d, o);
    return c;
}

std::vector<NativeRecord> native_records(const AnnotatedDocument& doc, const Ontology& o)
{
    std::vector<NativeRecord> out;
    auto mention = [&](const std::string& id) {
        const auto* m = doc.find(id);
        return Mention{m->name, *m->entity_text, Anchor{*m->start, *m->end}};
    };
    switch (o.task) {
    case TaskKind::ner:
        for (const auto& m : doc.markups())
            if (m.is_entity) out.push_back(NerRecord{{m.name, *m.entity_text, Anchor{*m.start, *m.end}}});
        break;
    case TaskKind::re:
        for (const auto& m : doc.markups())
            if (!m.is_entity) out.push_back(ReRecord{mention(*m.source), m.name, mention(*m.target)});
        break;
    case TaskKind::ee: {
        const auto* pseudo = o.pseudo_entity();
        for (const auto& trig : doc.markups()) {
            if (!trig.is_entity || (pseudo && trig.label_id == pseudo->id)) continue;
            EeRecord rec{trig.name, *trig.entity_text, Anchor{*trig.start, *trig.end}, {}};
            for (const auto& r : doc.markups()) {
                if (r.is_entity || r.source != trig.id) continue;
                const auto* arg = doc.find(*r.target);
                rec.arguments.push_back({r.name, *arg->entity_text, Anchor{*arg->start, *arg->end}});
            }
            out.push_back(std::move(rec));
        }
        break;
    }
    }
    return out;
}

std::vector<UnifiedTriple> unified_triples(const AnnotatedDocument& doc, const Ontology& o)
{
    std::vector<UnifiedTriple> out;
    for (const auto& r : native_records(doc, o)) {
        auto ts = to_unified(o.task, r);
        out.insert(out.end(), ts.begin(), ts.end());
    }
    return out;
}

std::string check_integrity(const AnnotatedDocument& doc)
{
    std::set<std::string> ids;
    for (const auto& m : doc.markups()) {
        if (!ids.insert(m.id).second) return "duplicate markup id '" + m.id + "'";
    }
    for (const auto& m : doc.markups()) {
        if (m.is_entity) {
            if (m.source || m.target) return "entity markup '" + m.id + "' has relation endpoints";
            if (!m.start || !m.end || !m.entity_text) return "entity markup '" + m.id + "' lacks its span";
            if (*m.start < 0 || *m.end < *m.start || static_cast<std::size_t>(*m.end) >= doc.tokens().size())
                return "entity markup '" + m.id + "' span out of range";
            if (span_text(doc.text(), doc.tokens(), *m.start, *m.end) != *m.entity_text)
                return "entity markup '" + m.id + "' text does not match its span";
        } else {
            if (m.start || m.end || m.entity_text) return "relation markup '" + m.id + "' carries span fields";
            if (!m.source || !m.target) return "relation markup '" + m.id + "' lacks endpoints";
            const auto* s = doc.find(*m.source);
            const auto* t = doc.find(*m.target);
            if (!s || !s->is_entity || !t || !t->is_entity)
                return "relation markup '" + m.id + "' has a dangling endpoint";
        }
    }
    return {};
}

} // namespace kgmark
