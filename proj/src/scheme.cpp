#include "kgmark/scheme.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include "kgmark/error.hpp"
#include "kgmark/text.hpp"

namespace kgmark {

TaskKind parse_task(std::string_view s)
{
    std::string f = fold_case(s);
    if (f == "ner") return TaskKind::ner;
    if (f == "re") return TaskKind::re;
    if (f == "ee") return TaskKind::ee;
    fail(ErrorCode::validation, "unknown task '" + std::string(s) + "'");
}

const char* to_string(TaskKind t)
{
    switch (t) {
    case TaskKind::ner: return "ner";
    case TaskKind::re: return "re";
    case TaskKind::ee: return "ee";
    }
    return "?";
}

Term Term::parse(std::string_view s)
{
    if (s == pseudo_token) return Term::pseudo();
    return Term(std::string(s));
}

const std::string& Term::value() const
{
    if (!value_) fail(ErrorCode::validation, "pseudo token has no value");
    return *value_;
}

std::vector<NativeRecord> canonical(std::vector<NativeRecord> records)
{
    for (auto& r : records) {
        if (auto* ee = std::get_if<EeRecord>(&r)) std::sort(ee->arguments.begin(), ee->arguments.end());
    }
    std::sort(records.begin(), records.end());
    return records;
}

// ---- ontology ---------------------------------------------------------------------

const EntityTypeDef* Ontology::find_entity(std::string_view name) const
{
    for (const auto& e : entity_types)
        if (e.name == name) return &e;
    return nullptr;
}

const RelationTypeDef* Ontology::find_relation(std::string_view name) const
{
    for (const auto& r : relation_types)
        if (r.name == name) return &r;
    return nullptr;
}

const EntityTypeDef* Ontology::entity_by_id(std::string_view id) const
{
    for (const auto& e : entity_types)
        if (e.id == id) return &e;
    return nullptr;
}

const RelationTypeDef* Ontology::relation_by_id(std::string_view id) const
{
    for (const auto& r : relation_types)
        if (r.id == id) return &r;
    return nullptr;
}

const EntityTypeDef* Ontology::pseudo_entity() const
{
    for (const auto& e : entity_types)
        if (e.pseudo) return &e;
    return nullptr;
}

bool Ontology::entity_allowed(std::string_view type, const std::vector<std::string>& allowed) const
{
    if (allowed.empty()) return true;
    std::string current(type);
    // bounded walk; validated ontologies are acyclic but be robust to unvalidated ones
    for (std::size_t guard = 0; guard <= entity_types.size(); ++guard) {
        if (std::find(allowed.begin(), allowed.end(), current) != allowed.end()) return true;
        const auto* def = find_entity(current);
        if (!def || !def->parent) return false;
        current = *def->parent;
    }
    return false;
}

bool Ontology::relation_admits(const RelationTypeDef& rel, std::string_view subject_type,
                               std::string_view object_type) const
{
    return entity_allowed(subject_type, rel.subject_types) && entity_allowed(object_type, rel.object_types);
}

namespace {

template <class Def>
void check_forest(const std::vector<Def>& defs, const char* kind, std::vector<Violation>& out)
{
    std::map<std::string, const Def*> by_name;
    for (const auto& d : defs) by_name.emplace(d.name, &d);

    for (const auto& d : defs) {
        if (d.parent && !by_name.count(*d.parent)) {
            out.push_back({Violation::Kind::dangling_parent,
                           std::string(kind) + " type '" + d.name + "' has unknown parent '" + *d.parent + "'"});
        }
    }
    // a node is on a cycle iff walking parents returns to it
    for (const auto& d : defs) {
        std::set<std::string> seen{d.name};
        const Def* cur = &d;
        while (cur->parent) {
            auto it = by_name.find(*cur->parent);
            if (it == by_name.end()) break;
            if (it->second->name == d.name) {
                out.push_back({Violation::Kind::cycle, std::string(kind) + " type '" + d.name + "' is on a hierarchy cycle"});
                break;
            }
            if (!seen.insert(it->second->name).second) break;  // cycle not through d
            cur = it->second;
        }
    }
}

template <class Def>
void check_names(const std::vector<Def>& defs, const char* kind, std::vector<Violation>& out)
{
    std::set<std::string> names;
    for (const auto& d : defs) {
        if (d.name.empty()) out.push_back({Violation::Kind::empty_name, std::string(kind) + " type with empty name"});
        else if (!names.insert(d.name).second)
            out.push_back({Violation::Kind::duplicate_name, std::string("duplicate ") + kind + " type '" + d.name + "'"});
    }
}

} // namespace

std::vector<Violation> validate_ontology(const Ontology& o)
{
    std::vector<Violation> out;
    check_names(o.entity_types, "entity", out);
    check_names(o.relation_types, "relation", out);
    check_forest(o.entity_types, "entity", out);
    check_forest(o.relation_types, "relation", out);

    for (const auto& r : o.relation_types) {
        for (const auto* slot : {&r.subject_types, &r.object_types}) {
            for (const auto& t : *slot) {
                if (!o.find_entity(t))
                    out.push_back({Violation::Kind::unknown_constraint_type,
                                   "relation '" + r.name + "' references undeclared entity type '" + t + "'"});
            }
        }
    }

    auto pseudo_count = std::count_if(o.entity_types.begin(), o.entity_types.end(),
                                      [](const EntityTypeDef& e) { return e.pseudo; });
    if (o.task == TaskKind::ee && pseudo_count != 1)
        out.push_back({Violation::Kind::pseudo_count, "EE ontology needs exactly one pseudo entity type"});
    if (o.task != TaskKind::ee && pseudo_count != 0)
        out.push_back({Violation::Kind::pseudo_count, "pseudo entity type is only valid for EE"});
    return out;
}

// ---- scheme text ------------------------------------------------------------------

namespace {

const std::vector<std::string> palette = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                          "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

[[noreturn]] void parse_fail(const char* section, std::size_t line, const std::string& msg)
{
    fail(ErrorCode::parse, std::string(section) + " line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_path(const std::string& path)
{
    std::vector<std::string> parts;
    std::size_t b = 0;
    while (true) {
        auto e = path.find('/', b);
        parts.push_back(trim(path.substr(b, e == std::string::npos ? std::string::npos : e - b)));
        if (e == std::string::npos) break;
        b = e + 1;
    }
    return parts;
}

struct Builder {
    Ontology o;

    // Declares every segment of a path; returns the leaf name.
    template <class Def>
    std::string declare_path(std::vector<Def>& defs, const std::string& path, const char* section,
                             std::size_t line, const char* id_prefix, const std::string& leaf_color = {})
    {
        auto parts = split_path(path);
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (parts[i].empty()) parse_fail(section, line, "empty name segment in '" + path + "'");
            std::optional<std::string> parent;
            if (i > 0) parent = parts[i - 1];
            auto it = std::find_if(defs.begin(), defs.end(), [&](const Def& d) { return d.name == parts[i]; });
            if (it == defs.end()) {
                Def d;
                d.id = std::string(id_prefix) + parts[i];
                d.name = parts[i];
                d.parent = parent;
                if constexpr (std::is_same_v<Def, EntityTypeDef>) {
                    d.color = (i + 1 == parts.size() && !leaf_color.empty()) ? leaf_color
                                                                            : palette[defs.size() % palette.size()];
                }
                defs.push_back(std::move(d));
            } else {
                if (parent && it->parent && *it->parent != *parent)
                    parse_fail(section, line, "type '" + parts[i] + "' declared under two parents");
                if (parent && !it->parent) it->parent = parent;
                if constexpr (std::is_same_v<Def, EntityTypeDef>) {
                    if (i + 1 == parts.size() && !leaf_color.empty()) it->color = leaf_color;
                }
            }
        }
        return parts.back();
    }
};

struct RelationLine {
    std::string name;
    std::vector<std::vector<std::string>> slots;
};

RelationLine parse_relation_line(const std::string& raw, std::size_t line)
{
    auto at = raw.find('@');
    if (at == std::string::npos) parse_fail("relation", line, "missing '@' in '" + raw + "'");
    RelationLine out;
    out.name = trim(raw.substr(0, at));
    if (out.name.empty()) parse_fail("relation", line, "missing name before '@'");
    std::string rest = trim(raw.substr(at + 1));
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
        parse_fail("relation", line, "expected '[...]' after '@'");
    std::string body = rest.substr(1, rest.size() - 2);
    if (body.find_first_of("[]") != std::string::npos) parse_fail("relation", line, "unbalanced brackets");
    if (trim(body).empty()) return out;
    std::size_t b = 0;
    while (true) {
        auto e = body.find(',', b);
        std::string slot = body.substr(b, e == std::string::npos ? std::string::npos : e - b);
        std::vector<std::string> alts;
        std::size_t sb = 0;
        while (true) {
            auto se = slot.find('|', sb);
            auto alt = trim(slot.substr(sb, se == std::string::npos ? std::string::npos : se - sb));
            if (!alt.empty()) alts.push_back(alt);
            if (se == std::string::npos) break;
            sb = se + 1;
        }
        out.slots.push_back(std::move(alts));
        if (e == std::string::npos) break;
        b = e + 1;
    }
    return out;
}

const std::regex color_suffix(R"(^(.*\S)\s+(#[0-9a-fA-F]{6})$)");

bool skip_line(const std::string& s) { return s.empty() || s.front() == ';'; }

} // namespace

Ontology parse_scheme_text(TaskKind task, const std::vector<std::string>& entity_lines,
                           const std::vector<std::string>& relation_lines)
{
    Builder b;
    b.o.task = task;

    for (std::size_t i = 0; i < entity_lines.size(); ++i) {
        std::string line = trim(entity_lines[i]);
        if (skip_line(line)) continue;
        std::string color;
        std::smatch m;
        if (std::regex_match(line, m, color_suffix)) {
            color = m[2];
            line = m[1];
        }
        if (line == pseudo_token) {
            if (task != TaskKind::ee) parse_fail("entity", i + 1, "pseudo token is only valid for EE schemes");
            if (!b.o.pseudo_entity()) {
                EntityTypeDef d{"E._", "_", color.empty() ? "#cccccc" : color, std::nullopt, true};
                b.o.entity_types.push_back(d);
            }
            continue;
        }
        if (task == TaskKind::ee)
            parse_fail("entity", i + 1, "EE entity types must be the pseudo token '_'");
        b.declare_path(b.o.entity_types, line, "entity", i + 1, "E.", color);
    }

    if (task == TaskKind::ee && !b.o.pseudo_entity()) {
        b.o.entity_types.insert(b.o.entity_types.begin(), EntityTypeDef{"E._", "_", "#cccccc", std::nullopt, true});
    }

    for (std::size_t i = 0; i < relation_lines.size(); ++i) {
        std::string line = trim(relation_lines[i]);
        if (skip_line(line)) continue;
        if (task == TaskKind::ner) parse_fail("relation", i + 1, "NER schemes take no relation types");
        auto rl = parse_relation_line(line, i + 1);

        if (task == TaskKind::re) {
            if (rl.slots.size() != 2) parse_fail("relation", i + 1, "expected [subject, object]");
            auto leaf = b.declare_path(b.o.relation_types, rl.name, "relation", i + 1, "R.");
            auto* rel = const_cast<RelationTypeDef*>(b.o.find_relation(leaf));
            rel->subject_types = rl.slots[0];
            rel->object_types = rl.slots[1];
        } else {
            auto event = b.declare_path(b.o.entity_types, rl.name, "relation", i + 1, "E.");
            for (const auto& slot : rl.slots) {
                if (slot.size() != 1) parse_fail("relation", i + 1, "each event argument role takes one name");
                auto role = b.declare_path(b.o.relation_types, slot[0], "relation", i + 1, "R.");
                auto* rel = const_cast<RelationTypeDef*>(b.o.find_relation(role));
                if (std::find(rel->subject_types.begin(), rel->subject_types.end(), event) == rel->subject_types.end())
                    rel->subject_types.push_back(event);
                rel->object_types = {std::string(pseudo_token)};
            }
        }
    }
    return b.o;
}

namespace {

template <class Def>
std::string path_of(const std::vector<Def>& defs, const Def& d)
{
    std::vector<std::string> parts{d.name};
    const Def* cur = &d;
    for (std::size_t guard = 0; cur->parent && guard < defs.size(); ++guard) {
        auto it = std::find_if(defs.begin(), defs.end(), [&](const Def& x) { return x.name == *cur->parent; });
        if (it == defs.end()) break;
        parts.push_back(it->name);
        cur = &*it;
    }
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (!out.empty()) out += '/';
        out += *it;
    }
    return out;
}

std::string join_alts(const std::vector<std::string>& v)
{
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += '|';
        out += s;
    }
    return out;
}

} // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> render_scheme_text(const Ontology& o)
{
    std::vector<std::string> ents, rels;
    if (o.task == TaskKind::ee) {
        if (const auto* p = o.pseudo_entity()) ents.push_back(std::string(pseudo_token) + " " + p->color);
        for (const auto& e : o.entity_types) {
            if (e.pseudo) continue;
            std::string line = path_of(o.entity_types, e) + "@[";
            bool first = true;
            for (const auto& r : o.relation_types) {
                if (std::find(r.subject_types.begin(), r.subject_types.end(), e.name) == r.subject_types.end()) continue;
                if (!first) line += ", ";
                line += path_of(o.relation_types, r);
                first = false;
            }
            rels.push_back(line + "]");
        }
        return {ents, rels};
    }
    for (const auto& e : o.entity_types) ents.push_back(path_of(o.entity_types, e) + " " + e.color);
    for (const auto& r : o.relation_types)
        rels.push_back(path_of(o.relation_types, r) + "@[" + join_alts(r.subject_types) + ", " +
                       join_alts(r.object_types) + "]");
    return {ents, rels};
}

// ---- transformations --------------------------------------------------------------

namespace {

void require(bool ok, const std::string& msg)
{
    if (!ok) fail(ErrorCode::validation, msg);
}

const char* expected_record(TaskKind t)
{
    switch (t) {
    case TaskKind::ner: return "NER record";
    case TaskKind::re: return "RE record";
    case TaskKind::ee: return "EE record";
    }
    return "record";
}

} // namespace

std::vector<UnifiedTriple> to_unified(TaskKind task, const NativeRecord& record)
{
    std::vector<UnifiedTriple> out;
    switch (task) {
    case TaskKind::ner: {
        const auto* r = std::get_if<NerRecord>(&record);
        require(r != nullptr, std::string("expected ") + expected_record(task));
        require(!r->entity.type.empty() && !r->entity.text.empty(), "NER record needs a type and a surface");
        out.push_back({r->entity.type, r->entity.text, Term::pseudo(), Term::pseudo(), Term::pseudo(),
                       r->entity.anchor, std::nullopt});
        break;
    }
    case TaskKind::re: {
        const auto* r = std::get_if<ReRecord>(&record);
        require(r != nullptr, std::string("expected ") + expected_record(task));
        require(!r->subject.type.empty() && !r->subject.text.empty() && !r->relation.empty() &&
                    !r->object.type.empty() && !r->object.text.empty(),
                "RE record has an empty field");
        out.push_back({r->subject.type, r->subject.text, Term(r->relation), Term(r->object.type),
                       Term(r->object.text), r->subject.anchor, r->object.anchor});
        break;
    }
    case TaskKind::ee: {
        const auto* r = std::get_if<EeRecord>(&record);
        require(r != nullptr, std::string("expected ") + expected_record(task));
        require(!r->event_type.empty() && !r->trigger.empty(), "EE record needs an event type and a trigger");
        if (r->arguments.empty()) {
            out.push_back({r->event_type, r->trigger, Term::pseudo(), Term::pseudo(), Term::pseudo(),
                           r->trigger_anchor, std::nullopt});
        }
        for (const auto& a : r->arguments) {
            require(!a.role.empty() && !a.text.empty(), "EE argument needs a role and a surface");
            out.push_back({r->event_type, r->trigger, Term(a.role), Term::pseudo(), Term(a.text),
                           r->trigger_anchor, a.anchor});
        }
        break;
    }
    }
    return out;
}

std::vector<UnifiedTriple> to_unified(const Ontology& o, const NativeRecord& record)
{
    auto entity_ok = [&](const std::string& t) {
        const auto* e = o.find_entity(t);
        require(e != nullptr && !e->pseudo, "entity type '" + t + "' is not in the ontology");
    };
    auto relation_ok = [&](const std::string& t) {
        require(o.find_relation(t) != nullptr, "relation type '" + t + "' is not in the ontology");
    };
    auto triples = to_unified(o.task, record);
    std::visit(
        [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, NerRecord>) {
                entity_ok(r.entity.type);
            } else if constexpr (std::is_same_v<R, ReRecord>) {
                entity_ok(r.subject.type);
                entity_ok(r.object.type);
                relation_ok(r.relation);
            } else {
                entity_ok(r.event_type);
                for (const auto& a : r.arguments) relation_ok(a.role);
            }
        },
        record);
    return triples;
}

std::vector<NativeRecord> from_unified(TaskKind task, const std::vector<UnifiedTriple>& triples)
{
    std::vector<NativeRecord> out;
    for (const auto& t : triples) require(!t.subject.empty() && !t.subject_type.empty(), "triple has an empty subject");

    if (task == TaskKind::ner) {
        for (const auto& t : triples) {
            require(t.relation.is_pseudo() && t.object_type.is_pseudo() && t.object.is_pseudo(),
                    "NER triple must carry the pseudo token in relation and object slots");
            out.push_back(NerRecord{{t.subject_type, t.subject, t.subject_anchor}});
        }
        return out;
    }
    if (task == TaskKind::re) {
        for (const auto& t : triples) {
            require(!t.relation.is_pseudo() && !t.object_type.is_pseudo() && !t.object.is_pseudo(),
                    "RE triple cannot carry the pseudo token");
            out.push_back(ReRecord{{t.subject_type, t.subject, t.subject_anchor},
                                   t.relation.value(),
                                   {t.object_type.value(), t.object.value(), t.object_anchor}});
        }
        return out;
    }

    // EE: group by event instance identity, keeping first-appearance order
    using Key = std::tuple<std::string, std::string, std::optional<Anchor>>;
    std::vector<Key> order;
    std::map<Key, std::vector<const UnifiedTriple*>> groups;
    for (const auto& t : triples) {
        require(t.object_type.is_pseudo(), "EE triple object type must be the pseudo token");
        Key k{t.subject_type, t.subject, t.subject_anchor};
        auto [it, inserted] = groups.try_emplace(k);
        if (inserted) order.push_back(k);
        it->second.push_back(&t);
    }
    for (const auto& k : order) {
        const auto& members = groups[k];
        EeRecord rec{std::get<0>(k), std::get<1>(k), std::get<2>(k), {}};
        bool has_marker = false;
        for (const auto* t : members) {
            if (t->relation.is_pseudo()) {
                if (!t->object.is_pseudo())
                    fail(ErrorCode::ambiguity, "EE triple with pseudo role carries an argument");
                has_marker = true;
                continue;
            }
            if (t->object.is_pseudo()) fail(ErrorCode::ambiguity, "EE role triple without an argument");
            rec.arguments.push_back({t->relation.value(), t->object.value(), t->object_anchor});
        }
        if (has_marker && (members.size() > 1))
            fail(ErrorCode::ambiguity, "event '" + rec.event_type + ":" + rec.trigger +
                                           "' mixes an argument-free marker with role triples");
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace kgmark
