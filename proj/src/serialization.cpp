#include "kgmark/serialization.hpp"

namespace kgmark::serial {

json to_json(const UnifiedTriple& t)
{
    json j{{"subject_type", t.subject_type},
           {"subject", t.subject},
           {"relation", t.relation.str()},
           {"object_type", t.object_type.str()},
           {"object", t.object.str()}};
    if (t.subject_anchor) {
        j["subject_start"] = t.subject_anchor->start;
        j["subject_end"] = t.subject_anchor->end;
    }
    if (t.object_anchor) {
        j["object_start"] = t.object_anchor->start;
        j["object_end"] = t.object_anchor->end;
    }
    return j;
}

UnifiedTriple triple_from_json(const json& j)
{
    UnifiedTriple t;
    t.subject_type = field<std::string>(j, "subject_type");
    t.subject = field<std::string>(j, "subject");
    t.relation = Term::parse(field<std::string>(j, "relation"));
    t.object_type = Term::parse(field<std::string>(j, "object_type"));
    t.object = Term::parse(field<std::string>(j, "object"));
    if (j.contains("subject_start")) t.subject_anchor = Anchor{field<int>(j, "subject_start"), field<int>(j, "subject_end")};
    if (j.contains("object_start")) t.object_anchor = Anchor{field<int>(j, "object_start"), field<int>(j, "object_end")};
    return t;
}

json to_json(const Markup& m)
{
    json j{{"isEntity", m.is_entity}, {"suggested", m.suggested}, {"_id", m.id}, {"name", m.name}, {"labelId", m.label_id}};
    if (m.source) j["source"] = *m.source;
    if (m.target) j["target"] = *m.target;
    if (m.start) j["start"] = *m.start;
    if (m.end) j["end"] = *m.end;
    if (m.entity_text) j["entityText"] = *m.entity_text;
    return j;
}

Markup markup_from_json(const json& j)
{
    Markup m;
    m.is_entity = field<bool>(j, "isEntity");
    m.suggested = field<bool>(j, "suggested");
    m.id = field<std::string>(j, "_id");
    m.name = field<std::string>(j, "name");
    m.label_id = field<std::string>(j, "labelId");
    if (j.contains("source")) m.source = field<std::string>(j, "source");
    if (j.contains("target")) m.target = field<std::string>(j, "target");
    if (j.contains("start")) m.start = field<int>(j, "start");
    if (j.contains("end")) m.end = field<int>(j, "end");
    if (j.contains("entityText")) m.entity_text = field<std::string>(j, "entityText");
    return m;
}

json to_json(const Ontology& o)
{
    json ents = json::array(), rels = json::array();
    for (const auto& e : o.entity_types) {
        json j{{"id", e.id}, {"name", e.name}, {"color", e.color}, {"pseudo", e.pseudo}};
        j["parent"] = e.parent ? json(*e.parent) : json(nullptr);
        ents.push_back(j);
    }
    for (const auto& r : o.relation_types) {
        json j{{"id", r.id}, {"name", r.name}, {"subject_types", r.subject_types}, {"object_types", r.object_types}};
        j["parent"] = r.parent ? json(*r.parent) : json(nullptr);
        rels.push_back(j);
    }
    return json{{"task", to_string(o.task)}, {"entity_types", ents}, {"relation_types", rels}};
}

Ontology ontology_from_json(const json& j)
{
    Ontology o;
    o.task = parse_task(field<std::string>(j, "task"));
    for (const auto& e : field<json>(j, "entity_types")) {
        EntityTypeDef d;
        d.id = field<std::string>(e, "id");
        d.name = field<std::string>(e, "name");
        d.color = field_or<std::string>(e, "color", "");
        d.pseudo = field_or<bool>(e, "pseudo", false);
        if (e.contains("parent") && !e["parent"].is_null()) d.parent = field<std::string>(e, "parent");
        o.entity_types.push_back(std::move(d));
    }
    for (const auto& r : field<json>(j, "relation_types")) {
        RelationTypeDef d;
        d.id = field<std::string>(r, "id");
        d.name = field<std::string>(r, "name");
        d.subject_types = field_or<std::vector<std::string>>(r, "subject_types", {});
        d.object_types = field_or<std::vector<std::string>>(r, "object_types", {});
        if (r.contains("parent") && !r["parent"].is_null()) d.parent = field<std::string>(r, "parent");
        o.relation_types.push_back(std::move(d));
    }
    return o;
}

json to_json(const pipeline::ProjectConfig& c)
{
    return json{{"name", c.name},
                {"description", c.description},
                {"task", to_string(c.task)},
                {"language", to_string(c.language)},
                {"model_update", c.model_update},
                {"clustering", c.clustering},
                {"preprocessing",
                 {{"lowercase", c.preprocessing.lowercase},
                  {"remove_chars", c.preprocessing.remove_chars},
                  {"deduplicate", c.preprocessing.deduplicate}}},
                {"cluster_cutoff", c.cluster_cutoff},
                {"kb_threshold", c.kb_threshold}};
}

pipeline::ProjectConfig config_from_json(const json& j)
{
    pipeline::ProjectConfig c;
    c.name = field<std::string>(j, "name");
    if (trim(c.name).empty()) throw Error(ErrorCode::validation, "project name is empty");
    c.description = field_or<std::string>(j, "description", "");
    c.task = parse_task(field<std::string>(j, "task"));
    c.language = parse_language(field_or<std::string>(j, "language", "en"));
    c.model_update = field_or<bool>(j, "model_update", true);
    c.clustering = field_or<bool>(j, "clustering", false);
    if (j.contains("preprocessing")) {
        const auto& p = j["preprocessing"];
        c.preprocessing.lowercase = field_or<bool>(p, "lowercase", false);
        c.preprocessing.remove_chars = field_or<std::vector<std::string>>(p, "remove_chars", {});
        c.preprocessing.deduplicate = field_or<bool>(p, "deduplicate", false);
    }
    c.cluster_cutoff = field_or<double>(j, "cluster_cutoff", 0.5);
    c.kb_threshold = field_or<std::size_t>(j, "kb_threshold", 2);
    if (c.kb_threshold == 0) throw Error(ErrorCode::validation, "kb_threshold must be at least 1");
    return c;
}

json tokens_to_json(const std::vector<Token>& tokens)
{
    json a = json::array();
    for (const auto& t : tokens) a.push_back({{"text", t.text}, {"begin", t.begin}, {"end", t.end}});
    return a;
}

json to_json(const Counts& c)
{
    return json{{"entities", c.entities},
                {"relations", c.relations},
                {"triples", c.triples},
                {"accepted", c.accepted},
                {"suggested", c.suggested}};
}

json to_json(const pipeline::ReviewSummary& s)
{
    return json{{"name", s.name},
                {"task", to_string(s.task)},
                {"language", to_string(s.language)},
                {"texts", s.texts},
                {"entity_types", s.entity_types},
                {"relation_types", s.relation_types},
                {"constrained_relations", s.constrained_relations},
                {"hierarchical_types", s.hierarchical_types},
                {"model_update", s.model_update},
                {"clustering", s.clustering},
                {"lowercase", s.lowercase},
                {"deduplicate", s.deduplicate},
                {"remove_chars", s.remove_chars}};
}

json to_json(const std::vector<Violation>& v)
{
    json a = json::array();
    for (const auto& x : v) a.push_back(x.message);
    return a;
}

} // namespace kgmark::serial
