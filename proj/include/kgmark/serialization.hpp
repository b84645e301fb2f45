#pragma once

#include "json.hpp"
#include "kgmark/error.hpp"
#include "kgmark/markup.hpp"
#include "kgmark/pipeline.hpp"
#include "kgmark/scheme.hpp"

namespace kgmark::serial {

using nlohmann::json;

/// Pseudo slots serialize as "_"; anchors as optional subject_start/.. fields.
json to_json(const UnifiedTriple& t);
UnifiedTriple triple_from_json(const json& j);

/// Markup attribute names: isEntity, suggested, _id, name, labelId, source, target,
/// start, end, entityText. Absent attributes are omitted.
json to_json(const Markup& m);
Markup markup_from_json(const json& j);

json to_json(const Ontology& o);
Ontology ontology_from_json(const json& j);

json to_json(const pipeline::ProjectConfig& c);
pipeline::ProjectConfig config_from_json(const json& j);

json tokens_to_json(const std::vector<Token>& tokens);
json to_json(const Counts& c);
json to_json(const pipeline::ReviewSummary& s);
json to_json(const std::vector<Violation>& v);

/// Reads a required field, turning nlohmann type errors into Error(validation).
template <class T>
T field(const json& j, const char* name)
{
    if (!j.is_object() || !j.contains(name)) throw Error(ErrorCode::validation, std::string("missing field '") + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::validation, std::string("field '") + name + "' has the wrong type");
    }
}

template <class T>
T field_or(const json& j, const char* name, T fallback)
{
    if (!j.is_object() || !j.contains(name) || j.at(name).is_null()) return fallback;
    return field<T>(j, name);
}

} // namespace kgmark::serial
