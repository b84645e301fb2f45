#pragma once
// Shared ontologies and sentences for the test suites.

#include <string>

#include "kgmark/markup.hpp"
#include "kgmark/scheme.hpp"

namespace fixtures {

inline const std::string james = "James worked for Google in Tokyo, the capital of Japan.";
inline const std::string johnson =
    "Mr.Johnson retired before the 2005 season and briefly worked as a football analyst for WBZ-TV in Boston.";
inline const std::string marry = "Yesterday Bob and his wife got married in Beijing.";

inline kgmark::Ontology ner()
{
    return kgmark::parse_scheme_text(kgmark::TaskKind::ner, {"PER", "LOC", "ORG", "MISC"}, {});
}

inline kgmark::Ontology re()
{
    return kgmark::parse_scheme_text(kgmark::TaskKind::re, {"Person", "Organization", "Location"},
                                     {"person-company@[Person, Organization]", "located-in@[Organization, Location]"});
}

inline kgmark::Ontology ee()
{
    return kgmark::parse_scheme_text(kgmark::TaskKind::ee, {"_"}, {"Life:Marry@[Person, Time, Place]"});
}

/// Entity markup over the inclusive token range covering `surface`'s first occurrence.
inline kgmark::Markup mark(kgmark::AnnotatedDocument& doc, const kgmark::Ontology& o, const std::string& label,
                           const std::string& surface, kgmark::MarkupState state = kgmark::MarkupState::accepted)
{
    auto occ = kgmark::find_occurrences(doc.text(), doc.tokens(), surface);
    if (occ.empty()) throw std::runtime_error("fixture surface not in text: " + surface);
    return kgmark::add_markup(doc, o, kgmark::EntityDraft{label, occ.front().first, occ.front().second}, state).markup;
}

inline kgmark::Markup link(kgmark::AnnotatedDocument& doc, const kgmark::Ontology& o, const std::string& label,
                           const std::string& source, const std::string& target,
                           kgmark::MarkupState state = kgmark::MarkupState::accepted)
{
    return kgmark::add_markup(doc, o, kgmark::RelationDraft{label, source, target}, state).markup;
}

} // namespace fixtures
