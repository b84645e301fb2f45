#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "kgmark/error.hpp"
#include "kgmark/scheme.hpp"

using namespace kgmark;

namespace {

UnifiedTriple triple(std::string st, std::string s, Term r, Term ot, Term ob)
{
    return UnifiedTriple{std::move(st), std::move(s), std::move(r), std::move(ot), std::move(ob), {}, {}};
}

EeRecord marry_record()
{
    return EeRecord{"Life:Marry", "married", std::nullopt,
                    {{"Person", "Bob and his wife", std::nullopt},
                     {"Time", "Yesterday", std::nullopt},
                     {"Place", "Beijing", std::nullopt}}};
}

bool has_violation(const std::vector<Violation>& v, Violation::Kind k)
{
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == k; });
}

} // namespace

TEST(Term, PseudoRoundTrip)
{
    EXPECT_TRUE(Term::parse("_").is_pseudo());
    EXPECT_EQ(Term::pseudo().str(), "_");
    EXPECT_EQ(Term::parse("PER").value(), "PER");
}

TEST(ToUnified, NerRecord)
{
    auto t = to_unified(TaskKind::ner, NerRecord{{"PER", "James", std::nullopt}});
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0], triple("PER", "James", Term::pseudo(), Term::pseudo(), Term::pseudo()));
}

TEST(ToUnified, ReRecord)
{
    auto t = to_unified(TaskKind::re, ReRecord{{"Person", "Mr.Johnson", std::nullopt},
                                               "person-company",
                                               {"Organization", "WBZ-TV", std::nullopt}});
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0], triple("Person", "Mr.Johnson", "person-company", "Organization", "WBZ-TV"));
}

TEST(ToUnified, EeRecordGivesOneTriplePerArgument)
{
    auto t = to_unified(TaskKind::ee, marry_record());
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0], triple("Life:Marry", "married", "Person", Term::pseudo(), "Bob and his wife"));
    EXPECT_EQ(t[1], triple("Life:Marry", "married", "Time", Term::pseudo(), "Yesterday"));
    EXPECT_EQ(t[2], triple("Life:Marry", "married", "Place", Term::pseudo(), "Beijing"));
}

TEST(ToUnified, RejectsEmptySurfaceAndWrongShape)
{
    EXPECT_THROW(to_unified(TaskKind::ner, NerRecord{{"PER", "", std::nullopt}}), Error);
    EXPECT_THROW(to_unified(TaskKind::ner, ReRecord{}), Error);
}

TEST(ToUnified, OntologyRejectsUnknownTypes)
{
    auto o = fixtures::ner();
    EXPECT_NO_THROW(to_unified(o, NerRecord{{"ORG", "Google", std::nullopt}}));
    EXPECT_THROW(to_unified(o, NerRecord{{"ANIMAL", "dog", std::nullopt}}), Error);
}

TEST(FromUnified, Inverses)
{
    auto ner = from_unified(TaskKind::ner, {triple("PER", "James", Term::pseudo(), Term::pseudo(), Term::pseudo())});
    ASSERT_EQ(ner.size(), 1u);
    EXPECT_EQ(std::get<NerRecord>(ner[0]).entity.text, "James");

    auto ee = from_unified(TaskKind::ee, to_unified(TaskKind::ee, marry_record()));
    ASSERT_EQ(ee.size(), 1u);
    EXPECT_EQ(canonical(ee), canonical({marry_record()}));

    EXPECT_TRUE(from_unified(TaskKind::re, {}).empty());
}

TEST(FromUnified, AnchorsSeparateEvents)
{
    EeRecord a = marry_record(), b = marry_record();
    a.trigger_anchor = Anchor{6, 6};
    b.trigger_anchor = Anchor{12, 12};
    b.arguments.resize(1);
    auto triples = to_unified(TaskKind::ee, a);
    auto tb = to_unified(TaskKind::ee, b);
    triples.insert(triples.begin() + 1, tb.begin(), tb.end());
    EXPECT_EQ(canonical(from_unified(TaskKind::ee, triples)), canonical({a, b}));
}

TEST(FromUnified, ArgumentlessEventUsesPseudoTriple)
{
    EeRecord e{"Life:Marry", "married", std::nullopt, {}};
    auto t = to_unified(TaskKind::ee, e);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_TRUE(t[0].relation.is_pseudo());
    EXPECT_EQ(from_unified(TaskKind::ee, t), std::vector<NativeRecord>{e});
}

TEST(FromUnified, MixedPseudoAndRolesIsAmbiguous)
{
    auto t = to_unified(TaskKind::ee, marry_record());
    t.push_back(triple("Life:Marry", "married", Term::pseudo(), Term::pseudo(), Term::pseudo()));
    try {
        from_unified(TaskKind::ee, t);
        FAIL() << "expected ambiguity";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ambiguity);
    }
}

TEST(Validate, PresetNerListIsClean) { EXPECT_TRUE(validate_ontology(fixtures::ner()).empty()); }

TEST(Validate, UndeclaredConstraintType)
{
    Ontology o;
    o.task = TaskKind::re;
    o.entity_types = {{"E.Organization", "Organization", "", std::nullopt, false}};
    o.relation_types = {{"R.person-company", "person-company", {"Person"}, {"Organization"}, std::nullopt}};
    auto v = validate_ontology(o);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::unknown_constraint_type);
}

TEST(Validate, Cycle)
{
    Ontology o;
    o.entity_types = {{"E.A", "A", "", std::string("B"), false}, {"E.B", "B", "", std::string("A"), false}};
    EXPECT_TRUE(has_violation(validate_ontology(o), Violation::Kind::cycle));
}

TEST(Validate, DuplicatesAndDanglingParents)
{
    Ontology o;
    o.entity_types = {{"E.A", "A", "", std::nullopt, false},
                      {"E.A2", "A", "", std::nullopt, false},
                      {"E.C", "C", "", std::string("Z"), false}};
    auto v = validate_ontology(o);
    EXPECT_TRUE(has_violation(v, Violation::Kind::duplicate_name));
    EXPECT_TRUE(has_violation(v, Violation::Kind::dangling_parent));
}

TEST(Validate, EeNeedsExactlyOnePseudo)
{
    auto o = fixtures::ee();
    EXPECT_TRUE(validate_ontology(o).empty());
    o.entity_types.erase(std::remove_if(o.entity_types.begin(), o.entity_types.end(),
                                        [](const EntityTypeDef& e) { return e.pseudo; }),
                         o.entity_types.end());
    EXPECT_TRUE(has_violation(validate_ontology(o), Violation::Kind::pseudo_count));
}

TEST(SchemeText, RelationLine)
{
    auto o = fixtures::re();
    const auto* r = o.find_relation("person-company");
    ASSERT_NE(r, nullptr);
    EXPECT_EQ(r->subject_types, std::vector<std::string>{"Person"});
    EXPECT_EQ(r->object_types, std::vector<std::string>{"Organization"});
}

TEST(SchemeText, EventLinesBecomeTypesAndRoles)
{
    auto o = fixtures::ee();
    std::vector<std::string> ents;
    for (const auto& e : o.entity_types) ents.push_back(e.name);
    std::sort(ents.begin(), ents.end());
    EXPECT_EQ(ents, (std::vector<std::string>{"Life:Marry", "_"}));
    ASSERT_EQ(o.relation_types.size(), 3u);
    for (const auto* role : {"Person", "Time", "Place"}) {
        const auto* r = o.find_relation(role);
        ASSERT_NE(r, nullptr) << role;
        EXPECT_EQ(r->subject_types, std::vector<std::string>{"Life:Marry"});
        EXPECT_EQ(r->object_types, std::vector<std::string>{"_"});
    }
    EXPECT_NO_THROW(to_unified(o, marry_record()));
    EXPECT_EQ(canonical(from_unified(TaskKind::ee, to_unified(o, marry_record()))), canonical({marry_record()}));
}

TEST(SchemeText, SharedRoleCollectsEvents)
{
    auto o = parse_scheme_text(TaskKind::ee, {}, {"Life:Marry@[Person, Place]", "Life:Divorce@[Person]"});
    EXPECT_NE(o.pseudo_entity(), nullptr);
    auto subj = o.find_relation("Person")->subject_types;
    std::sort(subj.begin(), subj.end());
    EXPECT_EQ(subj, (std::vector<std::string>{"Life:Divorce", "Life:Marry"}));
    EXPECT_EQ(o.find_relation("Place")->subject_types, std::vector<std::string>{"Life:Marry"});
}

TEST(SchemeText, NerWithoutRelations)
{
    auto o = fixtures::ner();
    EXPECT_EQ(o.entity_types.size(), 4u);
    EXPECT_TRUE(o.relation_types.empty());
}

TEST(SchemeText, HierarchyAndColorAndAlternatives)
{
    auto o = parse_scheme_text(TaskKind::re, {"Agent/Person #ff0000", "Agent/Organization", "; comment", "Place"},
                               {"member-of@[Person|Organization, Organization]"});
    ASSERT_NE(o.find_entity("Agent"), nullptr);
    EXPECT_EQ(o.find_entity("Person")->parent, std::optional<std::string>("Agent"));
    EXPECT_EQ(o.find_entity("Person")->color, "#ff0000");
    EXPECT_EQ(o.find_relation("member-of")->subject_types, (std::vector<std::string>{"Person", "Organization"}));
    EXPECT_TRUE(validate_ontology(o).empty());

    auto [ents, rels] = render_scheme_text(o);
    auto back = parse_scheme_text(TaskKind::re, ents, rels);
    ASSERT_EQ(back.entity_types.size(), o.entity_types.size());
    for (std::size_t i = 0; i < o.entity_types.size(); ++i) {
        EXPECT_EQ(back.entity_types[i].name, o.entity_types[i].name);
        EXPECT_EQ(back.entity_types[i].parent, o.entity_types[i].parent);
        EXPECT_EQ(back.entity_types[i].color, o.entity_types[i].color);
    }
    EXPECT_EQ(back.find_relation("member-of")->subject_types, o.find_relation("member-of")->subject_types);
}

TEST(SchemeText, InheritedConstraint)
{
    auto o = parse_scheme_text(TaskKind::re, {"Agent/Person", "Thing"}, {"owns@[Agent, Thing]"});
    EXPECT_TRUE(o.relation_admits(*o.find_relation("owns"), "Person", "Thing"));
    EXPECT_FALSE(o.relation_admits(*o.find_relation("owns"), "Thing", "Thing"));
}

TEST(SchemeText, ErrorsNameTheLine)
{
    try {
        parse_scheme_text(TaskKind::re, {"Person"}, {"ok@[Person, Person]", "broken@[Person]"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_scheme_text(TaskKind::ner, {"PER"}, {"r@[PER, PER]"}), Error);
}
