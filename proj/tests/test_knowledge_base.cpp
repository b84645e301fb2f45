#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "kgmark/knowledge_base.hpp"

using namespace kgmark;
using namespace kgmark::kb;

namespace {

Fact entity(std::string label, std::string surface) { return Fact{FactKind::entity, std::move(label), {std::move(surface)}}; }

FactEvent added(Fact f, std::int64_t ts = 1) { return FactEvent{FactEvent::Change::added, std::move(f), ts}; }
FactEvent removed(Fact f, std::int64_t ts = 2) { return FactEvent{FactEvent::Change::removed, std::move(f), ts}; }

KnowledgeEntry entry(Fact f, std::size_t count, std::int64_t last_seen = 0)
{
    return KnowledgeEntry{std::move(f), count, last_seen, "p"};
}

} // namespace

TEST(KnowledgeBase, PromotionAtThreshold)
{
    KnowledgeBase kb("p", Language::en, 2);
    kb.ingest(added(entity("ORG", "Apple")));
    EXPECT_TRUE(kb.entries()->empty());
    EXPECT_EQ(kb.tally(entity("ORG", "Apple")), 1u);
    kb.ingest(added(entity("ORG", "Apple")));
    ASSERT_EQ(kb.entries()->size(), 1u);
    EXPECT_EQ(kb.entries()->front().count, 2u);
}

TEST(KnowledgeBase, AddThenRemove)
{
    KnowledgeBase kb("p", Language::en, 2);
    kb.ingest(added(entity("ORG", "Apple")));
    kb.ingest(removed(entity("ORG", "Apple")));
    EXPECT_EQ(kb.tally(entity("ORG", "Apple")), 0u);
    EXPECT_TRUE(kb.entries()->empty());
}

TEST(KnowledgeBase, CaseInsensitiveKeyKeepsDisplay)
{
    KnowledgeBase kb("p", Language::en, 2);
    kb.ingest(added(entity("ORG", "Apple")));
    kb.ingest(added(entity("ORG", "APPLE")));
    ASSERT_EQ(kb.entries()->size(), 1u);
    EXPECT_EQ(kb.entries()->front().fact.surfaces.front(), "Apple");
}

TEST(KnowledgeBase, RelationFacts)
{
    KnowledgeBase kb("p", Language::en, 2);
    Fact f{FactKind::relation, "person-company", {"James", "Google"}};
    kb.ingest(added(f));
    kb.ingest(added(f));
    ASSERT_EQ(kb.entries()->size(), 1u);
    EXPECT_EQ(render_entry(kb.entries()->front()), "the relation between James and Google is person-company;");
}

TEST(KnowledgeBase, StopwordsAndSingleCharactersIgnored)
{
    KnowledgeBase kb("p", Language::en, 1);
    EXPECT_FALSE(kb.informative(entity("MISC", "the")));
    EXPECT_FALSE(kb.informative(entity("MISC", "a")));
    EXPECT_TRUE(kb.informative(entity("ORG", "Apple")));
    kb.ingest(added(entity("MISC", "The")));
    EXPECT_TRUE(kb.entries()->empty());

    KnowledgeBase zh("p", Language::zh, 1);
    EXPECT_FALSE(zh.informative(entity("LOC", "京")));
    EXPECT_TRUE(zh.informative(entity("LOC", "北京")));
}

TEST(KnowledgeBase, MatchesRescanAfterRandomEvents)
{
    std::mt19937 rng(3);
    const char* surfaces[] = {"Apple", "Google", "Tokyo", "Japan"};
    KnowledgeBase kb("p", Language::en, 2);
    std::map<std::string, long> live;
    for (int i = 0; i < 2000; ++i) {
        auto s = surfaces[rng() % 4];
        bool add = live[s] == 0 || rng() % 2;
        kb.ingest(add ? added(entity("ORG", s), i) : removed(entity("ORG", s), i));
        live[s] += add ? 1 : -1;
    }
    std::size_t promoted = 0;
    for (const auto& [s, n] : live) {
        EXPECT_EQ(kb.tally(entity("ORG", s)), static_cast<std::size_t>(n)) << s;
        promoted += n >= 2;
    }
    EXPECT_EQ(kb.entries()->size(), promoted);
}

TEST(KnowledgeBase, DumpLoadRoundTrip)
{
    KnowledgeBase kb("p", Language::en, 2);
    kb.ingest(added(entity("ORG", "Apple"), 10));
    kb.ingest(added(entity("ORG", "Apple"), 11));
    kb.ingest(added(entity("LOC", "Tokyo"), 12));
    auto back = KnowledgeBase::load(kb.dump());
    EXPECT_EQ(back.dump(), kb.dump());
    EXPECT_EQ(back.tally(entity("LOC", "Tokyo")), 1u);
    EXPECT_EQ(back.entries()->size(), 1u);
    EXPECT_ANY_THROW(KnowledgeBase::load("{\"format\":\"other\"}"));
}

TEST(Prefix, AppleExample)
{
    std::vector<KnowledgeEntry> es{entry(entity("ORG", "Apple"), 2)};
    auto p = generate_prefix("The middle class likes using Apple.", Language::en, es);
    EXPECT_EQ(p, "Note: the type of Apple is ORG;");
}

TEST(Prefix, EmptyAndIrrelevant)
{
    EXPECT_EQ(generate_prefix("anything", Language::en, {}), "");
    std::vector<KnowledgeEntry> es{entry(entity("ORG", "Apple"), 2)};
    EXPECT_EQ(generate_prefix("Pineapple juice", Language::en, es), "");
}

TEST(Prefix, BudgetKeepsHighestCount)
{
    std::vector<KnowledgeEntry> es{entry(entity("LOC", "Tokyo"), 2), entry(entity("ORG", "Google"), 5)};
    const std::string text = "James worked for Google in Tokyo.";
    EXPECT_EQ(generate_prefix(text, Language::en, es, 40), "Note: the type of Google is ORG;");
    EXPECT_EQ(generate_prefix(text, Language::en, es), "Note: the type of Google is ORG; the type of Tokyo is LOC;");
    EXPECT_EQ(generate_prefix(text, Language::en, es, 10), "");
}

TEST(Prefix, RelationNeedsBothSurfaces)
{
    std::vector<KnowledgeEntry> es{entry(Fact{FactKind::relation, "person-company", {"James", "Google"}}, 3)};
    EXPECT_EQ(generate_prefix("James worked for Google", Language::en, es),
              "Note: the relation between James and Google is person-company;");
    EXPECT_EQ(generate_prefix("James worked", Language::en, es), "");
}

TEST(Facts, DiffOfAcceptedMarkups)
{
    auto o = fixtures::re();
    AnnotatedDocument doc("d", fixtures::johnson, Language::en);
    auto before = accepted_facts(doc);
    auto p = fixtures::mark(doc, o, "Person", "Mr.Johnson");
    auto org = fixtures::mark(doc, o, "Organization", "WBZ-TV", MarkupState::suggested);
    auto r = fixtures::link(doc, o, "person-company", p.id, org.id);
    auto after = accepted_facts(doc);
    ASSERT_EQ(after.size(), 2u);  // suggested markups are not facts
    auto events = diff_facts(before, after, 5);
    EXPECT_EQ(events.size(), 2u);
    for (const auto& e : events) EXPECT_EQ(e.change, FactEvent::Change::added);

    auto removed_events = diff_facts(after, before, 6);
    EXPECT_EQ(removed_events.size(), 2u);
    EXPECT_EQ(removed_events[0].change, FactEvent::Change::removed);
}
