#include <gtest/gtest.h>

#include "kgmark/text.hpp"

using namespace kgmark;

namespace {

std::vector<std::string> texts(const std::vector<Token>& toks)
{
    std::vector<std::string> out;
    for (const auto& t : toks) out.push_back(t.text);
    return out;
}

} // namespace

TEST(Tokenize, EnglishSplitsPunctuation)
{
    auto toks = tokenize("James worked for Google in Tokyo, the capital of Japan.", Language::en);
    EXPECT_EQ(texts(toks), (std::vector<std::string>{"James", "worked", "for", "Google", "in", "Tokyo", ",", "the",
                                                      "capital", "of", "Japan", "."}));
    EXPECT_EQ(toks[5].begin, 27u);
    EXPECT_EQ(toks[5].end, 32u);
}

TEST(Tokenize, OffsetsSliceTheSource)
{
    const std::string s = "  Mr.Johnson  left WBZ-TV\tin 2005 ";
    for (const auto& t : tokenize(s, Language::en)) EXPECT_EQ(s.substr(t.begin, t.end - t.begin), t.text);
}

TEST(Tokenize, ChineseIsPerCharacter)
{
    auto toks = tokenize("小明 在北京", Language::zh);
    EXPECT_EQ(texts(toks), (std::vector<std::string>{"小", "明", "在", "北", "京"}));
    EXPECT_EQ(toks[2].begin, 7u);
}

TEST(Tokenize, EmptyText)
{
    EXPECT_TRUE(tokenize("", Language::en).empty());
    EXPECT_TRUE(tokenize("   ", Language::zh).empty());
}

TEST(Occurrences, TokenAlignedAndCaseInsensitive)
{
    const std::string s = "Google, google and GOOGLEplex; GOOGLE.";
    auto toks = tokenize(s, Language::en);
    auto occ = find_occurrences(s, toks, "google");
    ASSERT_EQ(occ.size(), 3u);
    EXPECT_EQ(span_text(s, toks, occ[2].first, occ[2].second), "GOOGLE");
}

TEST(Occurrences, MultiTokenSurface)
{
    const std::string s = "Yesterday Bob and his wife got married. bob AND his wife!";
    auto toks = tokenize(s, Language::en);
    auto occ = find_occurrences(s, toks, "Bob and his wife");
    ASSERT_EQ(occ.size(), 2u);
    EXPECT_EQ(occ[0], (TokenSpan{1, 4}));
}

TEST(Occurrences, EmptyNeedleMatchesNothing)
{
    const std::string s = "abc";
    EXPECT_TRUE(find_occurrences(s, tokenize(s, Language::en), "").empty());
}

TEST(Utf8, LengthCountsCodepoints)
{
    EXPECT_EQ(utf8_length("北京a"), 3u);
    EXPECT_EQ(utf8_chars("a北").size(), 2u);
}

TEST(Language, ParseRejectsUnknown)
{
    EXPECT_EQ(parse_language("zh"), Language::zh);
    EXPECT_ANY_THROW(parse_language("fr"));
}
