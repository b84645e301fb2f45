#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgmark {

enum class Language { en, zh };

Language parse_language(std::string_view s);
const char* to_string(Language l);

/// One token of a document. `begin`/`end` are byte offsets into the raw text, end exclusive.
struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const Token&, const Token&) = default;
};

/// English: whitespace separates tokens, every ASCII punctuation character and every
/// CJK code point is a token on its own, other runs group. Chinese: one token per
/// non-whitespace code point.
std::vector<Token> tokenize(std::string_view text, Language lang);

/// Raw text covered by tokens [start, end], inclusive.
std::string span_text(std::string_view text, std::span<const Token> tokens, int start, int end);

/// ASCII case folding. Non-ASCII bytes pass through untouched.
std::string fold_case(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

std::string trim(std::string_view s);

/// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view s);
/// The string split into one string per code point.
std::vector<std::string> utf8_chars(std::string_view s);

using TokenSpan = std::pair<int, int>;

/// Every token-aligned case-insensitive occurrence of `needle`, as inclusive
/// token index pairs, in document order.
std::vector<TokenSpan> find_occurrences(std::string_view text, std::span<const Token> tokens,
                                        std::string_view needle);

} // namespace kgmark
