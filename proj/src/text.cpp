#include "kgmark/text.hpp"

#include <algorithm>

#include "kgmark/error.hpp"

namespace kgmark {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c)
{
    return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
           (c >= 0x7b && c <= 0x7e);
}

// Decodes the code point at `pos`; returns its byte length. Stray bytes count as one.
std::size_t decode(std::string_view s, std::size_t pos, char32_t& cp)
{
    auto b0 = static_cast<unsigned char>(s[pos]);
    std::size_t len = 1;
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    if ((b0 & 0xe0) == 0xc0) {
        len = 2;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        cp = b0;
        return 1;
    }
    if (pos + len > s.size()) {
        cp = b0;
        return 1;
    }
    for (std::size_t k = 1; k < len; ++k) {
        auto b = static_cast<unsigned char>(s[pos + k]);
        if ((b & 0xc0) != 0x80) {
            cp = b0;
            return 1;
        }
        cp = (cp << 6) | (b & 0x3f);
    }
    return len;
}

bool is_cjk(char32_t cp)
{
    return (cp >= 0x2e80 && cp <= 0x9fff) || (cp >= 0xf900 && cp <= 0xfaff) || (cp >= 0xff00 && cp <= 0xffef) ||
           (cp >= 0x20000 && cp <= 0x2ffff);
}

} // namespace

Language parse_language(std::string_view s)
{
    if (s == "en") return Language::en;
    if (s == "zh") return Language::zh;
    fail(ErrorCode::validation, "unknown language '" + std::string(s) + "'");
}

const char* to_string(Language l) { return l == Language::en ? "en" : "zh"; }

std::vector<Token> tokenize(std::string_view text, Language lang)
{
    std::vector<Token> out;
    std::size_t pos = 0;
    std::size_t run_begin = std::string_view::npos;

    auto close_run = [&](std::size_t at) {
        if (run_begin != std::string_view::npos) {
            out.push_back({std::string(text.substr(run_begin, at - run_begin)), run_begin, at});
            run_begin = std::string_view::npos;
        }
    };

    while (pos < text.size()) {
        auto c = static_cast<unsigned char>(text[pos]);
        if (is_space(c)) {
            close_run(pos);
            ++pos;
            continue;
        }
        char32_t cp = 0;
        std::size_t len = decode(text, pos, cp);
        bool single = lang == Language::zh || (cp < 0x80 && is_ascii_punct(c)) || is_cjk(cp);
        if (single) {
            close_run(pos);
            out.push_back({std::string(text.substr(pos, len)), pos, pos + len});
        } else if (run_begin == std::string_view::npos) {
            run_begin = pos;
        }
        pos += len;
    }
    close_run(pos);
    return out;
}

std::string span_text(std::string_view text, std::span<const Token> tokens, int start, int end)
{
    if (start < 0 || end < start || static_cast<std::size_t>(end) >= tokens.size())
        fail(ErrorCode::validation, "token span out of range");
    auto b = tokens[start].begin;
    auto e = tokens[end].end;
    return std::string(text.substr(b, e - b));
}

std::string fold_case(std::string_view s)
{
    std::string out(s);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
        if (x != y) return false;
    }
    return true;
}

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::size_t utf8_length(std::string_view s)
{
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < s.size();) {
        char32_t cp;
        pos += decode(s, pos, cp);
        ++n;
    }
    return n;
}

std::vector<std::string> utf8_chars(std::string_view s)
{
    std::vector<std::string> out;
    for (std::size_t pos = 0; pos < s.size();) {
        char32_t cp;
        auto len = decode(s, pos, cp);
        out.emplace_back(s.substr(pos, len));
        pos += len;
    }
    return out;
}

std::vector<TokenSpan> find_occurrences(std::string_view text, std::span<const Token> tokens,
                                        std::string_view needle)
{
    std::vector<TokenSpan> out;
    if (needle.empty() || tokens.empty()) return out;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto b = tokens[i].begin;
        auto e = b + needle.size();
        if (e > text.size() || !iequals(text.substr(b, needle.size()), needle)) continue;
        // the match must end exactly on a token end
        auto it = std::lower_bound(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.end(), e,
                                   [](const Token& t, std::size_t off) { return t.end < off; });
        if (it != tokens.end() && it->end == e)
            out.emplace_back(static_cast<int>(i), static_cast<int>(it - tokens.begin()));
    }
    return out;
}

} // namespace kgmark
