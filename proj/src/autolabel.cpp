#include "kgmark/autolabel.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "kgmark/error.hpp"

namespace kgmark::autolabel {

// ---- templates ----------------------------------------------------------------------

TemplateStore::TemplateStore(std::filesystem::path root) : root_(std::move(root)) {}

std::string TemplateStore::get(TaskKind task, Language lang, const std::string& stage) const
{
    auto path = root_ / to_string(lang) / to_string(task) / (stage + ".txt");
    std::ifstream in(path);
    if (!in)
        fail(ErrorCode::not_found, std::string("missing prompt template for (") + to_string(task) + ", " +
                                       to_string(lang) + ", " + stage + "): " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto s = ss.str();
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::string render_template(const std::string& tmpl, const Bindings& bindings)
{
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string::npos) fail(ErrorCode::validation, "unterminated template slot");
        out.append(tmpl, pos, open - pos);
        auto name = trim(std::string_view(tmpl).substr(open + 2, close - open - 2));
        auto it = bindings.find(name);
        if (it == bindings.end()) fail(ErrorCode::validation, "unbound template slot '" + name + "'");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

// ---- type lists ---------------------------------------------------------------------

namespace {

std::string join(const std::vector<std::string>& v, const char* sep)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

std::vector<std::string> event_roles(const Ontology& o, const std::string& event)
{
    std::vector<std::string> roles;
    for (const auto& r : o.relation_types)
        if (std::find(r.subject_types.begin(), r.subject_types.end(), event) != r.subject_types.end())
            roles.push_back(r.name);
    return roles;
}

std::vector<std::string> concrete_entity_names(const Ontology& o)
{
    std::vector<std::string> out;
    for (const auto& e : o.entity_types)
        if (!e.pseudo) out.push_back(e.name);
    return out;
}

} // namespace

std::string render_type_list(const Ontology& o)
{
    switch (o.task) {
    case TaskKind::ner: return "[" + join(concrete_entity_names(o), ", ") + "]";
    case TaskKind::re: {
        std::vector<std::string> parts;
        for (const auto& r : o.relation_types)
            parts.push_back(r.name + ": [" + join(r.subject_types, "|") + ", " + join(r.object_types, "|") + "]");
        return "{" + join(parts, ", ") + "}";
    }
    case TaskKind::ee: {
        std::vector<std::string> parts;
        for (const auto& e : concrete_entity_names(o)) parts.push_back(e + ": [" + join(event_roles(o, e), ", ") + "]");
        return "{" + join(parts, ", ") + "}";
    }
    }
    return {};
}

std::pair<std::vector<std::string>, std::vector<std::string>> type_list_to_scheme(TaskKind task,
                                                                                std::string_view type_list)
{
    std::string s = trim(type_list);
    std::vector<std::string> ents, rels;
    if (task == TaskKind::ner) {
        if (s.size() < 2 || s.front() != '[' || s.back() != ']') fail(ErrorCode::parse, "NER type list must be [..]");
        std::stringstream body(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(body, item, ',')) {
            auto t = trim(item);
            if (!t.empty()) ents.push_back(t);
        }
        return {ents, rels};
    }
    if (s.size() < 2 || s.front() != '{' || s.back() != '}') fail(ErrorCode::parse, "type list must be {..}");
    std::string body = s.substr(1, s.size() - 2);
    std::set<std::string> seen_types;
    std::size_t pos = 0;
    while (true) {
        auto lb = body.find('[', pos);
        if (lb == std::string::npos) break;
        auto rb = body.find(']', lb);
        if (rb == std::string::npos) fail(ErrorCode::parse, "unbalanced brackets in type list");
        std::string name = trim(body.substr(pos, lb - pos));
        if (!name.empty() && name.front() == ',') name = trim(name.substr(1));
        if (name.empty() || name.back() != ':') fail(ErrorCode::parse, "expected 'name: [...]' in type list");
        name = trim(name.substr(0, name.size() - 1));
        std::string slots = body.substr(lb + 1, rb - lb - 1);
        rels.push_back(name + "@[" + slots + "]");
        if (task == TaskKind::re) {
            std::stringstream ss(slots);
            std::string slot;
            while (std::getline(ss, slot, ',')) {
                std::stringstream alts(slot);
                std::string alt;
                while (std::getline(alts, alt, '|')) {
                    auto t = trim(alt);
                    if (!t.empty() && seen_types.insert(t).second) ents.push_back(t);
                }
            }
        }
        pos = rb + 1;
    }
    if (task == TaskKind::ee) ents.push_back(std::string(pseudo_token));
    return {ents, rels};
}

// ---- plan ---------------------------------------------------------------------------

std::string PromptPlan::first_message() const
{
    Bindings b{{"text", text}, {"type_list", type_list}};
    auto body = render_template(stages.front().template_text, b);
    if (prefix.empty()) return body;
    return prefix + "\n" + body;
}

PromptPlan build_plan(const TemplateStore& templates, Language lang, const std::string& text,
                      const Ontology& ontology, const std::string& prefix)
{
    if (trim(text).empty()) fail(ErrorCode::validation, "cannot auto-label empty text");
    PromptPlan plan;
    plan.task = ontology.task;
    plan.language = lang;
    plan.text = text;
    plan.ontology = ontology;
    plan.prefix = prefix;
    plan.type_list = render_type_list(ontology);
    auto task = ontology.task;
    plan.stages.push_back({"types", templates.get(task, lang, "types"), ReplyParser::list, false});
    switch (task) {
    case TaskKind::ner:
        plan.stages.push_back({"entities", templates.get(task, lang, "entities"), ReplyParser::list, true});
        break;
    case TaskKind::re:
        plan.stages.push_back({"pairs", templates.get(task, lang, "pairs"), ReplyParser::pairs, true});
        break;
    case TaskKind::ee:
        plan.stages.push_back({"arguments", templates.get(task, lang, "arguments"), ReplyParser::roles, true});
        plan.stages.push_back({"trigger", templates.get(task, lang, "trigger"), ReplyParser::trigger, true});
        break;
    }
    plan.reask_template = templates.get(task, lang, "reask");
    return plan;
}

// ---- reply parsing ------------------------------------------------------------------

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string strip_quotes(std::string s)
{
    static const std::vector<std::string> quotes = {"\"", "'", "`", "\xe2\x80\x9c", "\xe2\x80\x9d",
                                                    "\xe2\x80\x98", "\xe2\x80\x99"};
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        for (const auto& q : quotes) {
            if (starts_with(s, q)) {
                s = trim(s.substr(q.size()));
                changed = true;
            }
            if (s.size() >= q.size() && s.compare(s.size() - q.size(), q.size(), q) == 0) {
                s = trim(s.substr(0, s.size() - q.size()));
                changed = true;
            }
        }
    }
    return s;
}

std::string clean_item(std::string_view raw)
{
    std::string s = trim(raw);
    static const std::regex bullet(R"(^(?:[-*]|\xe2\x80\xa2|\d+[.)])\s+)");
    s = std::regex_replace(s, bullet, "", std::regex_constants::format_first_only);
    s = strip_quotes(trim(s));
    if (!s.empty() && s.back() == '.' && std::count(s.begin(), s.end(), '.') == 1) s.pop_back();
    // Chinese full stop
    if (s.size() >= 3 && s.compare(s.size() - 3, 3, "\xe3\x80\x82") == 0) s.resize(s.size() - 3);
    return strip_quotes(trim(s));
}

bool is_none(std::string_view raw)
{
    std::string f = fold_case(trim(raw));
    while (!f.empty() && (f.back() == '.' || f.back() == '!')) f.pop_back();
    if (f.size() >= 2 && f.front() == '[' && f.back() == ']') f = trim(f.substr(1, f.size() - 2));
    f = strip_quotes(f);
    if (f.empty()) return false;
    static const std::vector<std::string> exact = {"none", "no", "nothing", "n/a", "null", "nil", "无", "没有"};
    if (std::find(exact.begin(), exact.end(), f) != exact.end()) return true;
    return starts_with(f, "none") || starts_with(f, "nothing") || starts_with(f, "no ") ||
           f.find("none of the") != std::string::npos || f.find("there are no") != std::string::npos ||
           f.find("there is no") != std::string::npos || f.find("not present") != std::string::npos;
}

std::size_t matching(std::string_view s, std::size_t open, char o, char c)
{
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == o) ++depth;
        else if (s[i] == c && --depth == 0) return i;
    }
    return std::string_view::npos;
}

std::vector<std::string> split_any(std::string_view s, std::string_view seps)
{
    std::vector<std::string> out;
    std::size_t b = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || seps.find(s[i]) != std::string_view::npos) {
            out.emplace_back(s.substr(b, i - b));
            b = i + 1;
        }
    }
    return out;
}

std::vector<std::string> lines_of(std::string_view s)
{
    std::vector<std::string> out;
    for (auto& l : split_any(s, "\n")) {
        auto t = trim(l);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

// Junk such as "???" or "--" carries no letter, digit or non-ASCII character.
bool substantive(std::string_view item)
{
    return std::any_of(item.begin(), item.end(), [](char c) {
        auto u = static_cast<unsigned char>(c);
        return u >= 0x80 || std::isalnum(u);
    });
}

void push_items(std::vector<std::string>& out, std::string_view body, std::string_view seps)
{
    for (const auto& part : split_any(body, seps)) {
        auto item = clean_item(part);
        if (substantive(item) && !is_none(item)) out.push_back(item);
    }
}

// Table rows as cell lists, header and separator rows dropped.
std::vector<std::vector<std::string>> table_rows(std::string_view s)
{
    std::vector<std::vector<std::string>> rows;
    auto lines = lines_of(s);
    std::vector<std::size_t> table_line_idx;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].find('|') == std::string::npos) continue;
        auto cells = split_any(lines[li], "|");
        std::vector<std::string> kept;
        for (auto& c : cells) kept.push_back(trim(c));
        while (!kept.empty() && kept.front().empty()) kept.erase(kept.begin());
        while (!kept.empty() && kept.back().empty()) kept.pop_back();
        bool separator = !kept.empty() && std::all_of(kept.begin(), kept.end(), [](const std::string& c) {
            return !c.empty() && c.find_first_not_of("-: ") == std::string::npos;
        });
        if (separator) {
            if (!rows.empty()) rows.pop_back();  // the row above a separator is a header
            continue;
        }
        if (!kept.empty()) rows.push_back(std::move(kept));
    }
    return rows;
}

} // namespace

std::optional<std::vector<std::string>> parse_list_reply(std::string_view reply)
{
    std::string s = trim(reply);
    if (s.empty()) return std::nullopt;
    if (is_none(s)) return std::vector<std::string>{};

    std::vector<std::string> out;
    if (auto lb = s.find('['); lb != std::string::npos) {
        auto rb = matching(s, lb, '[', ']');
        if (rb != std::string::npos) {
            push_items(out, std::string_view(s).substr(lb + 1, rb - lb - 1), ",;\n");
            return out;
        }
    }
    if (s.find('|') != std::string::npos) {
        for (const auto& row : table_rows(s)) {
            auto item = clean_item(row.back());
            if (substantive(item) && !is_none(item)) out.push_back(item);
        }
    } else {
        auto lines = lines_of(s);
        std::erase_if(lines, [](const std::string& l) { return l.back() == ':'; });
        if (lines.size() > 1) {
            for (const auto& l : lines) push_items(out, l, ",;");
        } else if (!lines.empty()) {
            std::string_view line = lines.front();
            if (auto colon = line.rfind(':'); colon != std::string_view::npos) line = line.substr(colon + 1);
            push_items(out, line, ",;");
        }
    }
    if (out.empty()) return std::nullopt;
    return out;
}

namespace {

std::optional<std::pair<std::string, std::string>> split_pair(std::string_view body)
{
    auto parts = split_any(body, ",");
    if (parts.size() < 2) {
        for (std::string_view sep : {"->", "\t"}) {
            if (auto p = body.find(sep); p != std::string_view::npos)
                parts = {std::string(body.substr(0, p)), std::string(body.substr(p + sep.size()))};
        }
    }
    if (parts.size() < 2) return std::nullopt;
    auto a = clean_item(parts.front());
    auto b = clean_item(parts.back());
    if (!substantive(a) || !substantive(b)) return std::nullopt;
    return std::make_pair(a, b);
}

} // namespace

std::optional<std::vector<std::pair<std::string, std::string>>> parse_pairs_reply(std::string_view reply)
{
    std::string s = trim(reply);
    if (s.empty()) return std::nullopt;
    if (is_none(s)) return std::vector<std::pair<std::string, std::string>>{};

    std::vector<std::pair<std::string, std::string>> out;
    bool bracketed = false;
    for (std::size_t pos = s.find('('); pos != std::string::npos; pos = s.find('(', pos)) {
        auto close = matching(s, pos, '(', ')');
        if (close == std::string::npos) break;
        if (auto p = split_pair(std::string_view(s).substr(pos + 1, close - pos - 1))) out.push_back(*p);
        bracketed = true;
        pos = close + 1;
    }
    if (!bracketed) {
        if (auto lb = s.find('['); lb != std::string::npos) {
            auto rb = matching(s, lb, '[', ']');
            if (rb != std::string::npos) {
                bracketed = true;
                std::string_view inner = std::string_view(s).substr(lb + 1, rb - lb - 1);
                for (std::size_t pos = inner.find('['); pos != std::string_view::npos; pos = inner.find('[', pos)) {
                    auto close = matching(inner, pos, '[', ']');
                    if (close == std::string_view::npos) break;
                    if (auto p = split_pair(inner.substr(pos + 1, close - pos - 1))) out.push_back(*p);
                    pos = close + 1;
                }
                if (out.empty() && inner.find('[') == std::string_view::npos) {
                    if (auto p = split_pair(inner)) out.push_back(*p);
                }
            }
        }
    }
    if (!bracketed) {
        if (s.find('|') != std::string::npos) {
            for (const auto& row : table_rows(s)) {
                if (row.size() < 2) continue;
                auto a = clean_item(row.front()), b = clean_item(row.back());
                if (!a.empty() && !b.empty()) out.emplace_back(a, b);
            }
        } else {
            for (const auto& l : lines_of(s)) {
                if (l.back() == ':') continue;
                if (auto p = split_pair(l)) out.push_back(*p);
            }
        }
    }
    if (out.empty() && !bracketed) return std::nullopt;
    return out;
}

std::optional<std::vector<std::pair<std::string, std::vector<std::string>>>> parse_roles_reply(std::string_view reply)
{
    std::string s = trim(reply);
    if (s.empty()) return std::nullopt;
    using Result = std::vector<std::pair<std::string, std::vector<std::string>>>;
    if (is_none(s)) return Result{};
    if (s.front() == '{') {
        auto close = matching(s, 0, '{', '}');
        if (close != std::string::npos) s = s.substr(1, close - 1);
    }

    static const std::regex next_key(R"(,\s*["']?[^,:\[\]\n"']+["']?\s*:)");
    Result out;
    std::size_t pos = 0;
    auto skip = [&] {
        while (pos < s.size() && std::string_view(" \t\r\n,;{}").find(s[pos]) != std::string_view::npos) ++pos;
    };
    while (true) {
        skip();
        if (pos >= s.size()) break;
        auto colon = s.find(':', pos);
        auto nl = s.find('\n', pos);
        if (colon == std::string::npos || (nl != std::string::npos && nl < colon)) {
            if (nl == std::string::npos) break;
            pos = nl + 1;
            continue;
        }
        auto key = clean_item(std::string_view(s).substr(pos, colon - pos));
        pos = colon + 1;
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
        std::vector<std::string> values;
        if (pos < s.size() && s[pos] == '[') {
            auto rb = matching(s, pos, '[', ']');
            auto end = rb == std::string::npos ? s.size() : rb;
            push_items(values, std::string_view(s).substr(pos + 1, end - pos - 1), ",;\n");
            pos = rb == std::string::npos ? s.size() : rb + 1;
        } else {
            auto end = std::min(s.find('\n', pos), s.find(';', pos));
            if (end == std::string::npos) end = s.size();
            std::smatch m;
            std::string rest = s.substr(pos, end - pos);
            if (std::regex_search(rest, m, next_key)) end = pos + static_cast<std::size_t>(m.position(0));
            auto v = clean_item(std::string_view(s).substr(pos, end - pos));
            if (!v.empty() && !is_none(v)) values.push_back(v);
            pos = end;
        }
        if (!key.empty()) out.emplace_back(key, std::move(values));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::optional<std::string> parse_trigger_reply(std::string_view reply)
{
    auto lines = lines_of(reply);
    if (lines.empty()) return std::nullopt;
    std::string line = lines.front();
    auto folded = fold_case(line);
    for (std::string_view lead : {"the trigger word is", "trigger word is", "trigger word", "trigger"}) {
        if (starts_with(folded, lead)) {
            line = trim(line.substr(lead.size()));
            if (!line.empty() && line.front() == ':') line = trim(line.substr(1));
            if (line.empty() && lines.size() > 1) line = lines[1];
            break;
        }
    }
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') line = line.substr(1, line.size() - 2);
    auto item = clean_item(line);
    if (!substantive(item) || is_none(item)) return std::nullopt;
    return item;
}

std::string format_hint(ReplyParser p)
{
    switch (p) {
    case ReplyParser::list: return "[item 1, item 2, ...]";
    case ReplyParser::pairs: return "[(subject 1, object 1), (subject 2, object 2), ...]";
    case ReplyParser::roles: return "{role 1: [argument 1, ...], role 2: [argument 1, ...]}";
    case ReplyParser::trigger: return "the trigger word or phrase only, copied from the sentence";
    }
    return {};
}

// ---- execution ----------------------------------------------------------------------

namespace {

class Conversation {
public:
    Conversation(GenerationClient& client, const PromptPlan& plan, ExecutionResult& result)
        : client_(client), plan_(plan), result_(result)
    {
    }

    template <class Parsed>
    std::optional<Parsed> ask(const StageSpec& stage, const std::string& type, const std::string& content,
                              std::optional<Parsed> (*parse)(std::string_view))
    {
        if (auto parsed = parse(send(stage, type, content, false))) return parsed;
        auto reask = render_template(plan_.reask_template, {{"format", format_hint(stage.parser)}});
        if (auto parsed = parse(send(stage, type, reask, true))) return parsed;
        result_.warnings.push_back({stage.id, type, "unparseable reply after re-ask; skipped"});
        return std::nullopt;
    }

private:
    std::string send(const StageSpec& stage, const std::string& type, const std::string& content, bool reask)
    {
        result_.transcript.push_back({"user", content});
        GenerationRequest req{result_.transcript, plan_.task, stage.id, type, reask};
        auto reply = client_.complete(req);
        result_.transcript.push_back({"assistant", reply});
        return reply;
    }

    GenerationClient& client_;
    const PromptPlan& plan_;
    ExecutionResult& result_;
};

bool looks_like_type_prefix(std::string_view p)
{
    return !p.empty() && p.find_first_of(" \t") == std::string_view::npos &&
           p.find_first_not_of("0123456789") != std::string_view::npos;
}

// Splits "TYPE:surface"; returns false when there is no such prefix.
bool split_typed(const std::string& item, std::string& type, std::string& surface)
{
    auto colon = item.find(':');
    if (colon == std::string::npos) return false;
    auto p = trim(std::string_view(item).substr(0, colon));
    if (!looks_like_type_prefix(p)) return false;
    type = p;
    surface = clean_item(std::string_view(item).substr(colon + 1));
    return true;
}

// Resolves the entity type of a relation endpoint from an optional typed prefix and the constraint.
std::optional<std::string> endpoint_type(const Ontology& o, const std::vector<std::string>& allowed,
                                         std::string& surface)
{
    std::string t, rest;
    if (split_typed(surface, t, rest)) {
        const auto* def = o.find_entity(t);
        if (def && !def->pseudo && o.entity_allowed(t, allowed)) {
            surface = rest;
            return t;
        }
    }
    if (allowed.size() == 1) return allowed.front();
    auto all = concrete_entity_names(o);
    if (allowed.empty() && all.size() == 1) return all.front();
    return std::nullopt;
}

} // namespace

ExecutionResult execute_plan(GenerationClient& client, const PromptPlan& plan)
{
    ExecutionResult result;
    Conversation conv(client, plan, result);
    const auto& o = plan.ontology;
    const auto& first = plan.stages.front();

    auto confirmed = conv.ask<std::vector<std::string>>(first, "", plan.first_message(), parse_list_reply);
    if (!confirmed) return result;

    std::vector<std::string> types;
    for (const auto& t : *confirmed) {
        bool declared = false;
        if (plan.task == TaskKind::re) declared = o.find_relation(t) != nullptr;
        else if (const auto* e = o.find_entity(t)) declared = !e->pseudo;
        if (!declared) {
            result.warnings.push_back({first.id, t, "dropped undeclared type '" + t + "'"});
            continue;
        }
        if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
    }

    Bindings base{{"text", plan.text}, {"type_list", plan.type_list}};
    std::vector<UnifiedTriple> raw;

    for (const auto& type : types) {
        if (plan.task == TaskKind::ner) {
            const auto& stage = plan.stages[1];
            auto b = base;
            b["type"] = type;
            auto items = conv.ask<std::vector<std::string>>(stage, type, render_template(stage.template_text, b),
                                                            parse_list_reply);
            if (!items) continue;
            for (const auto& item : *items) {
                std::string t = type, surface = item, typed, rest;
                if (split_typed(item, typed, rest)) {
                    t = typed;
                    surface = rest;
                }
                if (surface.empty()) continue;
                raw.push_back({t, surface, Term::pseudo(), Term::pseudo(), Term::pseudo(), {}, {}});
            }
        } else if (plan.task == TaskKind::re) {
            const auto& stage = plan.stages[1];
            const auto* rel = o.find_relation(type);
            auto b = base;
            b["relation"] = type;
            b["subject_types"] = join(rel->subject_types, "|");
            b["object_types"] = join(rel->object_types, "|");
            auto pairs = conv.ask<std::vector<std::pair<std::string, std::string>>>(
                stage, type, render_template(stage.template_text, b), parse_pairs_reply);
            if (!pairs) continue;
            for (auto [s, ob] : *pairs) {
                auto st = endpoint_type(o, rel->subject_types, s);
                auto ot = endpoint_type(o, rel->object_types, ob);
                if (!st || !ot) {
                    result.warnings.push_back({stage.id, type, "cannot determine endpoint types for (" + s + ", " + ob + ")"});
                    continue;
                }
                raw.push_back({*st, s, Term(type), Term(*ot), Term(ob), {}, {}});
            }
        } else {
            const auto& arg_stage = plan.stages[1];
            const auto& trig_stage = plan.stages[2];
            auto roles = event_roles(o, type);
            auto b = base;
            b["event_type"] = type;
            b["roles"] = "[" + join(roles, ", ") + "]";
            auto args = conv.ask<std::vector<std::pair<std::string, std::vector<std::string>>>>(
                arg_stage, type, render_template(arg_stage.template_text, b), parse_roles_reply);
            auto trigger = conv.ask<std::string>(trig_stage, type, render_template(trig_stage.template_text, b),
                                                 parse_trigger_reply);
            if (!trigger) continue;
            std::size_t before = raw.size();
            if (args) {
                for (const auto& [role, values] : *args) {
                    if (std::find(roles.begin(), roles.end(), role) == roles.end()) {
                        result.warnings.push_back({arg_stage.id, type, "dropped undeclared role '" + role + "'"});
                        continue;
                    }
                    for (const auto& v : values)
                        raw.push_back({type, *trigger, Term(role), Term::pseudo(), Term(v), {}, {}});
                }
            }
            if (raw.size() == before)
                raw.push_back({type, *trigger, Term::pseudo(), Term::pseudo(), Term::pseudo(), {}, {}});
        }
    }

    // membership filter over the final triples
    for (auto& t : raw) {
        const auto* st = o.find_entity(t.subject_type);
        bool ok = st && !st->pseudo;
        if (ok && !t.relation.is_pseudo()) ok = o.find_relation(t.relation.value()) != nullptr;
        if (ok && !t.object_type.is_pseudo()) {
            const auto* ot = o.find_entity(t.object_type.value());
            ok = ot && !ot->pseudo;
        }
        if (!ok) {
            result.warnings.push_back({"filter", t.subject_type,
                                       "dropped triple with undeclared type: " + t.subject_type + ":" + t.subject});
            continue;
        }
        result.triples.push_back(std::move(t));
    }
    return result;
}

// ---- materialization ----------------------------------------------------------------

MaterializeResult materialize(AnnotatedDocument& doc, const Ontology& o, const std::vector<UnifiedTriple>& triples)
{
    MaterializeResult result;
    MarkupBatch batch(doc);
    using Claim = std::tuple<int, int, std::string>;
    std::set<Claim> claimed;
    std::map<std::pair<std::string, std::string>, std::string> endpoints;  // (label, folded surface) -> id

    auto locate = [&](const std::string& label, const std::string& surface,
                      const std::optional<Anchor>& anchor) -> std::optional<TokenSpan> {
        const auto& view = batch.view();
        if (anchor && anchor->start >= 0 && anchor->end >= anchor->start &&
            static_cast<std::size_t>(anchor->end) < view.tokens().size() &&
            iequals(span_text(view.text(), view.tokens(), anchor->start, anchor->end), surface) &&
            !claimed.count({anchor->start, anchor->end, label}))
            return TokenSpan{anchor->start, anchor->end};
        for (auto occ : find_occurrences(view.text(), view.tokens(), trim(surface)))
            if (!claimed.count({occ.first, occ.second, label})) return occ;
        return std::nullopt;
    };

    auto add_entity = [&](const std::string& label, TokenSpan span) {
        claimed.insert({span.first, span.second, label});
        auto r = batch.add(o, EntityDraft{label, span.first, span.second}, MarkupState::suggested);
        if (r.created) result.created.push_back(r.markup);
        return r.markup.id;
    };

    struct Pending {
        std::string label, surface;
        std::optional<std::string> id;
        std::optional<TokenSpan> span;
    };
    auto resolve = [&](const std::string& label, const std::string& surface,
                       const std::optional<Anchor>& anchor) -> std::optional<Pending> {
        auto key = std::make_pair(label, fold_case(trim(surface)));
        if (auto it = endpoints.find(key); it != endpoints.end()) return Pending{label, surface, it->second, {}};
        auto span = locate(label, surface, anchor);
        if (!span) return std::nullopt;
        return Pending{label, surface, std::nullopt, span};
    };
    auto realize = [&](Pending& p) {
        if (p.id) return *p.id;
        auto id = add_entity(p.label, *p.span);
        endpoints[{p.label, fold_case(trim(p.surface))}] = id;
        return id;
    };

    const auto* pseudo = o.pseudo_entity();
    for (const auto& t : triples) {
        const auto* st = o.find_entity(t.subject_type);
        if (!st) {
            result.unanchorable.push_back({t, "unknown entity type '" + t.subject_type + "'"});
            continue;
        }
        if (o.task == TaskKind::ner) {
            auto span = locate(t.subject_type, t.subject, t.subject_anchor);
            if (!span) {
                result.unanchorable.push_back({t, "surface '" + t.subject + "' not found in text"});
                continue;
            }
            add_entity(t.subject_type, *span);
            continue;
        }

        const RelationTypeDef* rel = t.relation.is_pseudo() ? nullptr : o.find_relation(t.relation.value());
        if (!t.relation.is_pseudo() && !rel) {
            result.unanchorable.push_back({t, "unknown relation type '" + t.relation.str() + "'"});
            continue;
        }
        std::string object_label;
        if (o.task == TaskKind::re) {
            if (t.object_type.is_pseudo() || t.object.is_pseudo() || !o.find_entity(t.object_type.value())) {
                result.unanchorable.push_back({t, "RE triple needs a typed object"});
                continue;
            }
            object_label = t.object_type.value();
        } else if (pseudo) {
            object_label = pseudo->name;
        } else {
            result.unanchorable.push_back({t, "EE ontology lacks the pseudo entity type"});
            continue;
        }
        if (rel && !o.relation_admits(*rel, t.subject_type, object_label)) {
            result.unanchorable.push_back({t, "relation constraint rejects this triple"});
            continue;
        }

        auto subj = resolve(t.subject_type, t.subject, t.subject_anchor);
        if (!subj) {
            result.unanchorable.push_back({t, "surface '" + t.subject + "' not found in text"});
            continue;
        }
        if (!rel) {  // argument-free event
            realize(*subj);
            continue;
        }
        auto obj = resolve(object_label, t.object.value(), t.object_anchor);
        if (!obj) {
            result.unanchorable.push_back({t, "surface '" + t.object.value() + "' not found in text"});
            continue;
        }
        auto sid = realize(*subj);
        auto oid = realize(*obj);
        auto r = batch.add(o, RelationDraft{rel->name, sid, oid}, MarkupState::suggested);
        if (r.created) result.created.push_back(r.markup);
    }
    batch.commit();
    return result;
}

} // namespace kgmark::autolabel
