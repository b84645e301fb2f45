#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgmark/generation.hpp"
#include "kgmark/markup.hpp"
#include "kgmark/scheme.hpp"
#include "kgmark/text.hpp"

namespace kgmark::autolabel {

/// Prompt templates on disk: <root>/<lang>/<task>/<stage>.txt, with `{{slot}}` placeholders.
class TemplateStore {
public:
    explicit TemplateStore(std::filesystem::path root);

    /// Throws Error(not_found) when the file is missing.
    std::string get(TaskKind task, Language lang, const std::string& stage) const;
    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

using Bindings = std::map<std::string, std::string>;

/// Replaces every `{{name}}`; throws Error(validation) on an unbound slot.
std::string render_template(const std::string& tmpl, const Bindings& bindings);

/// NER `[A, B]`, RE `{rel: [S, O], ...}`, EE `{event: [role, ...], ...}`.
std::string render_type_list(const Ontology& o);

/// Scheme text lines equivalent to a rendered type list.
std::pair<std::vector<std::string>, std::vector<std::string>> type_list_to_scheme(TaskKind task,
                                                                                std::string_view type_list);

enum class ReplyParser { list, pairs, roles, trigger };

struct StageSpec {
    std::string id;  // "types", "entities", "pairs", "arguments", "trigger"
    std::string template_text;
    ReplyParser parser = ReplyParser::list;
    bool per_type = false;  // repeated for every type confirmed by the first stage
};

struct PromptPlan {
    TaskKind task = TaskKind::ner;
    Language language = Language::en;
    std::string text;
    Ontology ontology;
    std::string prefix;
    std::string type_list;
    std::vector<StageSpec> stages;
    std::string reask_template;

    /// Stage-1 message: the prefix (when present), a newline, then the rendered template.
    std::string first_message() const;
};

PromptPlan build_plan(const TemplateStore& templates, Language lang, const std::string& text,
                      const Ontology& ontology, const std::string& prefix = {});

// ---- reply parsing ------------------------------------------------------------------

/// Accepts `[a, b]`, markdown tables, bullet lists and loose "... are: a, b" replies.
/// An explicit "none"-style answer parses to an empty list; gibberish is nullopt.
std::optional<std::vector<std::string>> parse_list_reply(std::string_view reply);
std::optional<std::vector<std::pair<std::string, std::string>>> parse_pairs_reply(std::string_view reply);
std::optional<std::vector<std::pair<std::string, std::vector<std::string>>>> parse_roles_reply(std::string_view reply);
std::optional<std::string> parse_trigger_reply(std::string_view reply);

std::string format_hint(ReplyParser p);

struct Warning {
    std::string stage;
    std::string type;
    std::string message;
};

struct ExecutionResult {
    std::vector<UnifiedTriple> triples;
    std::vector<Warning> warnings;
    std::vector<ChatMessage> transcript;
};

/// Runs the stages in order over one conversation. Unparseable replies get one stricter
/// re-ask, then the item is skipped with a warning. Types outside the ontology are dropped.
ExecutionResult execute_plan(GenerationClient& client, const PromptPlan& plan);

// ---- materialization ----------------------------------------------------------------

struct Unanchorable {
    UnifiedTriple triple;
    std::string reason;
};

struct MaterializeResult {
    std::vector<Markup> created;
    std::vector<Unanchorable> unanchorable;
};

/// Anchors triples on the first unclaimed token-aligned case-insensitive occurrence
/// and adds them as suggested markups in one batch.
MaterializeResult materialize(AnnotatedDocument& doc, const Ontology& o, const std::vector<UnifiedTriple>& triples);

} // namespace kgmark::autolabel
