#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kgmark {

enum class TaskKind { ner, re, ee };

TaskKind parse_task(std::string_view s);
const char* to_string(TaskKind t);

/// Serialized form of the pseudo token.
inline constexpr std::string_view pseudo_token = "_";

/// A triple slot that is either a concrete string or the pseudo token.
class Term {
public:
    Term() = default;  // pseudo
    Term(std::string value) : value_(std::move(value)) {}
    Term(const char* value) : value_(std::string(value)) {}

    static Term pseudo() { return Term{}; }
    /// "_" maps back to the pseudo token.
    static Term parse(std::string_view s);

    bool is_pseudo() const noexcept { return !value_.has_value(); }
    const std::string& value() const;
    std::string str() const { return value_ ? *value_ : std::string(pseudo_token); }

    friend auto operator<=>(const Term&, const Term&) = default;
    friend bool operator==(const Term&, const Term&) = default;

private:
    std::optional<std::string> value_;
};

/// Inclusive token range anchoring a surface in a document.
struct Anchor {
    int start = 0;
    int end = 0;

    friend auto operator<=>(const Anchor&, const Anchor&) = default;
    friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// (S-Type:S, R, O-Type:O)
struct UnifiedTriple {
    std::string subject_type;
    std::string subject;
    Term relation;
    Term object_type;
    Term object;
    std::optional<Anchor> subject_anchor;
    std::optional<Anchor> object_anchor;

    friend auto operator<=>(const UnifiedTriple&, const UnifiedTriple&) = default;
    friend bool operator==(const UnifiedTriple&, const UnifiedTriple&) = default;
};

// ---- native annotation records -------------------------------------------------

struct Mention {
    std::string type;
    std::string text;
    std::optional<Anchor> anchor;

    friend auto operator<=>(const Mention&, const Mention&) = default;
    friend bool operator==(const Mention&, const Mention&) = default;
};

struct NerRecord {
    Mention entity;

    friend auto operator<=>(const NerRecord&, const NerRecord&) = default;
    friend bool operator==(const NerRecord&, const NerRecord&) = default;
};

struct ReRecord {
    Mention subject;
    std::string relation;
    Mention object;

    friend auto operator<=>(const ReRecord&, const ReRecord&) = default;
    friend bool operator==(const ReRecord&, const ReRecord&) = default;
};

struct EventArgument {
    std::string role;
    std::string text;
    std::optional<Anchor> anchor;

    friend auto operator<=>(const EventArgument&, const EventArgument&) = default;
    friend bool operator==(const EventArgument&, const EventArgument&) = default;
};

struct EeRecord {
    std::string event_type;
    std::string trigger;
    std::optional<Anchor> trigger_anchor;
    std::vector<EventArgument> arguments;

    friend auto operator<=>(const EeRecord&, const EeRecord&) = default;
    friend bool operator==(const EeRecord&, const EeRecord&) = default;
};

using NativeRecord = std::variant<NerRecord, ReRecord, EeRecord>;

/// Canonical order: records sorted, event arguments sorted. Two record sets are
/// equal modulo triple order iff their canonical forms are equal.
std::vector<NativeRecord> canonical(std::vector<NativeRecord> records);

// ---- ontology -------------------------------------------------------------------

struct EntityTypeDef {
    std::string id;
    std::string name;
    std::string color;
    std::optional<std::string> parent;
    bool pseudo = false;
};

struct RelationTypeDef {
    std::string id;
    std::string name;
    std::vector<std::string> subject_types;  // empty: unconstrained
    std::vector<std::string> object_types;
    std::optional<std::string> parent;
};

struct Ontology {
    TaskKind task = TaskKind::ner;
    std::vector<EntityTypeDef> entity_types;
    std::vector<RelationTypeDef> relation_types;

    const EntityTypeDef* find_entity(std::string_view name) const;
    const RelationTypeDef* find_relation(std::string_view name) const;
    const EntityTypeDef* entity_by_id(std::string_view id) const;
    const RelationTypeDef* relation_by_id(std::string_view id) const;
    const EntityTypeDef* pseudo_entity() const;

    /// True when `type` or one of its ancestors is in `allowed` (or `allowed` is empty).
    bool entity_allowed(std::string_view type, const std::vector<std::string>& allowed) const;
    bool relation_admits(const RelationTypeDef& rel, std::string_view subject_type,
                         std::string_view object_type) const;
};

struct Violation {
    enum class Kind { duplicate_name, dangling_parent, cycle, unknown_constraint_type, pseudo_count, empty_name };
    Kind kind;
    std::string message;
};

std::vector<Violation> validate_ontology(const Ontology& o);

/// Parses scheme text lines. Relation/event lines are `name@[a, b, ...]`; a slot may
/// list alternatives as `A|B`. Any name may be written as a `parent/child` path, which
/// declares the parent (if needed) and records the hierarchy. For EE the relation lines
/// are `event-type@[role, ...]`: events become entity types, roles become relations
/// constrained to subject {events using the role} and object {_}.
/// Throws Error(parse) naming the 1-based line number.
Ontology parse_scheme_text(TaskKind task, const std::vector<std::string>& entity_lines,
                           const std::vector<std::string>& relation_lines);

/// Scheme text lines that `parse_scheme_text` maps back onto `o`.
std::pair<std::vector<std::string>, std::vector<std::string>> render_scheme_text(const Ontology& o);

// ---- transformations --------------------------------------------------------------

/// Checks shape and non-empty surfaces only.
std::vector<UnifiedTriple> to_unified(TaskKind task, const NativeRecord& record);
/// Also rejects types absent from the ontology.
std::vector<UnifiedTriple> to_unified(const Ontology& o, const NativeRecord& record);

/// Inverse of to_unified. EE triples group into one event iff subject type, trigger
/// surface and trigger anchor all match. Throws Error(ambiguity) for groups that
/// cannot be regrouped.
std::vector<NativeRecord> from_unified(TaskKind task, const std::vector<UnifiedTriple>& triples);

} // namespace kgmark
