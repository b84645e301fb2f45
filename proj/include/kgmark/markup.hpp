#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgmark/scheme.hpp"
#include "kgmark/text.hpp"

namespace kgmark {

/// One stored annotation. Field set mirrors the exported markup attributes.
struct Markup {
    bool is_entity = true;
    bool suggested = false;
    std::string id;
    std::string name;      // type name
    std::string label_id;  // ontology type id
    std::optional<std::string> source;  // relation only
    std::optional<std::string> target;  // relation only
    std::optional<int> start;           // entity only, inclusive token index
    std::optional<int> end;             // entity only, inclusive token index
    std::optional<std::string> entity_text;

    friend bool operator==(const Markup&, const Markup&) = default;
};

enum class MarkupState { suggested, accepted };

struct EntityDraft {
    std::string label;  // type name
    int start = 0;
    int end = 0;
};

struct RelationDraft {
    std::string label;
    std::string source;
    std::string target;
};

class AnnotatedDocument {
public:
    AnnotatedDocument() = default;
    AnnotatedDocument(std::string doc_id, std::string text, Language lang);

    const std::string& doc_id() const noexcept { return doc_id_; }
    const std::string& text() const noexcept { return text_; }
    Language language() const noexcept { return language_; }
    const std::vector<Token>& tokens() const noexcept { return tokens_; }
    const std::vector<Markup>& markups() const noexcept { return markups_; }
    std::uint64_t version() const noexcept { return version_; }
    std::optional<int> cluster_id() const noexcept { return cluster_id_; }
    void set_cluster_id(std::optional<int> c) { cluster_id_ = c; }

    const Markup* find(std::string_view id) const;

    /// Surface of the entity markup `id` (empty when absent or not an entity).
    std::string surface_of(std::string_view id) const;

    /// Rebuilds a document from stored state; checks every markup invariant.
    static AnnotatedDocument restore(std::string doc_id, std::string text, Language lang, std::vector<Markup> markups,
                                     std::uint64_t version);

private:
    friend class MarkupEditor;

    std::string doc_id_;
    std::string text_;
    Language language_ = Language::en;
    std::vector<Token> tokens_;
    std::optional<int> cluster_id_;
    std::vector<Markup> markups_;
    std::uint64_t version_ = 0;
    std::uint64_t next_seq_ = 1;
};

/// Throws Error(conflict) when `expected` is set and differs from the document version.
void check_version(const AnnotatedDocument& doc, std::optional<std::uint64_t> expected);

struct AddResult {
    Markup markup;
    bool created = false;
};

/// Adds an entity markup. Exact duplicates (same span and label) return the existing
/// markup with created=false and leave the version unchanged.
AddResult add_markup(AnnotatedDocument& doc, const Ontology& o, const EntityDraft& draft, MarkupState state);
AddResult add_markup(AnnotatedDocument& doc, const Ontology& o, const RelationDraft& draft, MarkupState state);

enum class TransitionAction { accept, remove, accept_all, remove_all };
TransitionAction parse_action(std::string_view s);

struct MutationSummary {
    std::vector<std::string> accepted;
    std::vector<std::string> deleted;
    std::uint64_t version = 0;
};

MutationSummary transition(AnnotatedDocument& doc, std::string_view markup_id, TransitionAction action);

/// Stages several additions on a working copy; `commit` applies them in one step and
/// bumps the version once when anything was created. Dropping the batch discards it.
class MarkupBatch {
public:
    explicit MarkupBatch(AnnotatedDocument& doc) : target_(doc), work_(doc) {}

    AddResult add(const Ontology& o, const EntityDraft& draft, MarkupState state);
    AddResult add(const Ontology& o, const RelationDraft& draft, MarkupState state);
    const AnnotatedDocument& view() const noexcept { return work_; }
    bool commit();

private:
    AnnotatedDocument& target_;
    AnnotatedDocument work_;
    bool changed_ = false;
};

enum class PropagationScope { document, project };

struct CreatedMarkup {
    std::string doc_id;
    Markup markup;
};

/// Entity propagation: every token-aligned case-insensitive occurrence of `surface`
/// not already carrying `label` gains a suggested markup.
std::vector<CreatedMarkup> propagate_entity(std::span<AnnotatedDocument> docs, const Ontology& o,
                                            const std::string& label, const std::string& surface);

/// Relation propagation: each document containing both endpoint surfaces gets (at most)
/// one suggested relation between the first matching endpoints, creating suggested
/// endpoint markups as needed.
std::vector<CreatedMarkup> propagate_relation(std::span<AnnotatedDocument> docs, const Ontology& o,
                                              const std::string& label, const std::string& subject_label,
                                              const std::string& subject_surface, const std::string& object_label,
                                              const std::string& object_surface);

/// Propagates `seed_id` from `docs[seed_index]`. With document scope only that document is scanned.
std::vector<CreatedMarkup> propagate(std::span<AnnotatedDocument> docs, std::size_t seed_index,
                                     std::string_view seed_id, const Ontology& o, PropagationScope scope);

struct Counts {
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t triples = 0;
    std::size_t accepted = 0;
    std::size_t suggested = 0;

    Counts& operator+=(const Counts& c);
    friend bool operator==(const Counts&, const Counts&) = default;
};

Counts counts(const AnnotatedDocument& doc, const Ontology& o);
Counts counts(std::span<const AnnotatedDocument> docs, const Ontology& o);

/// Native records carried by the markups. NER: one per entity markup. RE: one per
/// relation. EE: one per trigger (entity labelled with an event type) gathering its
/// outgoing role relations.
std::vector<NativeRecord> native_records(const AnnotatedDocument& doc, const Ontology& o);
std::vector<UnifiedTriple> unified_triples(const AnnotatedDocument& doc, const Ontology& o);

/// Referential-integrity and field-shape check; returns the first problem or empty.
std::string check_integrity(const AnnotatedDocument& doc);

} // namespace kgmark
