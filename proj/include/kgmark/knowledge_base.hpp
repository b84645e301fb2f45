#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "kgmark/markup.hpp"
#include "kgmark/text.hpp"

namespace kgmark::kb {

enum class FactKind { entity, relation };

/// An accepted annotation reduced to its text: one surface for an entity fact,
/// subject and object surfaces for a relation fact. Surfaces keep their case.
struct Fact {
    FactKind kind = FactKind::entity;
    std::string label;
    std::vector<std::string> surfaces;

    friend bool operator==(const Fact&, const Fact&) = default;
};

struct KnowledgeEntry {
    Fact fact;
    std::size_t count = 0;
    std::int64_t last_seen = 0;
    std::string project;
};

struct FactEvent {
    enum class Change { added, removed };
    Change change = Change::added;
    Fact fact;
    std::int64_t timestamp = 0;
};

/// Per-project tally of accepted facts. A fact whose tally reaches the threshold is a
/// knowledge entry; below it the tally is staging only. Writes serialize on an internal
/// mutex; `entries()` returns an immutable snapshot and does not wait for writers.
class KnowledgeBase {
public:
    KnowledgeBase(std::string project, Language lang, std::size_t threshold = 2);
    KnowledgeBase(KnowledgeBase&& other) noexcept
        : project_(std::move(other.project_)), lang_(other.lang_), threshold_(other.threshold_),
          tallies_(std::move(other.tallies_)), snapshot_(std::move(other.snapshot_))
    {
    }

    const std::string& project() const noexcept { return project_; }
    std::size_t threshold() const noexcept { return threshold_; }

    void ingest(const FactEvent& event);
    void ingest(std::span<const FactEvent> events);
    void clear();

    std::shared_ptr<const std::vector<KnowledgeEntry>> entries() const;
    /// Current tally, promoted or not (0 when unknown).
    std::size_t tally(const Fact& fact) const;

    /// Rejects stopwords and single-character surfaces.
    bool informative(const Fact& fact) const;

    std::string dump() const;
    static KnowledgeBase load(std::string_view json_text);

private:
    using Key = std::tuple<FactKind, std::string, std::vector<std::string>>;
    struct Tally {
        Fact display;
        std::size_t count = 0;
        std::int64_t last_seen = 0;
    };

    static Key key_of(const Fact& f);
    void publish();  // caller holds mu_

    std::string project_;
    Language lang_;
    std::size_t threshold_;
    mutable std::mutex mu_;
    std::map<Key, Tally> tallies_;
    std::shared_ptr<const std::vector<KnowledgeEntry>> snapshot_;
};

/// "the type of <s> is <label>;" or "the relation between <s> and <o> is <label>;"
std::string render_entry(const KnowledgeEntry& e);

/// "Note: " followed by the entries whose surfaces all occur (token-aligned,
/// case-insensitive) in `text`, highest count first, cut at the last whole entry
/// fitting `budget` characters. Empty when nothing matches.
std::string generate_prefix(std::string_view text, Language lang, std::span<const KnowledgeEntry> entries,
                            std::size_t budget = 512);

/// Accepted facts of a document keyed by markup id.
std::map<std::string, Fact> accepted_facts(const AnnotatedDocument& doc);

/// Events turning the `before` fact set into `after`.
std::vector<FactEvent> diff_facts(const std::map<std::string, Fact>& before, const std::map<std::string, Fact>& after,
                                  std::int64_t timestamp);

} // namespace kgmark::kb
