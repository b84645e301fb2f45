#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgmark/markup.hpp"
#include "kgmark/scheme.hpp"
#include "kgmark/text.hpp"

namespace kgmark::pipeline {

struct PreprocessFlags {
    bool lowercase = false;
    std::vector<std::string> remove_chars;  // each entry one character (UTF-8)
    bool deduplicate = false;
};

struct ProjectConfig {
    std::string name;
    std::string description;
    TaskKind task = TaskKind::ner;
    Language language = Language::en;
    bool model_update = true;
    bool clustering = false;
    PreprocessFlags preprocessing;
    double cluster_cutoff = 0.5;
    std::size_t kb_threshold = 2;
};

struct PreprocessReport {
    std::vector<std::size_t> duplicates;     // input indices dropped as duplicates
    std::vector<std::size_t> chars_removed;  // per input text
};

struct PreprocessResult {
    std::vector<std::string> texts;
    PreprocessReport report;
};

/// Casing, then character removal, then exact de-duplication on the cleaned text
/// (first occurrence kept).
PreprocessResult preprocess(std::span<const std::string> texts, const PreprocessFlags& flags);

// ---- clustering ---------------------------------------------------------------------

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Character trigram counts over " " + lowercase(text) + " ", L2-normalised.
class LexicalEmbeddingProvider : public EmbeddingProvider {
public:
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
};

/// POSTs {"texts": [...]} and reads {"embeddings": [[...], ...]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string url, std::chrono::seconds timeout = std::chrono::seconds(30));
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::string url_;
    std::chrono::seconds timeout_;
};

/// 1 - cosine similarity; two zero vectors are at distance 0, one zero vector at 1.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Average-linkage agglomeration over a symmetric distance matrix, merging while the
/// closest pair is below `cutoff`. Ids are numbered by each cluster's first member.
std::vector<int> agglomerate(const std::vector<std::vector<double>>& distances, double cutoff);

struct ClusterResult {
    std::vector<int> assignment;
    std::vector<std::string> warnings;
};

/// A failing provider disables clustering: every text lands in cluster 0 with a warning.
ClusterResult cluster(std::span<const std::string> texts, EmbeddingProvider& provider, double cutoff = 0.5);

// ---- preannotation ------------------------------------------------------------------

struct RowError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct PreannotationReport {
    std::size_t rows = 0;
    std::vector<CreatedMarkup> created;
    std::vector<RowError> errors;
};

/// One JSON object per line: {"kind":"entity","label":..,"surface":..} or
/// {"kind":"relation","label":..,"subject":..,"object":..[, "subject_type":.., "object_type":..]}.
/// Every valid row is propagated over the corpus as suggested markups.
PreannotationReport import_preannotation(std::span<AnnotatedDocument> docs, const Ontology& o,
                                         std::string_view line_json);

// ---- review -------------------------------------------------------------------------

struct ProjectDraft {
    ProjectConfig config;
    Ontology ontology;
    std::vector<std::string> texts;
};

struct ReviewSummary {
    std::string name;
    TaskKind task = TaskKind::ner;
    Language language = Language::en;
    std::size_t texts = 0;
    std::size_t entity_types = 0;
    std::size_t relation_types = 0;
    std::size_t constrained_relations = 0;
    std::size_t hierarchical_types = 0;
    bool model_update = false;
    bool clustering = false;
    bool lowercase = false;
    bool deduplicate = false;
    std::size_t remove_chars = 0;
};

ReviewSummary review_summary(const ProjectDraft& draft);

} // namespace kgmark::pipeline
