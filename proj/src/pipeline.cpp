#include "kgmark/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"
#include "kgmark/error.hpp"

namespace kgmark::pipeline {

using nlohmann::json;

PreprocessResult preprocess(std::span<const std::string> texts, const PreprocessFlags& flags)
{
    PreprocessResult out;
    std::set<std::string> removable(flags.remove_chars.begin(), flags.remove_chars.end());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::string t = flags.lowercase ? fold_case(texts[i]) : texts[i];
        std::size_t removed = 0;
        if (!removable.empty()) {
            std::string kept;
            for (const auto& ch : utf8_chars(t)) {
                if (removable.count(ch)) ++removed;
                else kept += ch;
            }
            t = std::move(kept);
        }
        out.report.chars_removed.push_back(removed);
        if (flags.deduplicate && !seen.insert(t).second) {
            out.report.duplicates.push_back(i);
            continue;
        }
        out.texts.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<double>> LexicalEmbeddingProvider::embed(std::span<const std::string> texts)
{
    std::vector<std::map<std::string, double>> counts;
    std::map<std::string, std::size_t> vocab;
    for (const auto& t : texts) {
        auto chars = utf8_chars(" " + fold_case(t) + " ");
        std::map<std::string, double> c;
        for (std::size_t i = 0; i + 3 <= chars.size(); ++i) c[chars[i] + chars[i + 1] + chars[i + 2]] += 1.0;
        for (const auto& [g, _] : c) vocab.emplace(g, 0);
        counts.push_back(std::move(c));
    }
    std::size_t idx = 0;
    for (auto& [g, i] : vocab) i = idx++;

    std::vector<std::vector<double>> out;
    for (const auto& c : counts) {
        std::vector<double> v(vocab.size(), 0.0);
        double norm = 0;
        for (const auto& [g, n] : c) {
            v[vocab[g]] = n;
            norm += n * n;
        }
        if (norm > 0) {
            norm = std::sqrt(norm);
            for (auto& x : v) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

double cosine_distance(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) fail(ErrorCode::validation, "embedding dimensions differ");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 && nb == 0) return 0.0;
    if (na == 0 || nb == 0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<int> agglomerate(const std::vector<std::vector<double>>& distances, double cutoff)
{
    const std::size_t n = distances.size();
    std::vector<std::vector<std::size_t>> members(n);
    std::vector<bool> alive(n, true);
    auto d = distances;
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};

    while (true) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (alive[j] && d[i][j] < best) {
                    best = d[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (!(best < cutoff)) break;
        // average linkage (Lance-Williams): weighted by cluster sizes
        double si = static_cast<double>(members[bi].size()), sj = static_cast<double>(members[bj].size());
        for (std::size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            double v = (si * d[bi][k] + sj * d[bj][k]) / (si + sj);
            d[bi][k] = d[k][bi] = v;
        }
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        alive[bj] = false;
    }

    std::vector<int> assignment(n, -1);
    int next = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (assignment[t] != -1) continue;
        for (std::size_t c = 0; c < n; ++c) {
            if (!alive[c]) continue;
            if (std::find(members[c].begin(), members[c].end(), t) == members[c].end()) continue;
            for (auto m : members[c]) assignment[m] = next;
        }
        ++next;
    }
    return assignment;
}

ClusterResult cluster(std::span<const std::string> texts, EmbeddingProvider& provider, double cutoff)
{
    if (texts.empty()) fail(ErrorCode::validation, "clustering needs at least one text");
    ClusterResult out;
    std::vector<std::vector<double>> vectors;
    try {
        vectors = provider.embed(texts);
        if (vectors.size() != texts.size()) fail(ErrorCode::validation, "provider returned the wrong number of vectors");
        std::vector<std::vector<double>> dist(texts.size(), std::vector<double>(texts.size(), 0.0));
        for (std::size_t i = 0; i < texts.size(); ++i)
            for (std::size_t j = i + 1; j < texts.size(); ++j)
                dist[i][j] = dist[j][i] = cosine_distance(vectors[i], vectors[j]);
        out.assignment = agglomerate(dist, cutoff);
    } catch (const std::exception& e) {
        out.assignment.assign(texts.size(), 0);
        out.warnings.push_back(std::string("clustering disabled: ") + e.what());
    }
    return out;
}

namespace {

std::optional<std::string> pick_type(const Ontology& o, const json& row, const char* field,
                                     const std::vector<std::string>& allowed, std::string& error)
{
    if (row.contains(field)) {
        auto t = row[field].get<std::string>();
        const auto* def = o.find_entity(t);
        if (!def) {
            error = std::string(field) + " '" + t + "' is not in the ontology";
            return std::nullopt;
        }
        return t;
    }
    if (allowed.size() == 1) return allowed.front();
    error = std::string("missing ") + field + " and the relation constraint does not determine it";
    return std::nullopt;
}

} // namespace

PreannotationReport import_preannotation(std::span<AnnotatedDocument> docs, const Ontology& o,
                                         std::string_view line_json)
{
    PreannotationReport report;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= line_json.size()) {
        auto nl = line_json.find('\n', pos);
        auto line = trim(line_json.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        ++line_no;
        pos = nl == std::string_view::npos ? line_json.size() + 1 : nl + 1;
        if (line.empty()) continue;
        ++report.rows;
        try {
            auto row = json::parse(line);
            auto kind = row.at("kind").get<std::string>();
            auto label = row.at("label").get<std::string>();
            if (kind == "entity") {
                const auto* def = o.find_entity(label);
                if (!def || def->pseudo) {
                    report.errors.push_back({line_no, "unknown entity label '" + label + "'"});
                    continue;
                }
                auto created = propagate_entity(docs, o, label, row.at("surface").get<std::string>());
                report.created.insert(report.created.end(), created.begin(), created.end());
            } else if (kind == "relation") {
                const auto* rel = o.find_relation(label);
                if (!rel) {
                    report.errors.push_back({line_no, "unknown relation label '" + label + "'"});
                    continue;
                }
                std::string err;
                auto st = pick_type(o, row, "subject_type", rel->subject_types, err);
                auto ot = st ? pick_type(o, row, "object_type", rel->object_types, err) : std::nullopt;
                if (!st || !ot) {
                    report.errors.push_back({line_no, err});
                    continue;
                }
                if (!o.relation_admits(*rel, *st, *ot)) {
                    report.errors.push_back({line_no, "relation constraint rejects (" + *st + ", " + *ot + ")"});
                    continue;
                }
                auto created = propagate_relation(docs, o, label, *st, row.at("subject").get<std::string>(), *ot,
                                                  row.at("object").get<std::string>());
                report.created.insert(report.created.end(), created.begin(), created.end());
            } else {
                report.errors.push_back({line_no, "unknown kind '" + kind + "'"});
            }
        } catch (const json::exception& e) {
            report.errors.push_back({line_no, std::string("bad row: ") + e.what()});
        } catch (const Error& e) {
            report.errors.push_back({line_no, e.what()});
        }
    }
    return report;
}

ReviewSummary review_summary(const ProjectDraft& draft)
{
    ReviewSummary s;
    const auto& c = draft.config;
    s.name = c.name;
    s.task = c.task;
    s.language = c.language;
    s.texts = draft.texts.size();
    s.entity_types = draft.ontology.entity_types.size();
    s.relation_types = draft.ontology.relation_types.size();
    for (const auto& r : draft.ontology.relation_types) {
        if (!r.subject_types.empty() || !r.object_types.empty()) ++s.constrained_relations;
        if (r.parent) ++s.hierarchical_types;
    }
    for (const auto& e : draft.ontology.entity_types)
        if (e.parent) ++s.hierarchical_types;
    s.model_update = c.model_update;
    s.clustering = c.clustering;
    s.lowercase = c.preprocessing.lowercase;
    s.deduplicate = c.preprocessing.deduplicate;
    s.remove_chars = c.preprocessing.remove_chars.size();
    return s;
}

} // namespace kgmark::pipeline
