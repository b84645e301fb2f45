#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgmark/scheme.hpp"

namespace kgmark::eval {

/// Per-document native records; used both for gold and for predictions.
using RecordSet = std::map<std::string, std::vector<NativeRecord>>;

struct Score {
    std::size_t tp = 0;
    std::size_t n_pred = 0;
    std::size_t n_gold = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// P = tp/n_pred, R = tp/n_gold (0 on an empty denominator); F1 = 2PR/(P+R), 0 when
/// P+R = 0, except that two empty sets agree perfectly (F1 = 1).
Score make_score(std::size_t tp, std::size_t n_pred, std::size_t n_gold);

/// `main` is the task score; for EE it equals `arg_c`, with `trig_c` alongside.
struct F1Report {
    Score main;
    std::optional<Score> arg_c;
    std::optional<Score> trig_c;
};

enum class Criterion { entity, relation, argument, trigger };

/// Exact-match keys of one document's records under `c`. A mention matches on
/// surface, anchor and (for NER) type; RE keys carry both endpoints and the relation;
/// Arg-C keys are (event type, role, argument); Trig-C keys are (event type, trigger).
std::vector<std::vector<std::string>> match_keys(const std::vector<NativeRecord>& records, Criterion c);

/// Throws Error(validation) when gold and pred do not cover the same doc ids.
F1Report micro_f1(TaskKind task, const RecordSet& gold, const RecordSet& pred);

/// 1 - mean over documents and unordered member pairs of the per-document F1
/// (Arg-C for EE). Requires at least two members, each covering every id in `dataset`.
double intra_group_variance(TaskKind task, const std::vector<RecordSet>& group,
                            const std::vector<std::string>& dataset);

/// Reads the export envelope {"texts": [{"doc_id", "triples", ...}]}.
RecordSet records_from_export(TaskKind task, std::string_view export_json);

} // namespace kgmark::eval
