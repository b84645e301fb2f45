#include "kgmark/eval.hpp"

#include <algorithm>
#include <set>

#include "kgmark/error.hpp"
#include "kgmark/serialization.hpp"

namespace kgmark::eval {

namespace {

using Key = std::vector<std::string>;

std::string anchor_key(const std::optional<Anchor>& a)
{
    return a ? std::to_string(a->start) + ":" + std::to_string(a->end) : std::string();
}

Criterion primary(TaskKind task)
{
    switch (task) {
    case TaskKind::ner: return Criterion::entity;
    case TaskKind::re: return Criterion::relation;
    case TaskKind::ee: return Criterion::argument;
    }
    return Criterion::entity;
}

std::set<Key> key_set(const std::vector<NativeRecord>& records, Criterion c)
{
    auto keys = match_keys(records, c);
    return {keys.begin(), keys.end()};
}

std::size_t overlap(const std::set<Key>& a, const std::set<Key>& b)
{
    std::size_t n = 0;
    for (const auto& k : a) n += b.count(k);
    return n;
}

void check_same_ids(const RecordSet& gold, const RecordSet& pred)
{
    for (const auto& [id, _] : gold)
        if (!pred.count(id)) fail(ErrorCode::validation, "document '" + id + "' missing from predictions");
    for (const auto& [id, _] : pred)
        if (!gold.count(id)) fail(ErrorCode::validation, "document '" + id + "' missing from gold");
}

Score score_over(const RecordSet& gold, const RecordSet& pred, Criterion c)
{
    std::size_t tp = 0, np = 0, ng = 0;
    for (const auto& [id, g] : gold) {
        auto gk = key_set(g, c);
        auto pk = key_set(pred.at(id), c);
        tp += overlap(gk, pk);
        np += pk.size();
        ng += gk.size();
    }
    return make_score(tp, np, ng);
}

} // namespace

Score make_score(std::size_t tp, std::size_t n_pred, std::size_t n_gold)
{
    Score s{tp, n_pred, n_gold};
    s.precision = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
    s.recall = n_gold ? static_cast<double>(tp) / static_cast<double>(n_gold) : 0.0;
    if (n_pred == 0 && n_gold == 0)
        s.f1 = 1.0;
    else if (s.precision + s.recall > 0.0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

std::vector<Key> match_keys(const std::vector<NativeRecord>& records, Criterion c)
{
    std::vector<Key> out;
    for (const auto& rec : records) {
        if (const auto* n = std::get_if<NerRecord>(&rec)) {
            if (c == Criterion::entity) out.push_back({n->entity.type, n->entity.text, anchor_key(n->entity.anchor)});
        } else if (const auto* r = std::get_if<ReRecord>(&rec)) {
            if (c == Criterion::relation)
                out.push_back({r->subject.text, anchor_key(r->subject.anchor), r->relation, r->object.text,
                               anchor_key(r->object.anchor)});
        } else if (const auto* e = std::get_if<EeRecord>(&rec)) {
            if (c == Criterion::trigger) out.push_back({e->event_type, e->trigger, anchor_key(e->trigger_anchor)});
            if (c == Criterion::argument)
                for (const auto& a : e->arguments) out.push_back({e->event_type, a.role, a.text, anchor_key(a.anchor)});
        }
    }
    return out;
}

F1Report micro_f1(TaskKind task, const RecordSet& gold, const RecordSet& pred)
{
    check_same_ids(gold, pred);
    F1Report r;
    r.main = score_over(gold, pred, primary(task));
    if (task == TaskKind::ee) {
        r.arg_c = r.main;
        r.trig_c = score_over(gold, pred, Criterion::trigger);
    }
    return r;
}

double intra_group_variance(TaskKind task, const std::vector<RecordSet>& group, const std::vector<std::string>& dataset)
{
    if (group.size() < 2) fail(ErrorCode::validation, "an agreement group needs at least two members");
    if (dataset.empty()) fail(ErrorCode::validation, "dataset is empty");
    for (std::size_t m = 0; m < group.size(); ++m)
        for (const auto& id : dataset)
            if (!group[m].count(id))
                fail(ErrorCode::validation, "member " + std::to_string(m) + " lacks document '" + id + "'");

    const Criterion c = primary(task);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& id : dataset) {
        std::vector<std::set<Key>> keys;
        for (const auto& member : group) keys.push_back(key_set(member.at(id), c));
        for (std::size_t i = 0; i < keys.size(); ++i)
            for (std::size_t j = i + 1; j < keys.size(); ++j) {
                sum += make_score(overlap(keys[i], keys[j]), keys[j].size(), keys[i].size()).f1;
                ++pairs;
            }
    }
    return 1.0 - sum / static_cast<double>(pairs);
}

RecordSet records_from_export(TaskKind task, std::string_view export_json)
{
    serial::json j;
    try {
        j = serial::json::parse(export_json);
    } catch (const serial::json::exception& e) {
        fail(ErrorCode::parse, std::string("export is not valid JSON: ") + e.what());
    }
    RecordSet out;
    for (const auto& t : serial::field<serial::json>(j, "texts")) {
        auto id = serial::field<std::string>(t, "doc_id");
        std::vector<UnifiedTriple> triples;
        for (const auto& tj : serial::field<serial::json>(t, "triples")) triples.push_back(serial::triple_from_json(tj));
        if (!out.emplace(id, from_unified(task, triples)).second) fail(ErrorCode::validation, "duplicate doc_id '" + id + "'");
    }
    return out;
}

} // namespace kgmark::eval
