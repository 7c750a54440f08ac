#include "kgbias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "kgbias/error.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

std::string to_string(Measure m) {
    switch (m) {
        case Measure::DPD: return "DPD";
        case Measure::PPD: return "PPD";
        case Measure::TLB: return "TLB";
    }
    internal_error("metrics", "invalid measure enum");
}

Measure measure_from_string(const std::string& tag) {
    if (tag == "DPD") return Measure::DPD;
    if (tag == "PPD") return Measure::PPD;
    if (tag == "TLB") return Measure::TLB;
    usage_error("metrics", "unknown measure '" + tag + "' (expected DPD, PPD or TLB)");
}

namespace {

// rows of the table whose entity belongs to the (sorted) group
std::vector<const PredictionRow*> rows_in_group(const PredictionTable& table,
                                                const std::vector<EntityId>& group) {
    std::vector<const PredictionRow*> out;
    for (const PredictionRow& row : table.rows)
        if (std::binary_search(group.begin(), group.end(), row.entity)) out.push_back(&row);
    return out;
}

double safe_ratio(long long num, long long den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

BinaryBiasScore dpd_binary(const PredictionTable& table, const SensitiveGrouping& grouping) {
    BinaryBiasScore score;
    score.relation = grouping.relation;
    score.tail = grouping.tail;

    const auto in_rows = rows_in_group(table, grouping.in_group);
    const auto out_rows = rows_in_group(table, grouping.out_group);
    score.in_group_size = static_cast<long long>(in_rows.size());
    score.out_group_size = static_cast<long long>(out_rows.size());
    if (in_rows.empty() || out_rows.empty()) {
        score.undefined = true;
        score.note = in_rows.empty() ? "in-group absent from prediction table"
                                     : "out-group absent from prediction table";
        return score;
    }

    const int labels = static_cast<int>(table.classes.size());
    for (int a = 0; a < labels; ++a) {
        LabelCounts lc;
        lc.label = a;
        lc.den_in = score.in_group_size;
        lc.den_out = score.out_group_size;
        for (const PredictionRow* row : in_rows)
            if (row->predicted == a) ++lc.num_in;
        for (const PredictionRow* row : out_rows)
            if (row->predicted == a) ++lc.num_out;
        lc.value = std::abs(safe_ratio(lc.num_in, lc.den_in) - safe_ratio(lc.num_out, lc.den_out));
        score.total += lc.value;
        score.per_label.push_back(lc);
    }
    return score;
}

BinaryBiasScore ppd_binary(const PredictionTable& table, const SensitiveGrouping& grouping) {
    BinaryBiasScore score;
    score.relation = grouping.relation;
    score.tail = grouping.tail;

    const auto in_rows = rows_in_group(table, grouping.in_group);
    const auto out_rows = rows_in_group(table, grouping.out_group);
    score.in_group_size = static_cast<long long>(in_rows.size());
    score.out_group_size = static_cast<long long>(out_rows.size());
    if (in_rows.empty() || out_rows.empty()) {
        score.undefined = true;
        score.note = in_rows.empty() ? "in-group absent from prediction table"
                                     : "out-group absent from prediction table";
        return score;
    }

    const int labels = static_cast<int>(table.classes.size());
    for (int a = 0; a < labels; ++a) {
        LabelCounts lc;
        lc.label = a;
        for (const PredictionRow* row : in_rows) {
            if (row->truth != a) continue;
            ++lc.den_in;
            if (row->predicted == a) ++lc.num_in;
        }
        for (const PredictionRow* row : out_rows) {
            if (row->truth != a) continue;
            ++lc.den_out;
            if (row->predicted == a) ++lc.num_out;
        }
        if (lc.den_in == 0 || lc.den_out == 0) {
            // declared rule: empty conditional support contributes 0, flagged
            lc.value = 0;
            lc.empty_support = true;
        } else {
            lc.value =
                std::abs(safe_ratio(lc.num_in, lc.den_in) - safe_ratio(lc.num_out, lc.den_out));
        }
        score.total += lc.value;
        score.per_label.push_back(lc);
    }
    return score;
}

std::vector<double> translate_head(const EmbeddingSet& emb, EntityId h, RelationId s,
                                   EntityId direction_tail, double alpha) {
    if (alpha < 0) usage_error("tlb", "alpha must be >= 0");
    const auto head = emb.entity(h);
    std::vector<double> translated(head.begin(), head.end());
    if (alpha == 0) return translated;
    const auto grad = grad_score_wrt_head(emb, h, s, direction_tail);
    for (std::size_t i = 0; i < translated.size(); ++i) translated[i] += alpha * grad[i];
    return translated;
}

TLTable tlb(const EmbeddingSet& emb, RelationId s, EntityId direction_tail,
            RelationId target_relation, const std::vector<EntityId>& target_tails,
            const std::vector<EntityId>& heads, double alpha) {
    if (heads.empty()) usage_error("tlb", "empty head sample");
    if (target_tails.empty()) usage_error("tlb", "empty target tail list");
    if (alpha < 0) usage_error("tlb", "alpha must be >= 0");

    TLTable table;
    table.relation = s;
    table.direction_tail = direction_tail;
    table.alpha = alpha;
    table.head_sample_size = heads.size();

    std::vector<double> sums(target_tails.size(), 0.0);
    for (const EntityId h : heads) {
        const auto translated = translate_head(emb, h, s, direction_tail, alpha);
        for (std::size_t j = 0; j < target_tails.size(); ++j) {
            const double before = score(emb, h, target_relation, target_tails[j]);
            const double after = score_with_head(emb, translated, target_relation, target_tails[j]);
            sums[j] += after - before;
        }
    }
    for (std::size_t j = 0; j < target_tails.size(); ++j)
        table.rows.emplace_back(target_tails[j], sums[j] / static_cast<double>(heads.size()));
    return table;
}

std::optional<double> aggregate(const std::vector<double>& per_tail_scores) {
    if (per_tail_scores.empty()) return std::nullopt;
    double sum = 0;
    for (const double v : per_tail_scores) sum += v;
    return sum / static_cast<double>(per_tail_scores.size());
}

namespace {

std::vector<EntityId> sample_heads(const Population& population, std::size_t cap,
                                   std::uint64_t seed) {
    std::vector<EntityId> heads = population.entities;
    if (cap > 0 && heads.size() > cap) {
        Rng rng(Rng::derive_seed(seed, "tlb-heads"));
        rng.shuffle(heads);
        heads.resize(cap);
        std::sort(heads.begin(), heads.end());
    }
    return heads;
}

}  // namespace

BiasReport audit(const KnowledgeGraph& kg, const EmbeddingSet& emb, const PredictionTable* table,
                 const LabelMap& labels, const Population& population,
                 const std::vector<RelationId>& candidate_relations,
                 const std::vector<Measure>& measures, const AuditConfig& cfg,
                 const std::string& model_name) {
    if (measures.empty()) usage_error("audit", "at least one measure required");
    const bool wants_classifier =
        std::find(measures.begin(), measures.end(), Measure::DPD) != measures.end() ||
        std::find(measures.begin(), measures.end(), Measure::PPD) != measures.end();
    if (wants_classifier && table == nullptr)
        usage_error("audit", "DPD/PPD requested but no prediction table supplied");
    const bool wants_tlb =
        std::find(measures.begin(), measures.end(), Measure::TLB) != measures.end();

    BiasReport report;
    report.models = {model_name};
    report.measures = measures;
    report.entity_names = kg.entities();
    report.relation_names = kg.relations();
    report.class_names = labels.classes;

    const std::vector<EntityId> tlb_heads =
        wants_tlb ? sample_heads(population, cfg.tlb_head_cap, cfg.seed) : std::vector<EntityId>{};

    std::size_t audited = 0;
    for (const RelationId rel : candidate_relations) {
        const std::string rel_name = kg.relation_label(rel);
        const auto tails = filter_rare_tails(kg, rel, cfg.min_tail_count, population);
        if (tails.size() < 2) {
            const std::string reason = tails.empty()
                                           ? "no tail meets min_count"
                                           : "fewer than 2 admissible tails";
            report.skipped[rel_name] = reason;
            for (const Measure m : measures)
                report.aggregated.push_back(
                    AggregateScore{rel_name, m, model_name, ScoreStatus::Skipped, 0.0, reason});
            report.relations.push_back(rel_name);
            continue;
        }
        ++audited;
        report.relations.push_back(rel_name);

        for (const Measure m : measures) {
            if (m == Measure::TLB) {
                std::vector<double> per_tail;
                for (const EntityId tail : tails) {
                    TLTable t = tlb(emb, rel, tail, population.target_relation,
                                    labels.class_tail_ids, tlb_heads, cfg.tlb_alpha);
                    double acc = 0;
                    for (const auto& [target_tail, mean_tl] : t.rows) acc += std::abs(mean_tl);
                    per_tail.push_back(acc / static_cast<double>(t.rows.size()));
                    report.tl_tables.emplace_back(model_name, std::move(t));
                }
                const auto agg = aggregate(per_tail);
                report.aggregated.push_back(AggregateScore{rel_name, m, model_name,
                                                           ScoreStatus::Ok, *agg, ""});
                continue;
            }

            std::vector<double> per_tail;
            std::size_t undefined_tails = 0;
            for (const EntityId tail : tails) {
                const SensitiveGrouping grouping = sensitive_grouping(kg, population, rel, tail);
                BinaryBiasScore score = m == Measure::DPD ? dpd_binary(*table, grouping)
                                                          : ppd_binary(*table, grouping);
                if (score.undefined)
                    ++undefined_tails;
                else
                    per_tail.push_back(score.total);
                auto& bucket = m == Measure::DPD ? report.dpd_details : report.ppd_details;
                bucket.emplace_back(model_name, std::move(score));
            }
            const auto agg = aggregate(per_tail);
            if (!agg) {
                report.aggregated.push_back(
                    AggregateScore{rel_name, m, model_name, ScoreStatus::Undefined, 0.0,
                                   "all tail groupings undefined in prediction table"});
            } else {
                std::string note;
                if (undefined_tails > 0)
                    note = std::to_string(undefined_tails) + " undefined tail(s) excluded";
                report.aggregated.push_back(
                    AggregateScore{rel_name, m, model_name, ScoreStatus::Ok, *agg, note});
            }
        }
    }
    if (candidate_relations.empty()) usage_error("audit", "empty candidate relation list");
    if (audited == 0)
        data_error("audit", "no candidate relation survived tail filtering (min_count=" +
                                std::to_string(cfg.min_tail_count) + ")");
    return report;
}

BiasReport merge_reports(const std::vector<BiasReport>& reports) {
    if (reports.empty()) usage_error("audit", "no reports to merge");
    BiasReport merged = reports.front();
    for (std::size_t i = 1; i < reports.size(); ++i) {
        const BiasReport& r = reports[i];
        merged.models.insert(merged.models.end(), r.models.begin(), r.models.end());
        merged.aggregated.insert(merged.aggregated.end(), r.aggregated.begin(),
                                 r.aggregated.end());
        merged.dpd_details.insert(merged.dpd_details.end(), r.dpd_details.begin(),
                                  r.dpd_details.end());
        merged.ppd_details.insert(merged.ppd_details.end(), r.ppd_details.begin(),
                                  r.ppd_details.end());
        merged.tl_tables.insert(merged.tl_tables.end(), r.tl_tables.begin(), r.tl_tables.end());
        for (const auto& [rel, reason] : r.skipped) merged.skipped.emplace(rel, reason);
    }
    return merged;
}

}  // namespace kgbias
