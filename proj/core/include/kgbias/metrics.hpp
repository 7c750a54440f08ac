#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgbias/classifier.hpp"
#include "kgbias/embedding.hpp"
#include "kgbias/kg.hpp"

namespace kgbias {

enum class Measure { DPD, PPD, TLB };

std::string to_string(Measure m);
Measure measure_from_string(const std::string& tag);

// Per-label empirical counts behind one |P_in - P_out| term, kept so exact
// (rational) cross-checks and disaggregated reports stay possible.
struct LabelCounts {
    int label = 0;
    long long num_in = 0;   // favourable outcomes within the in group
    long long den_in = 0;   // conditioning support within the in group
    long long num_out = 0;
    long long den_out = 0;
    double value = 0;       // |num_in/den_in - num_out/den_out|, 0 on empty support
    bool empty_support = false;  // PPD only: a conditional had no support
};

// DPD(s) or PPD(s) for one (relation, tail) binarization.
struct BinaryBiasScore {
    RelationId relation = 0;
    EntityId tail = 0;
    std::vector<LabelCounts> per_label;
    double total = 0;        // sum over labels
    long long in_group_size = 0;   // group members present in the table
    long long out_group_size = 0;
    bool undefined = false;  // a whole group was absent from the table
    std::string note;
};

// Mean translational-likelihood shift per target tail for one direction tail.
struct TLTable {
    RelationId relation = 0;
    EntityId direction_tail = 0;
    double alpha = 0;
    std::vector<std::pair<EntityId, double>> rows;  // (target tail, mean TL over heads)
    std::size_t head_sample_size = 0;
};

enum class ScoreStatus { Ok, Undefined, Skipped };

struct AggregateScore {
    std::string relation;
    Measure measure = Measure::DPD;
    std::string model;
    ScoreStatus status = ScoreStatus::Ok;
    double value = 0;       // valid when status == Ok
    std::string note;       // reason when skipped/undefined
};

struct ProvenanceInfo {
    std::uint64_t seed = 0;
    double test_fraction = 0;
    int k_top_classes = 0;
    int min_tail_count = 0;
    double tlb_alpha = 0;
    std::size_t tlb_head_cap = 0;
    std::string tlb_aggregation = "mean-abs-TL-over-target-tails";
    std::string tlb_gradient = "ascent";
    std::string ranking = "raw";
    std::string grouping_scope = "population";
    std::string prediction_scope = "test-split";
    std::string classifier;  // empty when no classifier was trained
    std::string classifier_note;
    std::size_t population_size = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<std::string> dataset_paths;
    std::vector<std::string> notes;
    std::string timestamp;  // excluded from reproducibility comparisons
};

struct BiasReport {
    ProvenanceInfo provenance;
    std::vector<std::string> models;                 // column order
    std::vector<Measure> measures;                   // requested, in order
    std::vector<std::string> relations;              // audited, in order
    std::vector<AggregateScore> aggregated;
    // disaggregated attachments, tagged by model
    std::vector<std::pair<std::string, BinaryBiasScore>> dpd_details;
    std::vector<std::pair<std::string, BinaryBiasScore>> ppd_details;
    std::vector<std::pair<std::string, TLTable>> tl_tables;
    std::map<std::string, std::string> skipped;      // relation -> reason
    // resolved labels for ids used in the details
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;
    std::vector<std::string> class_names;
};

struct AuditConfig {
    int min_tail_count = 10;
    double tlb_alpha = 0.1;
    std::size_t tlb_head_cap = 2000;
    std::uint64_t seed = 0;
};

// --- operations ---

// Eq. style: per label a, |P[yhat=a | in] - P[yhat=a | out]| over group
// members present in the table; total sums over the label alphabet.
BinaryBiasScore dpd_binary(const PredictionTable& table, const SensitiveGrouping& grouping);

// Per label a, |P[yhat=a | y=a, in] - P[yhat=a | y=a, out]|; empty-support
// conditionals contribute 0 and are flagged.
BinaryBiasScore ppd_binary(const PredictionTable& table, const SensitiveGrouping& grouping);

// One gradient-ascent step that raises phi(h, s, direction_tail):
// h' = h + alpha * d(phi)/dh. alpha must be >= 0.
std::vector<double> translate_head(const EmbeddingSet& emb, EntityId h, RelationId s,
                                   EntityId direction_tail, double alpha);

// Mean score shift phi(h',r_i,t) - phi(h,r_i,t) per target tail, averaged
// over the sampled heads.
TLTable tlb(const EmbeddingSet& emb, RelationId s, EntityId direction_tail,
            RelationId target_relation, const std::vector<EntityId>& target_tails,
            const std::vector<EntityId>& heads, double alpha);

// Arithmetic mean; empty input yields the undefined marker.
std::optional<double> aggregate(const std::vector<double>& per_tail_scores);

// Full audit of one embedding set: per candidate relation, binarize over
// admissible tails, compute each requested measure, aggregate, and attach the
// disaggregated tables. `table` may be null when neither DPD nor PPD was
// requested.
BiasReport audit(const KnowledgeGraph& kg, const EmbeddingSet& emb, const PredictionTable* table,
                 const LabelMap& labels, const Population& population,
                 const std::vector<RelationId>& candidate_relations,
                 const std::vector<Measure>& measures, const AuditConfig& cfg,
                 const std::string& model_name);

// Merge per-model reports (same relations/measures) into one multi-model
// report; provenance is taken from the first.
BiasReport merge_reports(const std::vector<BiasReport>& reports);

}  // namespace kgbias
