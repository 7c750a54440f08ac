#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgbias/kg.hpp"

namespace kgbias {

enum class ScoreModel { TransE, DistMult, ComplEx, RotatE };
enum class Norm { L1, L2 };
enum class Loss { Margin, Logistic };

std::string to_string(ScoreModel m);
ScoreModel score_model_from_string(const std::string& tag);  // errors on unknown tag

// Entity and relation vectors for one score model.
//
// `dim` counts complex coordinates for ComplEx/RotatE; their entity storage is
// 2*dim reals (real parts, then imaginary parts). RotatE relation vectors hold
// dim phase angles in radians; all other relation vectors match the entity
// storage length. Immutable after training/loading.
class EmbeddingSet {
public:
    EmbeddingSet() = default;
    EmbeddingSet(ScoreModel model, int dim, std::vector<std::string> entity_labels,
                 std::vector<std::string> relation_labels);

    ScoreModel model() const { return model_; }
    int dim() const { return dim_; }
    Norm transe_norm() const { return transe_norm_; }
    void set_transe_norm(Norm n) { transe_norm_ = n; }

    int entity_storage_dim() const;
    int relation_storage_dim() const;

    std::size_t entity_count() const { return entity_labels_.size(); }
    std::size_t relation_count() const { return relation_labels_.size(); }
    const std::vector<std::string>& entity_labels() const { return entity_labels_; }
    const std::vector<std::string>& relation_labels() const { return relation_labels_; }

    std::optional<EntityId> find_entity(const std::string& label) const;
    std::optional<RelationId> find_relation(const std::string& label) const;

    std::span<const double> entity(EntityId id) const;
    std::span<const double> relation(RelationId id) const;
    std::span<double> entity_mut(EntityId id);
    std::span<double> relation_mut(RelationId id);

    bool all_finite() const;

    friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

private:
    ScoreModel model_ = ScoreModel::TransE;
    int dim_ = 0;
    Norm transe_norm_ = Norm::L2;
    std::vector<std::string> entity_labels_;
    std::vector<std::string> relation_labels_;
    std::map<std::string, EntityId> entity_index_;
    std::map<std::string, RelationId> relation_index_;
    std::vector<double> entity_data_;
    std::vector<double> relation_data_;
};

struct TrainConfig {
    int dim = 64;
    int epochs = 100;
    double learning_rate = 0.01;
    double margin = 1.0;          // margin loss only
    int negatives_per_positive = 1;
    int batch_size = 128;
    std::uint64_t seed = 0;
    std::optional<Loss> loss;     // defaulted per model when unset
    Norm transe_norm = Norm::L2;

    // Margin for translational models, logistic for bilinear ones.
    Loss loss_for(ScoreModel m) const;
    void validate() const;  // throws on non-positive fields
};

struct HitsReport {
    std::map<int, double> hits;   // k -> fraction of test triples with rank <= k
    std::size_t evaluated = 0;
    std::string ranking = "raw";  // no filtering of other true triples
};

// Plausibility score, higher = more plausible. Head may be supplied as an
// explicit vector (entity storage layout) for translated-head scoring.
double score(const EmbeddingSet& emb, EntityId h, RelationId r, EntityId t);
double score_with_head(const EmbeddingSet& emb, std::span<const double> head, RelationId r,
                       EntityId t);

// Analytic d(score)/d(head), entity storage layout. Norm-based models return
// the zero vector at the singular point where the residual norm vanishes.
std::vector<double> grad_score_wrt_head(const EmbeddingSet& emb, EntityId h, RelationId r,
                                        EntityId t);

// Mini-batch SGD with uniform negative sampling (head or tail corrupted with
// probability 1/2). Deterministic given cfg.seed.
EmbeddingSet train_embeddings(const KnowledgeGraph& kg, ScoreModel model, const TrainConfig& cfg);

// Raw (unfiltered) tail ranking over all entities; ties rank the true tail
// after equal-scored competitors.
HitsReport evaluate_hits_at_k(const EmbeddingSet& emb, const std::vector<Triple>& test_triples,
                              const std::vector<int>& ks);

// Two files: <base>.json metadata header, <base>.tsv body with one
// "label\tv1 v2 ..." row per entity then per relation, floats at 17
// significant digits.
void save_embeddings(const EmbeddingSet& emb, const std::string& base_path);
EmbeddingSet load_embeddings(const std::string& base_path);

// Rebuild the set with rows permuted into the graph's vocabulary order, so
// graph ids index it directly. Errors if the graph needs a label the set
// lacks; extra rows are dropped.
EmbeddingSet reindex_to_graph(const EmbeddingSet& emb, const KnowledgeGraph& kg);

}  // namespace kgbias
