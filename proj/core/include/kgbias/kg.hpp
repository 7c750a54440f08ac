#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kgbias {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// A triple before label interning, as read from a file.
struct RawTriple {
    std::string head;
    std::string relation;
    std::string tail;
};

// Immutable after construction. Vocabularies are assigned in first-appearance
// order; triples are deduplicated and kept sorted.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<std::string>& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }

    std::size_t entity_count() const { return entities_.size(); }
    std::size_t relation_count() const { return relations_.size(); }

    const std::string& entity_label(EntityId id) const { return entities_[id]; }
    const std::string& relation_label(RelationId id) const { return relations_[id]; }

    std::optional<EntityId> find_entity(const std::string& label) const;
    std::optional<RelationId> find_relation(const std::string& label) const;

    // tails of (head, relation, .)
    const std::vector<EntityId>& tails_of(EntityId head, RelationId relation) const;
    // heads of (., relation, tail)
    const std::vector<EntityId>& heads_of(RelationId relation, EntityId tail) const;

    // all (relation, tail) pairs with the given head, sorted
    std::vector<std::pair<RelationId, EntityId>> outgoing(EntityId head) const;

    bool contains(const Triple& t) const;

private:
    friend KnowledgeGraph build_graph(const std::vector<RawTriple>& raw);

    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, EntityId> entity_index_;
    std::unordered_map<std::string, RelationId> relation_index_;
    std::vector<Triple> triples_;  // sorted, unique
    std::unordered_map<std::uint64_t, std::vector<EntityId>> by_head_relation_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> by_relation_tail_;
};

// The classification population: entities that participate as head of the
// target relation, plus the candidate sensitive relations to audit.
struct Population {
    std::vector<EntityId> entities;  // sorted
    RelationId target_relation = 0;
    std::vector<RelationId> candidate_sensitive;  // never contains target_relation

    bool contains(EntityId e) const;
};

// Target labels: the K most common tails plus a trailing OTHER class.
struct LabelMap {
    std::vector<std::string> classes;             // size K_eff + 1, last is OTHER
    std::vector<EntityId> class_tail_ids;         // size K_eff, tail entity per real class
    std::unordered_map<EntityId, int> assignment; // population entity -> class index

    int other_index() const { return static_cast<int>(classes.size()) - 1; }
    int class_count() const { return static_cast<int>(classes.size()); }
};

// One-vs-rest binarization of a sensitive relation at a given tail.
// in_group: population entities holding (e, relation, tail); out_group:
// population entities holding the relation with some other tail but not this
// one. Entities without the relation appear in neither.
struct SensitiveGrouping {
    RelationId relation = 0;
    EntityId tail = 0;
    std::vector<EntityId> in_group;   // sorted
    std::vector<EntityId> out_group;  // sorted
};

// --- operations ---

// One triple per non-empty line, exactly two tab separators. Errors carry the
// 1-based line number.
std::vector<RawTriple> parse_triples(const std::string& path);

// Inverse of parse_triples for a whole graph; used by the synth generator and
// round-trip checks.
void write_triples(const KnowledgeGraph& kg, const std::string& path);

KnowledgeGraph build_graph(const std::vector<RawTriple>& raw);

// Population = heads of the target relation. candidate_sensitive is filtered
// of the target relation itself. Errors: unknown relation, empty population.
Population human_subgraph(const KnowledgeGraph& kg, RelationId target_relation,
                          std::vector<RelationId> candidate_sensitive);

// Count of population entities having each tail under `relation`; an entity
// with several distinct tails counts once per tail.
std::map<EntityId, int> tail_distribution(const KnowledgeGraph& kg, RelationId relation,
                                          const Population& over);

// K most frequent target tails (ties by vocabulary order) + OTHER. Each entity
// is assigned its own most frequent tail, falling back to OTHER when that tail
// did not make the class list.
LabelMap prepare_labels(const KnowledgeGraph& kg, RelationId target_relation, int k,
                        const Population& over);

// Tails of `relation` with population count >= min_count, most frequent first
// (ties by vocabulary order).
std::vector<EntityId> filter_rare_tails(const KnowledgeGraph& kg, RelationId relation,
                                        int min_count, const Population& over);

SensitiveGrouping sensitive_grouping(const KnowledgeGraph& kg, const Population& over,
                                     RelationId relation, EntityId tail);

// Stratified-by-class split, deterministic given seed. A one-member class goes
// entirely to train. Returns (train, test), each sorted.
std::pair<std::vector<EntityId>, std::vector<EntityId>> split_population(
    const Population& pop, const LabelMap& labels, double test_fraction, std::uint64_t seed);

}  // namespace kgbias
