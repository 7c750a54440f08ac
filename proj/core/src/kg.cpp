#include "kgbias/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "kgbias/error.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

namespace {

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

const std::vector<EntityId>& empty_id_list() {
    static const std::vector<EntityId> empty;
    return empty;
}

}  // namespace

std::optional<EntityId> KnowledgeGraph::find_entity(const std::string& label) const {
    auto it = entity_index_.find(label);
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(const std::string& label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

const std::vector<EntityId>& KnowledgeGraph::tails_of(EntityId head, RelationId relation) const {
    auto it = by_head_relation_.find(pair_key(head, relation));
    return it == by_head_relation_.end() ? empty_id_list() : it->second;
}

const std::vector<EntityId>& KnowledgeGraph::heads_of(RelationId relation, EntityId tail) const {
    auto it = by_relation_tail_.find(pair_key(relation, tail));
    return it == by_relation_tail_.end() ? empty_id_list() : it->second;
}

std::vector<std::pair<RelationId, EntityId>> KnowledgeGraph::outgoing(EntityId head) const {
    std::vector<std::pair<RelationId, EntityId>> out;
    auto lo = std::lower_bound(triples_.begin(), triples_.end(),
                               Triple{head, 0, 0});
    for (auto it = lo; it != triples_.end() && it->head == head; ++it)
        out.emplace_back(it->relation, it->tail);
    return out;
}

bool KnowledgeGraph::contains(const Triple& t) const {
    return std::binary_search(triples_.begin(), triples_.end(), t);
}

std::vector<RawTriple> parse_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) data_error("parse", "cannot open triple file: " + path);

    std::vector<RawTriple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        const auto tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos) {
            data_error("parse", path + ":" + std::to_string(line_no) +
                                    ": expected exactly three tab-separated fields");
        }
        out.push_back(RawTriple{line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                                line.substr(tab2 + 1)});
    }
    if (in.bad()) data_error("parse", "I/O failure reading " + path);
    return out;
}

void write_triples(const KnowledgeGraph& kg, const std::string& path) {
    std::ofstream out(path);
    if (!out) data_error("write", "cannot open for writing: " + path);
    for (const Triple& t : kg.triples()) {
        out << kg.entity_label(t.head) << '\t' << kg.relation_label(t.relation) << '\t'
            << kg.entity_label(t.tail) << '\n';
    }
    if (!out) data_error("write", "I/O failure writing " + path);
}

KnowledgeGraph build_graph(const std::vector<RawTriple>& raw) {
    KnowledgeGraph kg;
    auto intern_entity = [&kg](const std::string& label) -> EntityId {
        auto [it, inserted] =
            kg.entity_index_.try_emplace(label, static_cast<EntityId>(kg.entities_.size()));
        if (inserted) kg.entities_.push_back(label);
        return it->second;
    };
    auto intern_relation = [&kg](const std::string& label) -> RelationId {
        auto [it, inserted] =
            kg.relation_index_.try_emplace(label, static_cast<RelationId>(kg.relations_.size()));
        if (inserted) kg.relations_.push_back(label);
        return it->second;
    };

    kg.triples_.reserve(raw.size());
    for (const RawTriple& rt : raw) {
        const EntityId h = intern_entity(rt.head);
        const RelationId r = intern_relation(rt.relation);
        const EntityId t = intern_entity(rt.tail);
        kg.triples_.push_back(Triple{h, r, t});
    }
    std::sort(kg.triples_.begin(), kg.triples_.end());
    kg.triples_.erase(std::unique(kg.triples_.begin(), kg.triples_.end()), kg.triples_.end());

    for (const Triple& t : kg.triples_) {
        kg.by_head_relation_[pair_key(t.head, t.relation)].push_back(t.tail);
        kg.by_relation_tail_[pair_key(t.relation, t.tail)].push_back(t.head);
    }
    return kg;
}

bool Population::contains(EntityId e) const {
    return std::binary_search(entities.begin(), entities.end(), e);
}

Population human_subgraph(const KnowledgeGraph& kg, RelationId target_relation,
                          std::vector<RelationId> candidate_sensitive) {
    if (target_relation >= kg.relation_count())
        data_error("population", "unknown target relation id " + std::to_string(target_relation));

    std::vector<EntityId> members;
    for (const Triple& t : kg.triples())
        if (t.relation == target_relation) members.push_back(t.head);
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.empty())
        data_error("population", "empty population: no triples with target relation '" +
                                     kg.relation_label(target_relation) + "'");

    for (const RelationId r : candidate_sensitive)
        if (r >= kg.relation_count())
            data_error("population", "unknown candidate relation id " + std::to_string(r));
    std::erase(candidate_sensitive, target_relation);

    return Population{std::move(members), target_relation, std::move(candidate_sensitive)};
}

std::map<EntityId, int> tail_distribution(const KnowledgeGraph& kg, RelationId relation,
                                          const Population& over) {
    if (relation >= kg.relation_count())
        data_error("labels", "unknown relation id " + std::to_string(relation));

    std::map<EntityId, int> counts;
    for (const EntityId e : over.entities)
        for (const EntityId t : kg.tails_of(e, relation)) ++counts[t];
    return counts;
}

namespace {

// tails ordered by (count desc, vocabulary order asc)
std::vector<std::pair<EntityId, int>> ranked_tails(const std::map<EntityId, int>& counts) {
    std::vector<std::pair<EntityId, int>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

}  // namespace

LabelMap prepare_labels(const KnowledgeGraph& kg, RelationId target_relation, int k,
                        const Population& over) {
    if (k < 1) usage_error("labels", "K must be >= 1");
    if (over.entities.empty()) usage_error("labels", "population is empty");

    const auto counts = tail_distribution(kg, target_relation, over);
    const auto ranked = ranked_tails(counts);
    const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());

    LabelMap lm;
    for (std::size_t i = 0; i < k_eff; ++i) {
        lm.class_tail_ids.push_back(ranked[i].first);
        lm.classes.push_back(kg.entity_label(ranked[i].first));
    }
    lm.classes.push_back("OTHER");

    std::unordered_map<EntityId, int> class_of_tail;
    for (std::size_t i = 0; i < lm.class_tail_ids.size(); ++i)
        class_of_tail[lm.class_tail_ids[i]] = static_cast<int>(i);

    const int other = lm.other_index();
    for (const EntityId e : over.entities) {
        const auto& tails = kg.tails_of(e, target_relation);
        // own most frequent tail, ties by vocabulary order
        EntityId best = tails.front();
        int best_count = counts.at(best);
        for (const EntityId t : tails) {
            const int c = counts.at(t);
            if (c > best_count || (c == best_count && t < best)) {
                best = t;
                best_count = c;
            }
        }
        const auto it = class_of_tail.find(best);
        lm.assignment[e] = it == class_of_tail.end() ? other : it->second;
    }
    return lm;
}

std::vector<EntityId> filter_rare_tails(const KnowledgeGraph& kg, RelationId relation,
                                        int min_count, const Population& over) {
    if (min_count < 1) usage_error("filter", "min_count must be >= 1");
    const auto ranked = ranked_tails(tail_distribution(kg, relation, over));
    std::vector<EntityId> admissible;
    for (const auto& [tail, count] : ranked)
        if (count >= min_count) admissible.push_back(tail);
    return admissible;
}

SensitiveGrouping sensitive_grouping(const KnowledgeGraph& kg, const Population& over,
                                     RelationId relation, EntityId tail) {
    SensitiveGrouping g;
    g.relation = relation;
    g.tail = tail;
    for (const EntityId e : over.entities) {
        const auto& tails = kg.tails_of(e, relation);
        if (tails.empty()) continue;
        const bool has_tail = std::find(tails.begin(), tails.end(), tail) != tails.end();
        if (has_tail)
            g.in_group.push_back(e);  // membership dominates for multi-tail entities
        else
            g.out_group.push_back(e);
    }
    return g;
}

std::pair<std::vector<EntityId>, std::vector<EntityId>> split_population(
    const Population& pop, const LabelMap& labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        usage_error("split", "test_fraction must lie in (0,1)");
    if (pop.entities.size() < 2) usage_error("split", "population must have >= 2 entities");

    std::map<int, std::vector<EntityId>> strata;
    for (const EntityId e : pop.entities) strata[labels.assignment.at(e)].push_back(e);

    Rng rng(seed);
    std::vector<EntityId> train;
    std::vector<EntityId> test;
    for (auto& [cls, members] : strata) {
        if (members.size() == 1) {
            train.push_back(members.front());
            continue;
        }
        rng.shuffle(members);
        auto n_test = static_cast<std::size_t>(std::llround(test_fraction * members.size()));
        n_test = std::min(n_test, members.size() - 1);  // keep every class represented in train
        test.insert(test.end(), members.begin(), members.begin() + n_test);
        train.insert(train.end(), members.begin() + n_test, members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

}  // namespace kgbias
