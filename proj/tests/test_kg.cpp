#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "kgbias/error.hpp"
#include "kgbias/kg.hpp"
#include "kgbias/rng.hpp"
#include "test_helpers.hpp"

using namespace kgbias;

TEST_CASE("parse_triples reads tab-separated lines") {
    helpers::TempDir dir("parse");
    const auto path = dir.file("t.tsv");

    SUBCASE("single line") {
        helpers::write_file(path, "alice\tprofession\tengineer\n");
        const auto triples = parse_triples(path);
        REQUIRE(triples.size() == 1);
        CHECK(triples[0].head == "alice");
        CHECK(triples[0].relation == "profession");
        CHECK(triples[0].tail == "engineer");
    }
    SUBCASE("empty file") {
        helpers::write_file(path, "");
        CHECK(parse_triples(path).empty());
    }
    SUBCASE("malformed line carries its number") {
        helpers::write_file(path, "a\tb\n");
        CHECK_THROWS_WITH_AS(parse_triples(path), doctest::Contains(":1:"), Error);
    }
    SUBCASE("too many fields rejected") {
        helpers::write_file(path, "a\tb\tc\td\n");
        CHECK_THROWS_AS(parse_triples(path), Error);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(parse_triples(dir.file("nope.tsv")), Error); }
    SUBCASE("blank lines are skipped, later errors keep real numbers") {
        helpers::write_file(path, "a\tr\tb\n\nbad line\n");
        CHECK_THROWS_WITH_AS(parse_triples(path), doctest::Contains(":3:"), Error);
    }
}

TEST_CASE("build_graph dedups and indexes") {
    SUBCASE("duplicates collapse") {
        const auto kg = helpers::graph_from({{"a", "r", "b"}, {"a", "r", "b"}});
        CHECK(kg.triples().size() == 1);
        CHECK(kg.entity_count() == 2);
        CHECK(kg.relation_count() == 1);
    }
    SUBCASE("empty input gives empty graph") {
        const auto kg = build_graph({});
        CHECK(kg.triples().empty());
        CHECK(kg.entity_count() == 0);
    }
    SUBCASE("vocabulary follows first appearance") {
        const auto kg = helpers::graph_from({{"b", "r", "a"}, {"a", "s", "c"}});
        CHECK(kg.entity_label(0) == "b");
        CHECK(kg.entity_label(1) == "a");
        CHECK(kg.entity_label(2) == "c");
        CHECK(kg.relation_label(0) == "r");
        CHECK(kg.relation_label(1) == "s");
    }
    SUBCASE("head index") {
        const auto kg = helpers::graph_from({{"a", "r", "b"}, {"b", "r", "c"}});
        const auto a = *kg.find_entity("a");
        const auto b = *kg.find_entity("b");
        const auto c = *kg.find_entity("c");
        const auto r = *kg.find_relation("r");
        CHECK(kg.tails_of(a, r) == std::vector<EntityId>{b});
        CHECK(kg.tails_of(b, r) == std::vector<EntityId>{c});
        CHECK(kg.heads_of(r, c) == std::vector<EntityId>{b});
        CHECK(kg.tails_of(c, r).empty());
    }
}

TEST_CASE("write/parse round trip reproduces the triple set") {
    helpers::TempDir dir("roundtrip");
    const auto kg = helpers::graph_from(
        {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "s", "a"}, {"a", "s", "c"}});
    const auto path = dir.file("kg.tsv");
    write_triples(kg, path);
    const auto kg2 = build_graph(parse_triples(path));

    REQUIRE(kg2.triples().size() == kg.triples().size());
    std::set<std::array<std::string, 3>> original, reloaded;
    for (const Triple& t : kg.triples())
        original.insert({kg.entity_label(t.head), kg.relation_label(t.relation),
                         kg.entity_label(t.tail)});
    for (const Triple& t : kg2.triples())
        reloaded.insert({kg2.entity_label(t.head), kg2.relation_label(t.relation),
                         kg2.entity_label(t.tail)});
    CHECK(original == reloaded);
}

namespace {

KnowledgeGraph profession_graph() {
    // five people with professions; gender for some
    return helpers::graph_from({{"alice", "profession", "engineer"},
                                {"bob", "profession", "engineer"},
                                {"carol", "profession", "actor"},
                                {"dave", "profession", "actor"},
                                {"erin", "profession", "chef"},
                                {"erin", "profession", "actor"},
                                {"alice", "gender", "female"},
                                {"bob", "gender", "male"},
                                {"carol", "gender", "female"},
                                {"engineer", "kind", "job"}});
}

}  // namespace

TEST_CASE("human_subgraph selects heads of the target relation") {
    const auto kg = profession_graph();
    const auto target = *kg.find_relation("profession");

    SUBCASE("definition") {
        const auto pop = human_subgraph(kg, target, {});
        std::set<std::string> names;
        for (const EntityId e : pop.entities) names.insert(kg.entity_label(e));
        CHECK(names == std::set<std::string>{"alice", "bob", "carol", "dave", "erin"});
    }
    SUBCASE("multi-profession entity included once") {
        const auto pop = human_subgraph(kg, target, {});
        CHECK(std::count(pop.entities.begin(), pop.entities.end(), *kg.find_entity("erin")) == 1);
    }
    SUBCASE("unknown relation errors") {
        CHECK_THROWS_AS(human_subgraph(kg, 99, {}), Error);
        CHECK_THROWS_WITH_AS(human_subgraph(kg, 99, {}), doctest::Contains("unknown"), Error);
    }
    SUBCASE("candidate list drops the target relation") {
        const auto gender = *kg.find_relation("gender");
        const auto pop = human_subgraph(kg, target, {gender, target});
        CHECK(pop.candidate_sensitive == std::vector<RelationId>{gender});
    }
}

TEST_CASE("tail_distribution counts population entities per tail") {
    const auto kg = profession_graph();
    const auto target = *kg.find_relation("profession");
    const auto pop = human_subgraph(kg, target, {});

    SUBCASE("counts") {
        const auto counts = tail_distribution(kg, target, pop);
        CHECK(counts.at(*kg.find_entity("engineer")) == 2);
        CHECK(counts.at(*kg.find_entity("actor")) == 3);  // erin counts once
        CHECK(counts.at(*kg.find_entity("chef")) == 1);
    }
    SUBCASE("relation absent from population gives empty map") {
        const auto kind = *kg.find_relation("kind");
        CHECK(tail_distribution(kg, kind, pop).empty());
    }
    SUBCASE("multi-tail entity contributes one to each tail") {
        const auto counts = tail_distribution(kg, target, pop);
        int erin_total = 0;
        for (const EntityId t : kg.tails_of(*kg.find_entity("erin"), target))
            erin_total += counts.at(t) > 0 ? 1 : 0;
        CHECK(erin_total == 2);
    }
    SUBCASE("unknown relation errors") { CHECK_THROWS_AS(tail_distribution(kg, 99, pop), Error); }
}

TEST_CASE("prepare_labels builds top-K classes plus OTHER") {
    const auto kg = profession_graph();
    const auto target = *kg.find_relation("profession");
    const auto pop = human_subgraph(kg, target, {});

    SUBCASE("K=2 keeps the two most common tails") {
        const auto lm = prepare_labels(kg, target, 2, pop);
        REQUIRE(lm.classes.size() == 3);
        CHECK(lm.classes[0] == "actor");     // count 3
        CHECK(lm.classes[1] == "engineer");  // count 2
        CHECK(lm.classes[2] == "OTHER");
        CHECK(lm.assignment.at(*kg.find_entity("erin")) == 0);   // actor beats chef
        CHECK(lm.assignment.at(*kg.find_entity("alice")) == 1);
    }
    SUBCASE("rare-tail-only entity falls back to OTHER") {
        auto kg2 = helpers::graph_from({{"a", "p", "engineer"}, {"b", "p", "engineer"},
                                        {"c", "p", "actor"}, {"d", "p", "chef"}});
        const auto p = *kg2.find_relation("p");
        const auto pop2 = human_subgraph(kg2, p, {});
        const auto lm = prepare_labels(kg2, p, 2, pop2);
        CHECK(lm.assignment.at(*kg2.find_entity("d")) == lm.other_index());
    }
    SUBCASE("oversized K shrinks to all tails plus OTHER") {
        const auto lm = prepare_labels(kg, target, 10, pop);
        CHECK(lm.classes.size() == 4);  // engineer, actor, chef + OTHER
        CHECK(lm.classes.back() == "OTHER");
    }
    SUBCASE("assignments cover the population exactly") {
        const auto lm = prepare_labels(kg, target, 2, pop);
        std::map<int, int> per_class;
        for (const auto& [e, c] : lm.assignment) ++per_class[c];
        int total = 0;
        for (const auto& [c, n] : per_class) total += n;
        CHECK(total == static_cast<int>(pop.entities.size()));
    }
    SUBCASE("tie between equally common own tails breaks by vocabulary order") {
        // hand-traced: entity x has tails u and v with equal population counts;
        // u appears first in the vocabulary, so x is labelled u
        auto kg2 = helpers::graph_from({{"x", "p", "u"}, {"x", "p", "v"},
                                        {"y", "p", "u"}, {"z", "p", "v"}});
        const auto p = *kg2.find_relation("p");
        const auto pop2 = human_subgraph(kg2, p, {});
        const auto lm = prepare_labels(kg2, p, 2, pop2);
        const int xu = lm.assignment.at(*kg2.find_entity("x"));
        CHECK(lm.classes[static_cast<std::size_t>(xu)] == "u");
    }
}

TEST_CASE("filter_rare_tails thresholds and orders by count") {
    const auto kg = helpers::graph_from({{"h1", "lang", "en"}, {"h2", "lang", "en"},
                                         {"h3", "lang", "en"}, {"h4", "lang", "hi"},
                                         {"h5", "lang", "hi"}, {"h6", "lang", "eo"},
                                         {"h1", "p", "j"}, {"h2", "p", "j"}, {"h3", "p", "j"},
                                         {"h4", "p", "j"}, {"h5", "p", "j"}, {"h6", "p", "j"}});
    const auto p = *kg.find_relation("p");
    const auto lang = *kg.find_relation("lang");
    const auto pop = human_subgraph(kg, p, {});

    SUBCASE("threshold") {
        const auto tails = filter_rare_tails(kg, lang, 2, pop);
        REQUIRE(tails.size() == 2);
        CHECK(kg.entity_label(tails[0]) == "en");
        CHECK(kg.entity_label(tails[1]) == "hi");
    }
    SUBCASE("min_count 1 admits everything") {
        CHECK(filter_rare_tails(kg, lang, 1, pop).size() == 3);
    }
    SUBCASE("all tails rare gives empty list") {
        CHECK(filter_rare_tails(kg, lang, 10, pop).empty());
    }
}

TEST_CASE("sensitive_grouping obeys the multi-tail rule") {
    const auto kg = helpers::graph_from({{"a", "p", "j"}, {"b", "p", "j"}, {"c", "p", "j"},
                                         {"d", "p", "j"},
                                         {"a", "lang", "en"},
                                         {"b", "lang", "hi"},
                                         {"c", "lang", "en"}, {"c", "lang", "hi"}});
    const auto p = *kg.find_relation("p");
    const auto lang = *kg.find_relation("lang");
    const auto pop = human_subgraph(kg, p, {});
    const auto en = *kg.find_entity("en");

    const auto g = sensitive_grouping(kg, pop, lang, en);
    std::set<std::string> in, out;
    for (const EntityId e : g.in_group) in.insert(kg.entity_label(e));
    for (const EntityId e : g.out_group) out.insert(kg.entity_label(e));
    CHECK(in == std::set<std::string>{"a", "c"});  // c holds both tails -> in only
    CHECK(out == std::set<std::string>{"b"});      // d lacks the relation -> neither

    // invariants
    std::vector<EntityId> overlap;
    std::set_intersection(g.in_group.begin(), g.in_group.end(), g.out_group.begin(),
                          g.out_group.end(), std::back_inserter(overlap));
    CHECK(overlap.empty());
}

TEST_CASE("split_population is deterministic, exact and stratified") {
    const auto kg = helpers::graph_from({{"e0", "p", "x"}, {"e1", "p", "x"}, {"e2", "p", "x"},
                                         {"e3", "p", "x"}, {"e4", "p", "x"}, {"e5", "p", "x"},
                                         {"e6", "p", "x"}, {"e7", "p", "x"}, {"e8", "p", "x"},
                                         {"e9", "p", "x"}});
    const auto p = *kg.find_relation("p");
    const auto pop = human_subgraph(kg, p, {});
    const auto lm = prepare_labels(kg, p, 1, pop);

    SUBCASE("10 entities at 0.2 split 8/2, repeatably") {
        const auto [train1, test1] = split_population(pop, lm, 0.2, 7);
        const auto [train2, test2] = split_population(pop, lm, 0.2, 7);
        CHECK(train1.size() == 8);
        CHECK(test1.size() == 2);
        CHECK(train1 == train2);
        CHECK(test1 == test2);
        // exact partition
        std::vector<EntityId> all(train1);
        all.insert(all.end(), test1.begin(), test1.end());
        std::sort(all.begin(), all.end());
        CHECK(all == pop.entities);
    }
    SUBCASE("different seeds give different splits") {
        const auto [train1, test1] = split_population(pop, lm, 0.2, 7);
        const auto [train2, test2] = split_population(pop, lm, 0.2, 8);
        CHECK(test1 != test2);  // 45 possible pairs; the seeds were checked once
    }
    SUBCASE("singleton class goes to train") {
        const auto kg2 = helpers::graph_from(
            {{"a", "p", "x"}, {"b", "p", "x"}, {"c", "p", "x"}, {"d", "p", "y"}});
        const auto p2 = *kg2.find_relation("p");
        const auto pop2 = human_subgraph(kg2, p2, {});
        const auto lm2 = prepare_labels(kg2, p2, 2, pop2);
        const auto [train, test] = split_population(pop2, lm2, 0.5, 1);
        CHECK(std::binary_search(train.begin(), train.end(), *kg2.find_entity("d")));
    }
    SUBCASE("degenerate fractions error") {
        CHECK_THROWS_AS(split_population(pop, lm, 0.0, 1), Error);
        CHECK_THROWS_AS(split_population(pop, lm, 1.0, 1), Error);
    }
}

TEST_CASE("entity relabeling leaves counts and labels invariant") {
    const std::vector<std::array<std::string, 3>> base{
        {"a", "p", "j1"}, {"b", "p", "j1"}, {"c", "p", "j2"},
        {"a", "s", "g1"}, {"b", "s", "g2"}, {"c", "s", "g1"}};
    auto relabel = [](const std::string& s) { return "zz_" + s + "_q"; };

    std::vector<std::array<std::string, 3>> renamed;
    for (const auto& [h, r, t] : base) renamed.push_back({relabel(h), r, relabel(t)});
    std::reverse(renamed.begin(), renamed.end());  // order must not matter either

    const auto kg1 = helpers::graph_from(base);
    const auto kg2 = helpers::graph_from(renamed);
    const auto p1 = *kg1.find_relation("p");
    const auto p2 = *kg2.find_relation("p");
    const auto pop1 = human_subgraph(kg1, p1, {});
    const auto pop2 = human_subgraph(kg2, p2, {});

    const auto counts1 = tail_distribution(kg1, p1, pop1);
    const auto counts2 = tail_distribution(kg2, p2, pop2);
    std::map<std::string, int> by_label1, by_label2;
    for (const auto& [t, c] : counts1) by_label1[relabel(kg1.entity_label(t))] = c;
    for (const auto& [t, c] : counts2) by_label2[kg2.entity_label(t)] = c;
    CHECK(by_label1 == by_label2);

    const auto lm1 = prepare_labels(kg1, p1, 1, pop1);
    const auto lm2 = prepare_labels(kg2, p2, 1, pop2);
    std::map<std::string, std::string> assigned1, assigned2;
    for (const auto& [e, c] : lm1.assignment)
        assigned1[relabel(kg1.entity_label(e))] =
            lm1.classes[static_cast<std::size_t>(c)] == "OTHER"
                ? "OTHER"
                : relabel(lm1.classes[static_cast<std::size_t>(c)]);
    for (const auto& [e, c] : lm2.assignment)
        assigned2[kg2.entity_label(e)] = lm2.classes[static_cast<std::size_t>(c)];
    CHECK(assigned1 == assigned2);
}
