#include <doctest.h>

#include <fstream>
#include <sstream>

#include "kgbias/classifier.hpp"
#include "kgbias/error.hpp"
#include "kgbias/rng.hpp"
#include "test_helpers.hpp"

using namespace kgbias;

namespace {

// 100 points at +1-vector (class 0) and -1-vector (class 1), plus the OTHER
// class that never occurs.
struct SeparableFixture {
    EmbeddingSet emb;
    LabelMap labels;
    std::vector<EntityId> entities;

    SeparableFixture() : emb(ScoreModel::DistMult, 4, make_names(), {"r"}) {
        Rng rng(17);
        for (EntityId e = 0; e < 100; ++e) {
            const double sign = e < 50 ? 1.0 : -1.0;
            for (double& x : emb.entity_mut(e)) x = sign + 0.01 * rng.uniform(-1, 1);
            labels.assignment[e] = e < 50 ? 0 : 1;
            entities.push_back(e);
        }
        labels.classes = {"pos", "neg", "OTHER"};
        labels.class_tail_ids = {0, 1};
    }

    static std::vector<std::string> make_names() {
        std::vector<std::string> names;
        for (int i = 0; i < 100; ++i) names.push_back("e" + std::to_string(i));
        return names;
    }
};

}  // namespace

TEST_CASE("train_classifier separates a separable construction") {
    SeparableFixture fx;
    ClassifierConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 0.5;

    const auto clf = train_classifier(fx.emb, fx.entities, fx.labels, cfg);
    const auto table = predict_table(clf, fx.emb, fx.entities, fx.labels);
    const auto metrics = evaluate_classifier(table);
    CHECK(metrics.accuracy == 1.0);
    CHECK(metrics.balanced_accuracy == 1.0);
    for (const auto& row : table.rows) CHECK(row.predicted == row.truth);
}

TEST_CASE("training is deterministic per seed") {
    SeparableFixture fx;
    ClassifierConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 5;

    SUBCASE("logistic") {
        CHECK(train_classifier(fx.emb, fx.entities, fx.labels, cfg) ==
              train_classifier(fx.emb, fx.entities, fx.labels, cfg));
    }
    SUBCASE("mlp") {
        cfg.kind = ClassifierKind::Mlp;
        cfg.hidden_sizes = {8};
        const auto a = train_classifier(fx.emb, fx.entities, fx.labels, cfg);
        const auto b = train_classifier(fx.emb, fx.entities, fx.labels, cfg);
        CHECK(a == b);
        // and the MLP also separates the toy set
        CHECK(evaluate_classifier(predict_table(a, fx.emb, fx.entities, fx.labels)).accuracy ==
              1.0);
    }
}

TEST_CASE("train_classifier input validation") {
    SeparableFixture fx;
    ClassifierConfig cfg;

    SUBCASE("empty train set") {
        CHECK_THROWS_AS(train_classifier(fx.emb, {}, fx.labels, cfg), Error);
    }
    SUBCASE("single-class labels are degenerate") {
        std::vector<EntityId> first_class(fx.entities.begin(), fx.entities.begin() + 50);
        CHECK_THROWS_WITH_AS(train_classifier(fx.emb, first_class, fx.labels, cfg),
                             doctest::Contains("degenerate"), Error);
    }
    SUBCASE("balanced weighting keeps predictions in the alphabet") {
        cfg.class_weighting = ClassWeighting::Balanced;
        cfg.epochs = 30;
        // unbalanced train subset: 50 pos, 5 neg
        std::vector<EntityId> subset(fx.entities.begin(), fx.entities.begin() + 55);
        const auto clf = train_classifier(fx.emb, subset, fx.labels, cfg);
        const auto table = predict_table(clf, fx.emb, fx.entities, fx.labels);
        for (const auto& row : table.rows) {
            CHECK(row.predicted >= 0);
            CHECK(row.predicted < static_cast<int>(fx.labels.classes.size()));
        }
    }
}

TEST_CASE("predict_table semantics") {
    SeparableFixture fx;

    SUBCASE("zero-parameter model ties to class 0") {
        const Classifier clf = classifier_from_parts(
            ClassifierConfig{}, {4, 3},
            {std::vector<double>(12, 0.0)}, {std::vector<double>(3, 0.0)});
        const auto table = predict_table(clf, fx.emb, fx.entities, fx.labels);
        for (const auto& row : table.rows) CHECK(row.predicted == 0);
    }
    SUBCASE("empty test set gives empty table") {
        ClassifierConfig cfg;
        cfg.epochs = 5;
        const auto clf = train_classifier(fx.emb, fx.entities, fx.labels, cfg);
        const auto table = predict_table(clf, fx.emb, {}, fx.labels);
        CHECK(table.rows.empty());
        CHECK(table.classes == fx.labels.classes);
    }
    SUBCASE("dim mismatch is rejected") {
        const Classifier clf = classifier_from_parts(
            ClassifierConfig{}, {3, 3}, {std::vector<double>(9, 0.0)},
            {std::vector<double>(3, 0.0)});
        CHECK_THROWS_AS(predict_table(clf, fx.emb, fx.entities, fx.labels), Error);
    }
    SUBCASE("prediction is a pure function") {
        ClassifierConfig cfg;
        cfg.epochs = 20;
        const auto clf = train_classifier(fx.emb, fx.entities, fx.labels, cfg);
        const auto a = predict_table(clf, fx.emb, fx.entities, fx.labels);
        const auto b = predict_table(clf, fx.emb, fx.entities, fx.labels);
        CHECK(a.rows == b.rows);
    }
}

TEST_CASE("evaluate_classifier") {
    SUBCASE("all correct") {
        PredictionTable table;
        table.classes = {"A", "B"};
        table.rows = {{0, 0, 0}, {1, 1, 1}, {2, 0, 0}};
        const auto m = evaluate_classifier(table);
        CHECK(m.accuracy == 1.0);
        CHECK(m.balanced_accuracy == 1.0);
    }
    SUBCASE("hand-counted three-row example") {
        // y = [A, A, B], yhat = [A, B, B]: accuracy 2/3, balanced (1/2 + 1)/2
        PredictionTable table;
        table.classes = {"A", "B"};
        table.rows = {{0, 0, 0}, {1, 0, 1}, {2, 1, 1}};
        const auto m = evaluate_classifier(table);
        CHECK(m.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(m.balanced_accuracy == doctest::Approx(0.75).epsilon(1e-15));
    }
    SUBCASE("single-class table all correct") {
        PredictionTable table;
        table.classes = {"A", "B"};
        table.rows = {{0, 0, 0}, {1, 0, 0}};
        const auto m = evaluate_classifier(table);
        CHECK(m.balanced_accuracy == 1.0);
        CHECK(m.classes_present == 1);
    }
    SUBCASE("empty table errors") {
        PredictionTable table;
        table.classes = {"A"};
        CHECK_THROWS_AS(evaluate_classifier(table), Error);
    }
    SUBCASE("bounds hold on random tables") {
        Rng rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            PredictionTable table;
            table.classes = {"A", "B", "C"};
            const int rows = 1 + static_cast<int>(rng.below(30));
            for (int i = 0; i < rows; ++i)
                table.rows.push_back({static_cast<EntityId>(i), static_cast<int>(rng.below(3)),
                                      static_cast<int>(rng.below(3))});
            const auto m = evaluate_classifier(table);
            CHECK(m.accuracy >= 0.0);
            CHECK(m.accuracy <= 1.0);
            CHECK(m.balanced_accuracy >= 0.0);
            CHECK(m.balanced_accuracy <= 1.0);
        }
    }
}

TEST_CASE("prediction CSV export") {
    helpers::TempDir dir("csv");
    PredictionTable table;
    table.classes = {"engineer", "actor", "OTHER"};
    table.rows = {{0, 0, 1}, {1, 2, 2}};
    write_prediction_csv(table, {"alice", "bob"}, dir.file("pred.csv"));

    std::ifstream in(dir.file("pred.csv"));
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == "entity,true,predicted\nalice,engineer,actor\nbob,OTHER,OTHER\n");
}
