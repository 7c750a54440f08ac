#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgbias/embedding.hpp"
#include "kgbias/kg.hpp"

namespace kgbias {

enum class ClassifierKind { Logistic, Mlp };
enum class ClassWeighting { None, Balanced };

struct ClassifierConfig {
    ClassifierKind kind = ClassifierKind::Logistic;
    std::vector<int> hidden_sizes = {64};  // MLP only
    int epochs = 300;
    double learning_rate = 0.15;
    ClassWeighting class_weighting = ClassWeighting::Balanced;
    std::uint64_t seed = 0;

    void validate() const;
};

// Multinomial model over entity embeddings: either plain logistic regression
// or a ReLU MLP, trained full-batch on (optionally class-weighted)
// cross-entropy. Immutable after training.
class Classifier {
public:
    const ClassifierConfig& config() const { return config_; }
    int input_dim() const { return input_dim_; }
    int class_count() const { return class_count_; }

    // logits for one input vector
    std::vector<double> logits(std::span<const double> x) const;
    // argmax class, ties to the lowest index
    int predict(std::span<const double> x) const;

    // Layers as (weights, biases); layer i maps sizes[i] -> sizes[i+1].
    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    friend bool operator==(const Classifier&, const Classifier&) = default;

private:
    friend Classifier train_classifier(const EmbeddingSet&, const std::vector<EntityId>&,
                                       const LabelMap&, const ClassifierConfig&);
    friend Classifier classifier_from_parts(ClassifierConfig, std::vector<int>,
                                            std::vector<std::vector<double>>,
                                            std::vector<std::vector<double>>);

    ClassifierConfig config_;
    int input_dim_ = 0;
    int class_count_ = 0;
    std::vector<int> sizes_;                      // [input, hidden..., classes]
    std::vector<std::vector<double>> weights_;    // row-major out_dim x in_dim
    std::vector<std::vector<double>> biases_;
};

// Rebuild a classifier from serialized parts (see report_io / CLI cache).
Classifier classifier_from_parts(ClassifierConfig cfg, std::vector<int> sizes,
                                 std::vector<std::vector<double>> weights,
                                 std::vector<std::vector<double>> biases);

struct PredictionRow {
    EntityId entity;
    int truth;
    int predicted;

    friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};

struct PredictionTable {
    std::vector<std::string> classes;  // label alphabet from the LabelMap
    std::vector<PredictionRow> rows;   // one per test entity
};

struct ClassifierMetrics {
    double accuracy = 0;
    double balanced_accuracy = 0;  // mean recall over classes present in truth
    int classes_present = 0;
};

Classifier train_classifier(const EmbeddingSet& emb, const std::vector<EntityId>& train_entities,
                            const LabelMap& labels, const ClassifierConfig& cfg);

PredictionTable predict_table(const Classifier& clf, const EmbeddingSet& emb,
                              const std::vector<EntityId>& test_entities, const LabelMap& labels);

ClassifierMetrics evaluate_classifier(const PredictionTable& table);

// CSV with header "entity,true,predicted"; labels resolved through `names`.
void write_prediction_csv(const PredictionTable& table, const std::vector<std::string>& names,
                          const std::string& path);

}  // namespace kgbias
