#include "kgbias/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "kgbias/error.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

void ClassifierConfig::validate() const {
    if (epochs <= 0) usage_error("classifier", "epochs must be positive");
    if (learning_rate <= 0) usage_error("classifier", "learning_rate must be positive");
    if (kind == ClassifierKind::Mlp) {
        if (hidden_sizes.empty()) usage_error("classifier", "MLP needs at least one hidden layer");
        for (const int h : hidden_sizes)
            if (h <= 0) usage_error("classifier", "hidden sizes must be positive");
    }
}

namespace {

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

struct Batch {
    std::vector<std::span<const double>> x;
    std::vector<int> y;
};

// forward pass keeping activations; act[0] is the input copy
void forward(const std::vector<std::vector<double>>& w, const std::vector<std::vector<double>>& b,
             const std::vector<int>& sizes, std::span<const double> x,
             std::vector<std::vector<double>>& act) {
    act.resize(sizes.size());
    act[0].assign(x.begin(), x.end());
    for (std::size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
        const int in = sizes[layer];
        const int out = sizes[layer + 1];
        act[layer + 1].assign(static_cast<std::size_t>(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double z = b[layer][static_cast<std::size_t>(o)];
            const double* wr = w[layer].data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) z += wr[i] * act[layer][static_cast<std::size_t>(i)];
            act[layer + 1][static_cast<std::size_t>(o)] = z;
        }
        const bool last = layer + 2 == sizes.size();
        if (!last)
            for (double& v : act[layer + 1]) v = std::max(0.0, v);  // ReLU
    }
}

}  // namespace

std::vector<double> Classifier::logits(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(input_dim_))
        usage_error("classifier", "input dim mismatch: expected " + std::to_string(input_dim_) +
                                      ", got " + std::to_string(x.size()));
    std::vector<std::vector<double>> act;
    forward(weights_, biases_, sizes_, x, act);
    return act.back();
}

int Classifier::predict(std::span<const double> x) const {
    const auto z = logits(x);
    int best = 0;
    for (int c = 1; c < class_count_; ++c)
        if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(best)]) best = c;
    return best;
}

Classifier classifier_from_parts(ClassifierConfig cfg, std::vector<int> sizes,
                                 std::vector<std::vector<double>> weights,
                                 std::vector<std::vector<double>> biases) {
    if (sizes.size() < 2 || weights.size() != sizes.size() - 1 || biases.size() != weights.size())
        data_error("classifier", "inconsistent serialized classifier shape");
    Classifier clf;
    clf.config_ = std::move(cfg);
    clf.sizes_ = std::move(sizes);
    clf.input_dim_ = clf.sizes_.front();
    clf.class_count_ = clf.sizes_.back();
    clf.weights_ = std::move(weights);
    clf.biases_ = std::move(biases);
    return clf;
}

Classifier train_classifier(const EmbeddingSet& emb, const std::vector<EntityId>& train_entities,
                            const LabelMap& labels, const ClassifierConfig& cfg) {
    cfg.validate();
    if (train_entities.empty()) usage_error("classifier", "empty train set");

    const int dim = emb.entity_storage_dim();
    const int classes = labels.class_count();

    Batch batch;
    batch.x.reserve(train_entities.size());
    batch.y.reserve(train_entities.size());
    std::set<int> present;
    for (const EntityId e : train_entities) {
        batch.x.push_back(emb.entity(e));
        const int y = labels.assignment.at(e);
        batch.y.push_back(y);
        present.insert(y);
    }
    if (present.size() < 2) usage_error("classifier", "degenerate labels: single-class train set");

    // per-example weights: N / (C * count(class)) over classes present in y
    std::vector<double> class_weight(static_cast<std::size_t>(classes), 1.0);
    if (cfg.class_weighting == ClassWeighting::Balanced) {
        std::vector<int> counts(static_cast<std::size_t>(classes), 0);
        for (const int y : batch.y) ++counts[static_cast<std::size_t>(y)];
        const double n = static_cast<double>(batch.y.size());
        const double c = static_cast<double>(present.size());
        for (int k = 0; k < classes; ++k)
            if (counts[static_cast<std::size_t>(k)] > 0)
                class_weight[static_cast<std::size_t>(k)] =
                    n / (c * counts[static_cast<std::size_t>(k)]);
    }

    Classifier clf;
    clf.config_ = cfg;
    clf.input_dim_ = dim;
    clf.class_count_ = classes;
    clf.sizes_ = {dim};
    if (cfg.kind == ClassifierKind::Mlp)
        clf.sizes_.insert(clf.sizes_.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    clf.sizes_.push_back(classes);

    const std::size_t layers = clf.sizes_.size() - 1;
    clf.weights_.resize(layers);
    clf.biases_.resize(layers);
    Rng rng(cfg.seed);
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = clf.sizes_[l];
        const int out = clf.sizes_[l + 1];
        clf.weights_[l].assign(static_cast<std::size_t>(in) * out, 0.0);
        clf.biases_[l].assign(static_cast<std::size_t>(out), 0.0);
        if (cfg.kind == ClassifierKind::Mlp) {
            const double glorot = std::sqrt(6.0 / (in + out));
            for (double& w : clf.weights_[l]) w = rng.uniform(-glorot, glorot);
        }
        // logistic regression keeps the deterministic zero init
    }

    const double inv_n = 1.0 / static_cast<double>(batch.y.size());
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> grad_w(layers);
    std::vector<std::vector<double>> grad_b(layers);
    std::vector<std::vector<double>> delta(clf.sizes_.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t l = 0; l < layers; ++l) {
            grad_w[l].assign(clf.weights_[l].size(), 0.0);
            grad_b[l].assign(clf.biases_[l].size(), 0.0);
        }
        for (std::size_t i = 0; i < batch.y.size(); ++i) {
            forward(clf.weights_, clf.biases_, clf.sizes_, batch.x[i], act);
            std::vector<double> prob = act.back();
            softmax_inplace(prob);
            const double wgt = class_weight[static_cast<std::size_t>(batch.y[i])];

            // output delta = w * (p - onehot)
            delta.back() = prob;
            delta.back()[static_cast<std::size_t>(batch.y[i])] -= 1.0;
            for (double& d : delta.back()) d *= wgt;

            for (std::size_t l = layers; l-- > 0;) {
                const int in = clf.sizes_[l];
                const int out = clf.sizes_[l + 1];
                for (int o = 0; o < out; ++o) {
                    const double d = delta[l + 1][static_cast<std::size_t>(o)];
                    grad_b[l][static_cast<std::size_t>(o)] += d;
                    double* gw = grad_w[l].data() + static_cast<std::size_t>(o) * in;
                    for (int c = 0; c < in; ++c) gw[c] += d * act[l][static_cast<std::size_t>(c)];
                }
                if (l == 0) break;
                delta[l].assign(static_cast<std::size_t>(in), 0.0);
                for (int c = 0; c < in; ++c) {
                    if (act[l][static_cast<std::size_t>(c)] <= 0.0) continue;  // ReLU cut
                    double s = 0;
                    for (int o = 0; o < out; ++o)
                        s += clf.weights_[l][static_cast<std::size_t>(o) * in + c] *
                             delta[l + 1][static_cast<std::size_t>(o)];
                    delta[l][static_cast<std::size_t>(c)] = s;
                }
            }
        }
        const double step = cfg.learning_rate * inv_n;
        for (std::size_t l = 0; l < layers; ++l) {
            for (std::size_t j = 0; j < clf.weights_[l].size(); ++j)
                clf.weights_[l][j] -= step * grad_w[l][j];
            for (std::size_t j = 0; j < clf.biases_[l].size(); ++j)
                clf.biases_[l][j] -= step * grad_b[l][j];
        }
    }
    return clf;
}

PredictionTable predict_table(const Classifier& clf, const EmbeddingSet& emb,
                              const std::vector<EntityId>& test_entities, const LabelMap& labels) {
    if (clf.input_dim() != emb.entity_storage_dim())
        usage_error("classifier", "classifier input dim " + std::to_string(clf.input_dim()) +
                                      " does not match embedding storage dim " +
                                      std::to_string(emb.entity_storage_dim()));
    PredictionTable table;
    table.classes = labels.classes;
    table.rows.reserve(test_entities.size());
    for (const EntityId e : test_entities)
        table.rows.push_back(PredictionRow{e, labels.assignment.at(e), clf.predict(emb.entity(e))});
    return table;
}

ClassifierMetrics evaluate_classifier(const PredictionTable& table) {
    if (table.rows.empty()) usage_error("classifier", "empty prediction table");
    const int classes = static_cast<int>(table.classes.size());
    std::vector<int> truth_count(static_cast<std::size_t>(classes), 0);
    std::vector<int> correct_count(static_cast<std::size_t>(classes), 0);
    std::size_t correct = 0;
    for (const PredictionRow& row : table.rows) {
        ++truth_count[static_cast<std::size_t>(row.truth)];
        if (row.predicted == row.truth) {
            ++correct;
            ++correct_count[static_cast<std::size_t>(row.truth)];
        }
    }
    ClassifierMetrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(table.rows.size());
    double recall_sum = 0;
    int present = 0;
    for (int c = 0; c < classes; ++c) {
        if (truth_count[static_cast<std::size_t>(c)] == 0) continue;
        ++present;
        recall_sum += static_cast<double>(correct_count[static_cast<std::size_t>(c)]) /
                      static_cast<double>(truth_count[static_cast<std::size_t>(c)]);
    }
    m.balanced_accuracy = recall_sum / present;
    m.classes_present = present;
    return m;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (const char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

}  // namespace

void write_prediction_csv(const PredictionTable& table, const std::vector<std::string>& names,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) data_error("classifier", "cannot write " + path);
    out << "entity,true,predicted\n";
    for (const PredictionRow& row : table.rows) {
        out << csv_field(names[row.entity]) << ','
            << csv_field(table.classes[static_cast<std::size_t>(row.truth)]) << ','
            << csv_field(table.classes[static_cast<std::size_t>(row.predicted)]) << '\n';
    }
    if (!out) data_error("classifier", "I/O failure writing " + path);
}

}  // namespace kgbias
