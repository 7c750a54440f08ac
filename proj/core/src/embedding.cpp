#include "kgbias/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kgbias/error.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

std::string to_string(ScoreModel m) {
    switch (m) {
        case ScoreModel::TransE: return "TRANSE";
        case ScoreModel::DistMult: return "DISTMULT";
        case ScoreModel::ComplEx: return "COMPLEX";
        case ScoreModel::RotatE: return "ROTATE";
    }
    internal_error("embedding", "invalid model enum");
}

ScoreModel score_model_from_string(const std::string& tag) {
    if (tag == "TRANSE") return ScoreModel::TransE;
    if (tag == "DISTMULT") return ScoreModel::DistMult;
    if (tag == "COMPLEX") return ScoreModel::ComplEx;
    if (tag == "ROTATE") return ScoreModel::RotatE;
    data_error("embedding", "unsupported model tag '" + tag + "'");
}

EmbeddingSet::EmbeddingSet(ScoreModel model, int dim, std::vector<std::string> entity_labels,
                           std::vector<std::string> relation_labels)
    : model_(model),
      dim_(dim),
      entity_labels_(std::move(entity_labels)),
      relation_labels_(std::move(relation_labels)) {
    if (dim_ <= 0) usage_error("embedding", "dim must be positive");
    for (std::size_t i = 0; i < entity_labels_.size(); ++i)
        entity_index_.emplace(entity_labels_[i], static_cast<EntityId>(i));
    for (std::size_t i = 0; i < relation_labels_.size(); ++i)
        relation_index_.emplace(relation_labels_[i], static_cast<RelationId>(i));
    entity_data_.assign(entity_labels_.size() * static_cast<std::size_t>(entity_storage_dim()),
                        0.0);
    relation_data_.assign(
        relation_labels_.size() * static_cast<std::size_t>(relation_storage_dim()), 0.0);
}

int EmbeddingSet::entity_storage_dim() const {
    return (model_ == ScoreModel::ComplEx || model_ == ScoreModel::RotatE) ? 2 * dim_ : dim_;
}

int EmbeddingSet::relation_storage_dim() const {
    return model_ == ScoreModel::RotatE ? dim_ : entity_storage_dim();
}

std::optional<EntityId> EmbeddingSet::find_entity(const std::string& label) const {
    auto it = entity_index_.find(label);
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> EmbeddingSet::find_relation(const std::string& label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

std::span<const double> EmbeddingSet::entity(EntityId id) const {
    if (id >= entity_count()) data_error("embedding", "unknown entity id " + std::to_string(id));
    const auto d = static_cast<std::size_t>(entity_storage_dim());
    return {entity_data_.data() + id * d, d};
}

std::span<const double> EmbeddingSet::relation(RelationId id) const {
    if (id >= relation_count())
        data_error("embedding", "unknown relation id " + std::to_string(id));
    const auto d = static_cast<std::size_t>(relation_storage_dim());
    return {relation_data_.data() + id * d, d};
}

std::span<double> EmbeddingSet::entity_mut(EntityId id) {
    const auto d = static_cast<std::size_t>(entity_storage_dim());
    return {entity_data_.data() + id * d, d};
}

std::span<double> EmbeddingSet::relation_mut(RelationId id) {
    const auto d = static_cast<std::size_t>(relation_storage_dim());
    return {relation_data_.data() + id * d, d};
}

bool EmbeddingSet::all_finite() const {
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(entity_data_) && finite(relation_data_);
}

Loss TrainConfig::loss_for(ScoreModel m) const {
    if (loss) return *loss;
    return (m == ScoreModel::TransE || m == ScoreModel::RotatE) ? Loss::Margin : Loss::Logistic;
}

void TrainConfig::validate() const {
    if (dim <= 0) usage_error("train", "dim must be positive");
    if (epochs < 0) usage_error("train", "epochs must be >= 0");
    if (learning_rate <= 0) usage_error("train", "learning_rate must be positive");
    if (margin <= 0) usage_error("train", "margin must be positive");
    if (negatives_per_positive <= 0) usage_error("train", "negatives_per_positive must be positive");
    if (batch_size <= 0) usage_error("train", "batch_size must be positive");
}

namespace {

double l2_norm(std::span<const double> v) {
    double s = 0;
    for (const double x : v) s += x * x;
    return std::sqrt(s);
}

// TransE residual h + r - t
void transe_residual(std::span<const double> h, std::span<const double> r,
                     std::span<const double> t, std::vector<double>& v) {
    v.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) v[i] = h[i] + r[i] - t[i];
}

// RotatE residual h*e^{i theta} - t over 2*dim real storage
void rotate_residual(std::span<const double> h, std::span<const double> theta,
                     std::span<const double> t, std::vector<double>& v) {
    const std::size_t d = theta.size();
    v.resize(2 * d);
    for (std::size_t j = 0; j < d; ++j) {
        const double c = std::cos(theta[j]);
        const double s = std::sin(theta[j]);
        v[j] = h[j] * c - h[d + j] * s - t[j];
        v[d + j] = h[j] * s + h[d + j] * c - t[d + j];
    }
}

double score_impl(const EmbeddingSet& emb, std::span<const double> h, std::span<const double> r,
                  std::span<const double> t) {
    switch (emb.model()) {
        case ScoreModel::TransE: {
            double acc = 0;
            if (emb.transe_norm() == Norm::L2) {
                for (std::size_t i = 0; i < h.size(); ++i) {
                    const double v = h[i] + r[i] - t[i];
                    acc += v * v;
                }
                return -std::sqrt(acc);
            }
            for (std::size_t i = 0; i < h.size(); ++i) acc += std::abs(h[i] + r[i] - t[i]);
            return -acc;
        }
        case ScoreModel::DistMult: {
            double acc = 0;
            for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * r[i] * t[i];
            return acc;
        }
        case ScoreModel::ComplEx: {
            // Re(sum h_j r_j conj(t_j)) with storage [re..., im...]
            const std::size_t d = h.size() / 2;
            double acc = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double hr = h[j], hi = h[d + j];
                const double rr = r[j], ri = r[d + j];
                const double tr = t[j], ti = t[d + j];
                acc += tr * (hr * rr - hi * ri) + ti * (hr * ri + hi * rr);
            }
            return acc;
        }
        case ScoreModel::RotatE: {
            const std::size_t d = r.size();
            double acc = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = std::cos(r[j]);
                const double s = std::sin(r[j]);
                const double vr = h[j] * c - h[d + j] * s - t[j];
                const double vi = h[j] * s + h[d + j] * c - t[d + j];
                acc += vr * vr + vi * vi;
            }
            return -std::sqrt(acc);
        }
    }
    internal_error("embedding", "invalid model enum");
}

// Gradients of the score w.r.t. head, relation and tail; any output may be
// null. Used by the public head-gradient op and the trainer.
void grad_impl(const EmbeddingSet& emb, std::span<const double> h, std::span<const double> r,
               std::span<const double> t, std::vector<double>* gh, std::vector<double>* gr,
               std::vector<double>* gt) {
    auto zero = [](std::vector<double>* g, std::size_t n) {
        if (g) g->assign(n, 0.0);
    };
    switch (emb.model()) {
        case ScoreModel::TransE: {
            std::vector<double> v;
            transe_residual(h, r, t, v);
            zero(gh, h.size());
            zero(gr, r.size());
            zero(gt, t.size());
            if (emb.transe_norm() == Norm::L2) {
                const double n = l2_norm(v);
                if (n == 0.0) return;  // singular point convention
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double g = -v[i] / n;
                    if (gh) (*gh)[i] = g;
                    if (gr) (*gr)[i] = g;
                    if (gt) (*gt)[i] = -g;
                }
            } else {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double g = v[i] > 0 ? -1.0 : (v[i] < 0 ? 1.0 : 0.0);
                    if (gh) (*gh)[i] = g;
                    if (gr) (*gr)[i] = g;
                    if (gt) (*gt)[i] = -g;
                }
            }
            return;
        }
        case ScoreModel::DistMult: {
            zero(gh, h.size());
            zero(gr, r.size());
            zero(gt, t.size());
            for (std::size_t i = 0; i < h.size(); ++i) {
                if (gh) (*gh)[i] = r[i] * t[i];
                if (gr) (*gr)[i] = h[i] * t[i];
                if (gt) (*gt)[i] = h[i] * r[i];
            }
            return;
        }
        case ScoreModel::ComplEx: {
            const std::size_t d = h.size() / 2;
            zero(gh, h.size());
            zero(gr, r.size());
            zero(gt, t.size());
            for (std::size_t j = 0; j < d; ++j) {
                const double hr = h[j], hi = h[d + j];
                const double rr = r[j], ri = r[d + j];
                const double tr = t[j], ti = t[d + j];
                if (gh) {
                    (*gh)[j] = rr * tr + ri * ti;
                    (*gh)[d + j] = -ri * tr + rr * ti;
                }
                if (gr) {
                    (*gr)[j] = hr * tr + hi * ti;
                    (*gr)[d + j] = -hi * tr + hr * ti;
                }
                if (gt) {
                    (*gt)[j] = hr * rr - hi * ri;
                    (*gt)[d + j] = hr * ri + hi * rr;
                }
            }
            return;
        }
        case ScoreModel::RotatE: {
            const std::size_t d = r.size();
            std::vector<double> v;
            rotate_residual(h, r, t, v);
            zero(gh, h.size());
            zero(gr, r.size());
            zero(gt, t.size());
            const double n = l2_norm(v);
            if (n == 0.0) return;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = std::cos(r[j]);
                const double s = std::sin(r[j]);
                const double vr = v[j], vi = v[d + j];
                if (gh) {
                    (*gh)[j] = -(vr * c + vi * s) / n;
                    (*gh)[d + j] = -(-vr * s + vi * c) / n;
                }
                if (gr) {
                    const double dvr = -h[j] * s - h[d + j] * c;
                    const double dvi = h[j] * c - h[d + j] * s;
                    (*gr)[j] = -(vr * dvr + vi * dvi) / n;
                }
                if (gt) {
                    (*gt)[j] = vr / n;
                    (*gt)[d + j] = vi / n;
                }
            }
            return;
        }
    }
    internal_error("embedding", "invalid model enum");
}

}  // namespace

double score(const EmbeddingSet& emb, EntityId h, RelationId r, EntityId t) {
    return score_impl(emb, emb.entity(h), emb.relation(r), emb.entity(t));
}

double score_with_head(const EmbeddingSet& emb, std::span<const double> head, RelationId r,
                       EntityId t) {
    if (head.size() != static_cast<std::size_t>(emb.entity_storage_dim()))
        usage_error("embedding", "head vector length does not match entity storage dim");
    return score_impl(emb, head, emb.relation(r), emb.entity(t));
}

std::vector<double> grad_score_wrt_head(const EmbeddingSet& emb, EntityId h, RelationId r,
                                        EntityId t) {
    std::vector<double> g;
    grad_impl(emb, emb.entity(h), emb.relation(r), emb.entity(t), &g, nullptr, nullptr);
    return g;
}

namespace {

void axpy(std::span<double> x, const std::vector<double>& g, double a) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += a * g[i];
}

struct TripleGrads {
    std::vector<double> h, r, t;
};

// One SGD step on a (positive, negative) pair; coeff is dLoss/dscore sign
// folded with the learning rate.
void apply_pair(EmbeddingSet& emb, const Triple& tr, double step, TripleGrads& g) {
    grad_impl(emb, emb.entity(tr.head), emb.relation(tr.relation), emb.entity(tr.tail), &g.h,
              &g.r, &g.t);
    axpy(emb.entity_mut(tr.head), g.h, step);
    axpy(emb.relation_mut(tr.relation), g.r, step);
    axpy(emb.entity_mut(tr.tail), g.t, step);
}

double softplus_sigmoid(double x) {  // d softplus(x)/dx
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

EmbeddingSet train_embeddings(const KnowledgeGraph& kg, ScoreModel model, const TrainConfig& cfg) {
    cfg.validate();
    if (kg.triples().empty()) usage_error("train", "knowledge graph has no triples");

    EmbeddingSet emb(model, cfg.dim, kg.entities(), kg.relations());
    emb.set_transe_norm(cfg.transe_norm);

    Rng rng(cfg.seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (EntityId e = 0; e < emb.entity_count(); ++e)
        for (double& x : emb.entity_mut(e)) x = rng.uniform(-bound, bound);
    for (RelationId r = 0; r < emb.relation_count(); ++r) {
        auto vec = emb.relation_mut(r);
        if (model == ScoreModel::RotatE)
            for (double& x : vec) x = rng.uniform(0.0, 2.0 * std::numbers::pi);
        else
            for (double& x : vec) x = rng.uniform(-bound, bound);
    }

    const Loss loss = cfg.loss_for(model);
    const std::size_t n_entities = kg.entity_count();
    std::vector<std::size_t> order(kg.triples().size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TripleGrads g;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            for (std::size_t i = start; i < stop; ++i) {
                const Triple pos = kg.triples()[order[i]];
                for (int k = 0; k < cfg.negatives_per_positive; ++k) {
                    Triple neg = pos;
                    // corrupt head or tail uniformly; resample a bounded number
                    // of times if the corruption lands on a known fact
                    for (int attempt = 0; attempt < 64; ++attempt) {
                        neg = pos;
                        const bool corrupt_head = rng.below(2) == 0;
                        const auto repl = static_cast<EntityId>(rng.below(n_entities));
                        (corrupt_head ? neg.head : neg.tail) = repl;
                        if (!kg.contains(neg)) break;
                    }
                    if (kg.contains(neg)) continue;

                    if (loss == Loss::Margin) {
                        const double viol =
                            cfg.margin - score(emb, pos.head, pos.relation, pos.tail) +
                            score(emb, neg.head, neg.relation, neg.tail);
                        if (viol > 0) {
                            apply_pair(emb, pos, cfg.learning_rate, g);
                            apply_pair(emb, neg, -cfg.learning_rate, g);
                        }
                    } else {
                        const double sp = score(emb, pos.head, pos.relation, pos.tail);
                        const double sn = score(emb, neg.head, neg.relation, neg.tail);
                        apply_pair(emb, pos, cfg.learning_rate * softplus_sigmoid(-sp), g);
                        apply_pair(emb, neg, -cfg.learning_rate * softplus_sigmoid(sn), g);
                    }
                }
            }
        }
    }
    if (!emb.all_finite()) internal_error("train", "training diverged to non-finite values");
    return emb;
}

HitsReport evaluate_hits_at_k(const EmbeddingSet& emb, const std::vector<Triple>& test_triples,
                              const std::vector<int>& ks) {
    if (test_triples.empty()) usage_error("hits", "empty test set");
    for (const int k : ks)
        if (k <= 0) usage_error("hits", "k values must be positive");

    std::vector<std::size_t> ranks;
    ranks.reserve(test_triples.size());
    for (const Triple& t : test_triples) {
        const double true_score = score(emb, t.head, t.relation, t.tail);
        std::size_t rank = 1;
        for (EntityId e = 0; e < emb.entity_count(); ++e) {
            if (e == t.tail) continue;
            // pessimistic ties: equal scores outrank the true tail
            if (score(emb, t.head, t.relation, e) >= true_score) ++rank;
        }
        ranks.push_back(rank);
    }

    HitsReport report;
    report.evaluated = test_triples.size();
    for (const int k : ks) {
        std::size_t hit = 0;
        for (const std::size_t r : ranks)
            if (r <= static_cast<std::size_t>(k)) ++hit;
        report.hits[k] = static_cast<double>(hit) / static_cast<double>(ranks.size());
    }
    return report;
}

namespace {

std::string format_float(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_rows(std::ofstream& out, const std::vector<std::string>& labels,
                const EmbeddingSet& emb, bool entity_rows) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels[i] << '\t';
        const auto vec = entity_rows ? emb.entity(static_cast<EntityId>(i))
                                     : emb.relation(static_cast<RelationId>(i));
        for (std::size_t j = 0; j < vec.size(); ++j) {
            if (j) out << ' ';
            out << format_float(vec[j]);
        }
        out << '\n';
    }
}

}  // namespace

void save_embeddings(const EmbeddingSet& emb, const std::string& base_path) {
    nlohmann::ordered_json header{{"model", to_string(emb.model())},
                                  {"dim", emb.dim()},
                                  {"entity_count", emb.entity_count()},
                                  {"relation_count", emb.relation_count()},
                                  {"transe_norm", emb.transe_norm() == Norm::L1 ? "L1" : "L2"}};
    std::ofstream meta(base_path + ".json");
    if (!meta) data_error("embedding", "cannot write " + base_path + ".json");
    meta << header.dump(2) << '\n';

    std::ofstream body(base_path + ".tsv");
    if (!body) data_error("embedding", "cannot write " + base_path + ".tsv");
    write_rows(body, emb.entity_labels(), emb, true);
    write_rows(body, emb.relation_labels(), emb, false);
    if (!body) data_error("embedding", "I/O failure writing " + base_path + ".tsv");
}

EmbeddingSet load_embeddings(const std::string& base_path) {
    std::ifstream meta(base_path + ".json");
    if (!meta) data_error("embedding", "cannot open " + base_path + ".json");
    nlohmann::json header;
    try {
        meta >> header;
    } catch (const nlohmann::json::exception& e) {
        data_error("embedding", "malformed header " + base_path + ".json: " + e.what());
    }
    const ScoreModel model = score_model_from_string(header.at("model").get<std::string>());
    const int dim = header.at("dim").get<int>();
    if (dim <= 0) data_error("embedding", "header dim must be positive");
    const auto entity_count = header.at("entity_count").get<std::size_t>();
    const auto relation_count = header.at("relation_count").get<std::size_t>();
    const Norm norm =
        header.value("transe_norm", std::string("L2")) == "L1" ? Norm::L1 : Norm::L2;

    std::ifstream body(base_path + ".tsv");
    if (!body) data_error("embedding", "cannot open " + base_path + ".tsv");

    std::vector<std::string> entity_labels, relation_labels;
    std::vector<std::vector<double>> entity_rows, relation_rows;
    std::string line;
    std::size_t row_no = 0;
    while (std::getline(body, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            data_error("embedding",
                       base_path + ".tsv row " + std::to_string(row_no) + ": missing label field");
        std::vector<double> values;
        std::istringstream vs(line.substr(tab + 1));
        double x;
        while (vs >> x) values.push_back(x);
        if (!vs.eof())
            data_error("embedding",
                       base_path + ".tsv row " + std::to_string(row_no) + ": malformed float");

        const bool entity_row = entity_labels.size() < entity_count;
        const int want = entity_row ? ((model == ScoreModel::ComplEx || model == ScoreModel::RotatE)
                                           ? 2 * dim
                                           : dim)
                                    : (model == ScoreModel::RotatE
                                           ? dim
                                           : ((model == ScoreModel::ComplEx) ? 2 * dim : dim));
        if (values.size() != static_cast<std::size_t>(want))
            data_error("embedding", base_path + ".tsv row " + std::to_string(row_no) + ": expected " +
                                        std::to_string(want) + " floats, found " +
                                        std::to_string(values.size()));
        if (entity_row) {
            entity_labels.push_back(line.substr(0, tab));
            entity_rows.push_back(std::move(values));
        } else {
            relation_labels.push_back(line.substr(0, tab));
            relation_rows.push_back(std::move(values));
        }
    }
    if (entity_labels.size() != entity_count || relation_labels.size() != relation_count)
        data_error("embedding", base_path + ".tsv: row count does not match header counts");

    EmbeddingSet emb(model, dim, std::move(entity_labels), std::move(relation_labels));
    emb.set_transe_norm(norm);
    for (std::size_t i = 0; i < entity_rows.size(); ++i)
        std::copy(entity_rows[i].begin(), entity_rows[i].end(),
                  emb.entity_mut(static_cast<EntityId>(i)).begin());
    for (std::size_t i = 0; i < relation_rows.size(); ++i)
        std::copy(relation_rows[i].begin(), relation_rows[i].end(),
                  emb.relation_mut(static_cast<RelationId>(i)).begin());
    if (!emb.all_finite()) data_error("embedding", base_path + ": non-finite values");
    return emb;
}

EmbeddingSet reindex_to_graph(const EmbeddingSet& emb, const KnowledgeGraph& kg) {
    EmbeddingSet out(emb.model(), emb.dim(), kg.entities(), kg.relations());
    out.set_transe_norm(emb.transe_norm());
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        const auto src = emb.find_entity(kg.entity_label(e));
        if (!src)
            data_error("embedding",
                       "embedding set lacks entity '" + kg.entity_label(e) + "' required by graph");
        const auto row = emb.entity(*src);
        std::copy(row.begin(), row.end(), out.entity_mut(e).begin());
    }
    for (RelationId r = 0; r < kg.relation_count(); ++r) {
        const auto src = emb.find_relation(kg.relation_label(r));
        if (!src)
            data_error("embedding", "embedding set lacks relation '" + kg.relation_label(r) +
                                        "' required by graph");
        const auto row = emb.relation(*src);
        std::copy(row.begin(), row.end(), out.relation_mut(r).begin());
    }
    return out;
}

}  // namespace kgbias
