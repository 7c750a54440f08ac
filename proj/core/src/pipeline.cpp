#include "kgbias/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kgbias/error.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

void RunConfig::validate() const {
    if (measures.empty()) usage_error("config", "at least one measure required");
    if (target_relation.empty()) usage_error("config", "target_relation must be named");
    if (embeddings.empty()) usage_error("config", "at least one embedding source required");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        usage_error("config", "test_fraction must lie in (0,1)");
    if (k_top_classes < 1) usage_error("config", "k_top_classes must be >= 1");
    if (min_tail_count < 1) usage_error("config", "min_tail_count must be >= 1");
    if (tlb_alpha < 0) usage_error("config", "tlb alpha must be >= 0");
    if (!(auto_min_fraction >= 0.0 && auto_min_fraction <= 1.0))
        usage_error("config", "auto_min_fraction must lie in [0,1]");
    for (const EmbeddingSource& src : embeddings) {
        if (src.train.has_value() == src.load.has_value())
            usage_error("config", "each embedding source needs exactly one of train/load");
        if (src.train) src.train->validate();
    }
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.dataset_paths = {"data/train.txt"};
    cfg.target_relation = "profession";
    cfg.auto_candidates = true;
    EmbeddingSource src;
    src.model = ScoreModel::TransE;
    src.train = TrainConfig{};
    cfg.embeddings = {std::move(src)};
    cfg.seed = 7;
    return cfg;
}

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.dim = j.value("dim", cfg.dim);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.margin = j.value("margin", cfg.margin);
    cfg.negatives_per_positive = j.value("negatives_per_positive", cfg.negatives_per_positive);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    if (j.contains("loss") && !j.at("loss").is_null()) {
        const auto tag = j.at("loss").get<std::string>();
        if (tag == "MARGIN")
            cfg.loss = Loss::Margin;
        else if (tag == "LOGISTIC")
            cfg.loss = Loss::Logistic;
        else
            usage_error("config", "unknown loss '" + tag + "'");
    }
    cfg.transe_norm = j.value("transe_norm", std::string("L2")) == "L1" ? Norm::L1 : Norm::L2;
    return cfg;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
    ordered_json j{{"dim", cfg.dim},
                   {"epochs", cfg.epochs},
                   {"learning_rate", cfg.learning_rate},
                   {"margin", cfg.margin},
                   {"negatives_per_positive", cfg.negatives_per_positive},
                   {"batch_size", cfg.batch_size},
                   {"transe_norm", cfg.transe_norm == Norm::L1 ? "L1" : "L2"}};
    if (cfg.loss) j["loss"] = *cfg.loss == Loss::Margin ? "MARGIN" : "LOGISTIC";
    return j;
}

ClassifierConfig classifier_config_from_json(const json& j) {
    ClassifierConfig cfg;
    const auto kind = j.value("kind", std::string("LOGISTIC"));
    if (kind == "LOGISTIC")
        cfg.kind = ClassifierKind::Logistic;
    else if (kind == "MLP")
        cfg.kind = ClassifierKind::Mlp;
    else
        usage_error("config", "unknown classifier kind '" + kind + "'");
    cfg.hidden_sizes = j.value("hidden_sizes", cfg.hidden_sizes);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    const auto weighting = j.value("class_weighting", std::string("BALANCED"));
    if (weighting == "BALANCED")
        cfg.class_weighting = ClassWeighting::Balanced;
    else if (weighting == "NONE")
        cfg.class_weighting = ClassWeighting::None;
    else
        usage_error("config", "unknown class_weighting '" + weighting + "'");
    return cfg;
}

ordered_json classifier_config_to_json(const ClassifierConfig& cfg) {
    return ordered_json{
        {"kind", cfg.kind == ClassifierKind::Logistic ? "LOGISTIC" : "MLP"},
        {"hidden_sizes", cfg.hidden_sizes},
        {"epochs", cfg.epochs},
        {"learning_rate", cfg.learning_rate},
        {"class_weighting", cfg.class_weighting == ClassWeighting::Balanced ? "BALANCED" : "NONE"}};
}

}  // namespace

RunConfig run_config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        usage_error("config", std::string("malformed config JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            if (d.is_array()) {
                cfg.dataset_paths = d.get<std::vector<std::string>>();
            } else {
                cfg.dataset_paths.clear();
                for (const char* key : {"train", "valid", "test"})
                    if (d.contains(key) && !d.at(key).is_null())
                        cfg.dataset_paths.push_back(d.at(key).get<std::string>());
            }
        }
        cfg.target_relation = j.value("target_relation", cfg.target_relation);
        if (j.contains("candidate_sensitive")) {
            const json& c = j.at("candidate_sensitive");
            if (c.is_string() && c.get<std::string>() == "auto") {
                cfg.auto_candidates = true;
            } else if (c.is_array()) {
                cfg.candidate_sensitive = c.get<std::vector<std::string>>();
            } else {
                usage_error("config", "candidate_sensitive must be \"auto\" or a list");
            }
        } else {
            cfg.auto_candidates = true;
        }
        cfg.auto_min_fraction = j.value("auto_min_fraction", cfg.auto_min_fraction);
        cfg.k_top_classes = j.value("k_top_classes", cfg.k_top_classes);
        cfg.min_tail_count = j.value("min_tail_count", cfg.min_tail_count);
        cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
        if (j.contains("measures")) {
            cfg.measures.clear();
            for (const auto& m : j.at("measures"))
                cfg.measures.push_back(measure_from_string(m.get<std::string>()));
        }
        if (j.contains("embeddings")) {
            cfg.embeddings.clear();
            for (const auto& e : j.at("embeddings")) {
                EmbeddingSource src;
                src.model = score_model_from_string(e.at("model").get<std::string>());
                if (e.contains("train") && !e.at("train").is_null())
                    src.train = train_config_from_json(e.at("train"));
                if (e.contains("load") && !e.at("load").is_null())
                    src.load = e.at("load").get<std::string>();
                cfg.embeddings.push_back(std::move(src));
            }
        } else {
            EmbeddingSource src;
            src.model = ScoreModel::TransE;
            src.train = TrainConfig{};
            cfg.embeddings = {std::move(src)};
        }
        if (j.contains("classifier"))
            cfg.classifier = classifier_config_from_json(j.at("classifier"));
        if (j.contains("tlb")) {
            cfg.tlb_alpha = j.at("tlb").value("alpha", cfg.tlb_alpha);
            cfg.tlb_head_cap = j.at("tlb").value("head_sample_cap", cfg.tlb_head_cap);
        }
        if (j.contains("output")) {
            const json& o = j.at("output");
            cfg.out_dir = o.value("dir", cfg.out_dir);
            if (o.contains("formats")) {
                cfg.formats.clear();
                for (const auto& f : o.at("formats"))
                    cfg.formats.push_back(report_format_from_string(f.get<std::string>()));
            }
            cfg.top_n = o.value("top_n", cfg.top_n);
        }
        if (!j.contains("seed")) usage_error("config", "seed is required");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        usage_error("config", std::string("invalid config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) usage_error("config", "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json(buf.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    ordered_json emb = ordered_json::array();
    for (const EmbeddingSource& src : cfg.embeddings) {
        ordered_json e{{"model", to_string(src.model)}};
        if (src.train) e["train"] = train_config_to_json(*src.train);
        if (src.load) e["load"] = *src.load;
        emb.push_back(std::move(e));
    }
    ordered_json formats = ordered_json::array();
    for (const ReportFormat f : cfg.formats) formats.push_back(to_string(f));
    ordered_json measures = ordered_json::array();
    for (const Measure m : cfg.measures) measures.push_back(to_string(m));

    ordered_json j{
        {"dataset", cfg.dataset_paths},
        {"target_relation", cfg.target_relation},
        {"candidate_sensitive",
         cfg.auto_candidates ? ordered_json("auto") : ordered_json(cfg.candidate_sensitive)},
        {"auto_min_fraction", cfg.auto_min_fraction},
        {"k_top_classes", cfg.k_top_classes},
        {"min_tail_count", cfg.min_tail_count},
        {"test_fraction", cfg.test_fraction},
        {"measures", measures},
        {"embeddings", emb},
        {"classifier", classifier_config_to_json(cfg.classifier)},
        {"tlb", ordered_json{{"alpha", cfg.tlb_alpha}, {"head_sample_cap", cfg.tlb_head_cap}}},
        {"output",
         ordered_json{{"dir", cfg.out_dir}, {"formats", formats}, {"top_n", cfg.top_n}}},
        {"seed", cfg.seed}};
    return j.dump(2);
}

std::string current_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

KnowledgeGraph load_dataset(const RunConfig& cfg) {
    if (cfg.dataset_paths.empty()) usage_error("parse", "no dataset paths configured");
    std::vector<RawTriple> raw;
    for (const std::string& path : cfg.dataset_paths) {
        auto part = parse_triples(path);
        raw.insert(raw.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
    }
    return build_graph(raw);
}

std::vector<RelationId> resolve_candidates(const RunConfig& cfg, const KnowledgeGraph& kg,
                                           const Population& pop) {
    std::vector<RelationId> out;
    if (!cfg.auto_candidates) {
        for (const std::string& name : cfg.candidate_sensitive) {
            const auto rel = kg.find_relation(name);
            if (!rel) data_error("population", "unknown candidate relation '" + name + "'");
            if (*rel != pop.target_relation) out.push_back(*rel);
        }
        return out;
    }
    // auto discovery: every relation held by at least auto_min_fraction of the
    // population, target excluded
    std::vector<std::size_t> holders(kg.relation_count(), 0);
    for (const EntityId e : pop.entities) {
        std::set<RelationId> seen;
        for (const auto& [rel, tail] : kg.outgoing(e)) seen.insert(rel);
        for (const RelationId rel : seen) ++holders[rel];
    }
    const auto min_holders = static_cast<std::size_t>(
        cfg.auto_min_fraction * static_cast<double>(pop.entities.size()));
    for (RelationId rel = 0; rel < kg.relation_count(); ++rel) {
        if (rel == pop.target_relation) continue;
        if (holders[rel] >= std::max<std::size_t>(min_holders, 1)) out.push_back(rel);
    }
    return out;
}

BiasReport empty_report(const RunConfig& cfg, const std::vector<std::string>& relation_names,
                        const std::string& reason) {
    BiasReport report;
    for (const EmbeddingSource& src : cfg.embeddings) report.models.push_back(to_string(src.model));
    report.measures = cfg.measures;
    for (const std::string& rel : relation_names) {
        report.skipped[rel] = reason;
        report.relations.push_back(rel);
        for (const Measure m : cfg.measures)
            for (const std::string& model : report.models)
                report.aggregated.push_back(
                    AggregateScore{rel, m, model, ScoreStatus::Skipped, 0.0, reason});
    }
    report.provenance.notes.push_back(
        relation_names.empty() ? "empty report body: no candidate sensitive relations"
                               : "empty report body: no candidate relation survived tail filtering");
    return report;
}

void fill_provenance(ProvenanceInfo& p, const RunConfig& cfg, std::size_t population,
                     std::size_t train, std::size_t test, bool classifier_trained) {
    p.seed = cfg.seed;
    p.test_fraction = cfg.test_fraction;
    p.k_top_classes = cfg.k_top_classes;
    p.min_tail_count = cfg.min_tail_count;
    p.tlb_alpha = cfg.tlb_alpha;
    p.tlb_head_cap = cfg.tlb_head_cap;
    p.population_size = population;
    p.train_size = train;
    p.test_size = test;
    p.dataset_paths = cfg.dataset_paths;
    if (classifier_trained) {
        p.classifier = cfg.classifier.kind == ClassifierKind::Logistic
                           ? "multinomial-logistic"
                           : "mlp";
        p.classifier_note =
            "stand-in for the reference random-forest/MLP setup; deterministic, "
            "class_weighting=" +
            std::string(cfg.classifier.class_weighting == ClassWeighting::Balanced ? "BALANCED"
                                                                                   : "NONE");
    }
    p.timestamp = current_timestamp();
}

}  // namespace

PipelineResult run_on_graph(const RunConfig& cfg,
                            const KnowledgeGraph& kg,
                            const std::vector<std::pair<std::string, EmbeddingSet>>& pretrained,
                            bool save_artifacts) {
    cfg.validate();

    const auto target = kg.find_relation(cfg.target_relation);
    if (!target) data_error("population", "unknown target relation '" + cfg.target_relation + "'");
    Population pop = human_subgraph(kg, *target, {});
    const std::vector<RelationId> candidates = resolve_candidates(cfg, kg, pop);
    pop.candidate_sensitive = candidates;

    const LabelMap labels = prepare_labels(kg, *target, cfg.k_top_classes, pop);

    const bool wants_classifier =
        std::find(cfg.measures.begin(), cfg.measures.end(), Measure::DPD) != cfg.measures.end() ||
        std::find(cfg.measures.begin(), cfg.measures.end(), Measure::PPD) != cfg.measures.end();

    // survivor pre-check so an all-filtered candidate set still produces an
    // explanatory (empty-body) report instead of a hard audit error
    std::vector<std::string> candidate_names;
    std::size_t survivors = 0;
    for (const RelationId rel : candidates) {
        candidate_names.push_back(kg.relation_label(rel));
        if (filter_rare_tails(kg, rel, cfg.min_tail_count, pop).size() >= 2) ++survivors;
    }

    auto [train_entities, test_entities] =
        split_population(pop, labels, cfg.test_fraction, Rng::derive_seed(cfg.seed, "split"));

    if (survivors == 0) {
        BiasReport report = empty_report(cfg, candidate_names, "no tail meets min_count");
        fill_provenance(report.provenance, cfg, pop.entities.size(), train_entities.size(),
                        test_entities.size(), false);
        PipelineResult result{std::move(report), {}};
        result.written_files = emit_report(result.report, cfg.formats, cfg.out_dir, cfg.top_n);
        return result;
    }

    std::vector<BiasReport> partials;
    bool classifier_trained = false;
    for (const EmbeddingSource& src : cfg.embeddings) {
        const std::string model_name = to_string(src.model);
        EmbeddingSet emb;
        if (src.train) {
            TrainConfig tc = *src.train;
            tc.seed = Rng::derive_seed(cfg.seed, "train:" + model_name);
            emb = train_embeddings(kg, src.model, tc);
            if (save_artifacts) save_embeddings(emb, cfg.out_dir + "/emb_" + model_name);
        } else {
            const EmbeddingSet* found = nullptr;
            for (const auto& [name, set] : pretrained)
                if (name == model_name) found = &set;
            emb = found ? reindex_to_graph(*found, kg)
                        : reindex_to_graph(load_embeddings(*src.load), kg);
        }

        PredictionTable table;
        if (wants_classifier) {
            ClassifierConfig cc = cfg.classifier;
            cc.seed = Rng::derive_seed(cfg.seed, "classifier:" + model_name);
            const Classifier clf = train_classifier(emb, train_entities, labels, cc);
            classifier_trained = true;
            table = predict_table(clf, emb, test_entities, labels);
            if (save_artifacts) {
                save_classifier(clf, labels.classes, cfg.out_dir + "/classifier_" + model_name + ".json");
                write_prediction_csv(table, kg.entities(),
                                     cfg.out_dir + "/predictions_" + model_name + ".csv");
            }
        }

        AuditConfig ac;
        ac.min_tail_count = cfg.min_tail_count;
        ac.tlb_alpha = cfg.tlb_alpha;
        ac.tlb_head_cap = cfg.tlb_head_cap;
        ac.seed = cfg.seed;
        partials.push_back(audit(kg, emb, wants_classifier ? &table : nullptr, labels, pop,
                                 candidates, cfg.measures, ac, model_name));
    }

    BiasReport report = merge_reports(partials);
    fill_provenance(report.provenance, cfg, pop.entities.size(), train_entities.size(),
                    test_entities.size(), classifier_trained);

    PipelineResult result{std::move(report), {}};
    result.written_files = emit_report(result.report, cfg.formats, cfg.out_dir, cfg.top_n);
    return result;
}

PipelineResult run(const RunConfig& cfg) {
    const KnowledgeGraph kg = load_dataset(cfg);
    return run_on_graph(cfg, kg, {}, true);
}

std::vector<std::string> train_embeddings_stage(const RunConfig& cfg) {
    cfg.validate();
    const KnowledgeGraph kg = load_dataset(cfg);
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    std::vector<std::string> written;
    for (const EmbeddingSource& src : cfg.embeddings) {
        if (!src.train) continue;
        const std::string model_name = to_string(src.model);
        TrainConfig tc = *src.train;
        tc.seed = Rng::derive_seed(cfg.seed, "train:" + model_name);
        const EmbeddingSet emb = train_embeddings(kg, src.model, tc);
        const std::string base = cfg.out_dir + "/emb_" + model_name;
        save_embeddings(emb, base);
        written.push_back(base + ".json");
        written.push_back(base + ".tsv");
    }
    if (written.empty())
        usage_error("train", "no embedding source with a train config; nothing to do");
    return written;
}

std::vector<std::string> train_classifier_stage(const RunConfig& cfg) {
    cfg.validate();
    const KnowledgeGraph kg = load_dataset(cfg);
    const auto target = kg.find_relation(cfg.target_relation);
    if (!target) data_error("population", "unknown target relation '" + cfg.target_relation + "'");
    const Population pop = human_subgraph(kg, *target, {});
    const LabelMap labels = prepare_labels(kg, *target, cfg.k_top_classes, pop);
    auto [train_entities, test_entities] =
        split_population(pop, labels, cfg.test_fraction, Rng::derive_seed(cfg.seed, "split"));

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    std::vector<std::string> written;
    for (const EmbeddingSource& src : cfg.embeddings) {
        const std::string model_name = to_string(src.model);
        EmbeddingSet emb;
        if (src.train) {
            TrainConfig tc = *src.train;
            tc.seed = Rng::derive_seed(cfg.seed, "train:" + model_name);
            emb = train_embeddings(kg, src.model, tc);
        } else {
            emb = reindex_to_graph(load_embeddings(*src.load), kg);
        }
        ClassifierConfig cc = cfg.classifier;
        cc.seed = Rng::derive_seed(cfg.seed, "classifier:" + model_name);
        const Classifier clf = train_classifier(emb, train_entities, labels, cc);
        const PredictionTable table = predict_table(clf, emb, test_entities, labels);

        const std::string clf_path = cfg.out_dir + "/classifier_" + model_name + ".json";
        const std::string csv_path = cfg.out_dir + "/predictions_" + model_name + ".csv";
        save_classifier(clf, labels.classes, clf_path);
        write_prediction_csv(table, kg.entities(), csv_path);
        written.push_back(clf_path);
        written.push_back(csv_path);
    }
    return written;
}

}  // namespace kgbias
