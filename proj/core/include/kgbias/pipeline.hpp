#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgbias/classifier.hpp"
#include "kgbias/embedding.hpp"
#include "kgbias/kg.hpp"
#include "kgbias/metrics.hpp"
#include "kgbias/report_io.hpp"
#include "kgbias/synth.hpp"

namespace kgbias {

// One embedding column of the audit: either train on the dataset or load a
// pre-trained set from <load>.json/<load>.tsv.
struct EmbeddingSource {
    ScoreModel model = ScoreModel::TransE;
    std::optional<TrainConfig> train;
    std::optional<std::string> load;
};

struct RunConfig {
    std::vector<std::string> dataset_paths;     // triple files, unioned
    std::string target_relation;
    std::vector<std::string> candidate_sensitive;  // empty => auto discovery
    bool auto_candidates = false;
    double auto_min_fraction = 0.02;            // auto mode: min population share
    int k_top_classes = 5;
    int min_tail_count = 10;
    double test_fraction = 0.2;
    std::vector<Measure> measures = {Measure::DPD, Measure::PPD, Measure::TLB};
    std::vector<EmbeddingSource> embeddings;
    ClassifierConfig classifier;
    double tlb_alpha = 0.1;
    std::size_t tlb_head_cap = 2000;
    std::string out_dir = "out";
    std::vector<ReportFormat> formats = {ReportFormat::Json, ReportFormat::Csv,
                                         ReportFormat::Markdown};
    int top_n = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

RunConfig default_run_config();
RunConfig run_config_from_json(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);  // used by `defaults`

struct PipelineResult {
    BiasReport report;
    std::vector<std::string> written_files;
};

// The end-to-end audit: parse -> population -> labels -> split -> embeddings
// (train or load) -> classifier (only when DPD/PPD requested) -> audit ->
// emit. All randomness derives from cfg.seed.
PipelineResult run(const RunConfig& cfg);

// In-memory variant over an already built graph; exposed for tests and the
// synth-based flows. Embeddings trained in-process are also saved under
// out_dir when save_artifacts is set.
PipelineResult run_on_graph(const RunConfig& cfg, const KnowledgeGraph& kg,
                            const std::vector<std::pair<std::string, EmbeddingSet>>& pretrained,
                            bool save_artifacts);

// Stage helper used by the train-embeddings subcommand: trains (or refuses to
// load) the configured sources and writes <out_dir>/emb_<MODEL> files.
std::vector<std::string> train_embeddings_stage(const RunConfig& cfg);

// Stage helper used by the train-classifier subcommand; writes
// <out_dir>/classifier.json and the prediction CSV, returns their paths.
std::vector<std::string> train_classifier_stage(const RunConfig& cfg);

// ISO-8601 UTC timestamp for provenance.
std::string current_timestamp();

}  // namespace kgbias
