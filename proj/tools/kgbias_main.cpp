// kgbias: audit knowledge-graph embeddings for social bias.
//
// Pipeline stages are exposed as subcommands so expensive steps (embedding
// training) can be cached to disk and reused:
//   kgbias defaults                          print a full default config
//   kgbias synth --config synth.json ...     generate a planted-bias dataset
//   kgbias train-embeddings --config c.json  train + save embedding files
//   kgbias train-classifier --config c.json  train + save the classifier
//   kgbias audit --config c.json             full run: triples -> bias report
//   kgbias report --in report.json ...       re-emit formats from a report

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kgbias/error.hpp"
#include "kgbias/pipeline.hpp"

namespace {

using namespace kgbias;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::vector<std::string> formats;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration")
        ->required(config_required);
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
    cmd->add_option("--format", opts.formats, "report format: csv|json|md (repeatable)");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = load_run_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    if (!opts.formats.empty()) {
        cfg.formats.clear();
        for (const std::string& f : opts.formats)
            cfg.formats.push_back(report_format_from_string(f));
    }
    return cfg;
}

SynthConfig synth_config_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) usage_error("config", "cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        usage_error("config", std::string("malformed synth config: ") + e.what());
    }
    SynthConfig cfg;
    cfg.n_entities = j.value("n_entities", cfg.n_entities);
    cfg.sensitive_relation = j.value("sensitive_relation", cfg.sensitive_relation);
    cfg.target_relation = j.value("target_relation", cfg.target_relation);
    cfg.sensitive_tails = j.value("sensitive_tails", cfg.sensitive_tails);
    cfg.sensitive_marginals = j.value("sensitive_marginals", cfg.sensitive_marginals);
    cfg.target_tails = j.value("target_tails", cfg.target_tails);
    cfg.rho = j.value("rho", cfg.rho);
    const auto mode = j.value("embedding_mode", std::string("GROUP_SEPARATED"));
    if (mode == "GROUP_SEPARATED")
        cfg.embedding_mode = SynthEmbeddingMode::GroupSeparated;
    else if (mode == "RANDOM")
        cfg.embedding_mode = SynthEmbeddingMode::Random;
    else
        usage_error("config", "unknown embedding_mode '" + mode + "'");
    cfg.dim = j.value("dim", cfg.dim);
    if (!j.contains("seed")) usage_error("config", "seed is required");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

int run_synth(const std::string& config_path, const std::string& out_dir) {
    const SynthConfig cfg = synth_config_from_json(config_path);
    auto [kg, emb] = generate(cfg);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) data_error("synth", "cannot create " + out_dir + ": " + ec.message());
    write_triples(kg, out_dir + "/triples.tsv");
    std::cout << "wrote " << out_dir << "/triples.tsv (" << kg.triples().size() << " triples, "
              << kg.entity_count() << " entities)\n";
    if (emb) {
        save_embeddings(*emb, out_dir + "/emb_synth");
        std::cout << "wrote " << out_dir << "/emb_synth.{json,tsv}\n";
    }
    std::cout << "analytic DPD of the Bayes classifier: " << analytic_dpd(cfg) << "\n";
    return 0;
}

int run_report(const std::string& in_path, const std::string& out_dir,
               const std::vector<std::string>& formats, int top_n) {
    std::ifstream in(in_path);
    if (!in) data_error("report", "cannot open " + in_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const BiasReport report = report_from_json(buf.str());
    std::vector<ReportFormat> fmt;
    for (const std::string& f : formats) fmt.push_back(report_format_from_string(f));
    if (fmt.empty()) fmt = {ReportFormat::Markdown};
    for (const std::string& path : emit_report(report, fmt, out_dir, top_n))
        std::cout << "wrote " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bias auditing for knowledge-graph embeddings"};
    app.require_subcommand(1);

    CommonOpts audit_opts, train_emb_opts, train_clf_opts;
    std::string synth_config, synth_out = "out";
    std::string report_in, report_out = "out";
    std::vector<std::string> report_formats;
    int report_top_n = 5;

    CLI::App* cmd_defaults =
        app.add_subcommand("defaults", "print the default run configuration as JSON");
    CLI::App* cmd_audit =
        app.add_subcommand("audit", "run the full pipeline and emit the bias report");
    add_common(cmd_audit, audit_opts);
    CLI::App* cmd_train_emb =
        app.add_subcommand("train-embeddings", "train and save the configured embeddings");
    add_common(cmd_train_emb, train_emb_opts);
    CLI::App* cmd_train_clf = app.add_subcommand(
        "train-classifier", "train and save the target-relation classifier + predictions");
    add_common(cmd_train_clf, train_clf_opts);

    CLI::App* cmd_synth =
        app.add_subcommand("synth", "generate a synthetic planted-bias dataset");
    cmd_synth->add_option("--config", synth_config, "JSON synth configuration")->required();
    cmd_synth->add_option("--out", synth_out, "output directory");

    CLI::App* cmd_report = app.add_subcommand("report", "re-emit formats from a saved report");
    cmd_report->add_option("--in", report_in, "report.json produced by audit")->required();
    cmd_report->add_option("--out", report_out, "output directory");
    cmd_report->add_option("--format", report_formats, "csv|json|md (repeatable)");
    cmd_report->add_option("--top-n", report_top_n, "rows per disaggregated table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors -> 1
    }

    try {
        if (cmd_defaults->parsed()) {
            std::cout << run_config_to_json(default_run_config()) << "\n";
            return 0;
        }
        if (cmd_audit->parsed()) {
            const RunConfig cfg = resolve_config(audit_opts);
            const PipelineResult result = run(cfg);
            for (const std::string& path : result.written_files)
                std::cout << "wrote " << path << "\n";
            return 0;
        }
        if (cmd_train_emb->parsed()) {
            for (const std::string& path : train_embeddings_stage(resolve_config(train_emb_opts)))
                std::cout << "wrote " << path << "\n";
            return 0;
        }
        if (cmd_train_clf->parsed()) {
            for (const std::string& path : train_classifier_stage(resolve_config(train_clf_opts)))
                std::cout << "wrote " << path << "\n";
            return 0;
        }
        if (cmd_synth->parsed()) return run_synth(synth_config, synth_out);
        if (cmd_report->parsed())
            return run_report(report_in, report_out, report_formats, report_top_n);
    } catch (const Error& e) {
        std::cerr << "error " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Usage: return 1;
            case ErrorKind::Data: return 2;
            case ErrorKind::Internal: return 3;
        }
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
