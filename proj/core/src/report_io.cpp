#include "kgbias/report_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kgbias/error.hpp"

namespace kgbias {

using ordered_json = nlohmann::ordered_json;

ReportFormat report_format_from_string(const std::string& tag) {
    if (tag == "json") return ReportFormat::Json;
    if (tag == "csv") return ReportFormat::Csv;
    if (tag == "md" || tag == "markdown") return ReportFormat::Markdown;
    usage_error("report", "unknown format '" + tag + "' (expected csv, json or md)");
}

std::string to_string(ReportFormat f) {
    switch (f) {
        case ReportFormat::Json: return "json";
        case ReportFormat::Csv: return "csv";
        case ReportFormat::Markdown: return "md";
    }
    internal_error("report", "invalid format enum");
}

namespace {

std::string status_string(ScoreStatus s) {
    switch (s) {
        case ScoreStatus::Ok: return "ok";
        case ScoreStatus::Undefined: return "undefined";
        case ScoreStatus::Skipped: return "skipped";
    }
    internal_error("report", "invalid status enum");
}

ScoreStatus status_from_string(const std::string& s) {
    if (s == "ok") return ScoreStatus::Ok;
    if (s == "undefined") return ScoreStatus::Undefined;
    if (s == "skipped") return ScoreStatus::Skipped;
    data_error("report", "invalid status '" + s + "'");
}

ordered_json provenance_to_json(const ProvenanceInfo& p) {
    return ordered_json{{"seed", p.seed},
                        {"test_fraction", p.test_fraction},
                        {"k_top_classes", p.k_top_classes},
                        {"min_tail_count", p.min_tail_count},
                        {"tlb", ordered_json{{"alpha", p.tlb_alpha},
                                             {"head_cap", p.tlb_head_cap},
                                             {"aggregation", p.tlb_aggregation},
                                             {"gradient", p.tlb_gradient}}},
                        {"ranking", p.ranking},
                        {"grouping_scope", p.grouping_scope},
                        {"prediction_scope", p.prediction_scope},
                        {"classifier", p.classifier},
                        {"classifier_note", p.classifier_note},
                        {"population_size", p.population_size},
                        {"train_size", p.train_size},
                        {"test_size", p.test_size},
                        {"dataset_paths", p.dataset_paths},
                        {"notes", p.notes},
                        {"timestamp", p.timestamp}};
}

ProvenanceInfo provenance_from_json(const nlohmann::json& j) {
    ProvenanceInfo p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.test_fraction = j.at("test_fraction").get<double>();
    p.k_top_classes = j.at("k_top_classes").get<int>();
    p.min_tail_count = j.at("min_tail_count").get<int>();
    p.tlb_alpha = j.at("tlb").at("alpha").get<double>();
    p.tlb_head_cap = j.at("tlb").at("head_cap").get<std::size_t>();
    p.tlb_aggregation = j.at("tlb").at("aggregation").get<std::string>();
    p.tlb_gradient = j.at("tlb").at("gradient").get<std::string>();
    p.ranking = j.at("ranking").get<std::string>();
    p.grouping_scope = j.at("grouping_scope").get<std::string>();
    p.prediction_scope = j.at("prediction_scope").get<std::string>();
    p.classifier = j.at("classifier").get<std::string>();
    p.classifier_note = j.at("classifier_note").get<std::string>();
    p.population_size = j.at("population_size").get<std::size_t>();
    p.train_size = j.at("train_size").get<std::size_t>();
    p.test_size = j.at("test_size").get<std::size_t>();
    p.dataset_paths = j.at("dataset_paths").get<std::vector<std::string>>();
    p.notes = j.at("notes").get<std::vector<std::string>>();
    p.timestamp = j.at("timestamp").get<std::string>();
    return p;
}

ordered_json binary_score_to_json(const BiasReport& r,
                                  const std::pair<std::string, BinaryBiasScore>& tagged) {
    const auto& [model, s] = tagged;
    ordered_json labels = ordered_json::array();
    for (const LabelCounts& lc : s.per_label) {
        labels.push_back(ordered_json{{"label", r.class_names[static_cast<std::size_t>(lc.label)]},
                                      {"num_in", lc.num_in},
                                      {"den_in", lc.den_in},
                                      {"num_out", lc.num_out},
                                      {"den_out", lc.den_out},
                                      {"value", lc.value},
                                      {"empty_support", lc.empty_support}});
    }
    return ordered_json{{"model", model},
                        {"relation", r.relation_names[s.relation]},
                        {"tail", r.entity_names[s.tail]},
                        {"in_group_size", s.in_group_size},
                        {"out_group_size", s.out_group_size},
                        {"undefined", s.undefined},
                        {"note", s.note},
                        {"total", s.total},
                        {"per_label", labels}};
}

ordered_json tl_table_to_json(const BiasReport& r, const std::pair<std::string, TLTable>& tagged) {
    const auto& [model, t] = tagged;
    ordered_json rows = ordered_json::array();
    for (const auto& [tail, mean_tl] : t.rows)
        rows.push_back(ordered_json{{"target_tail", r.entity_names[tail]}, {"mean_tl", mean_tl}});
    return ordered_json{{"model", model},
                        {"relation", r.relation_names[t.relation]},
                        {"direction_tail", r.entity_names[t.direction_tail]},
                        {"alpha", t.alpha},
                        {"head_sample_size", t.head_sample_size},
                        {"rows", rows}};
}

}  // namespace

std::string report_to_json(const BiasReport& report) {
    ordered_json j;
    j["provenance"] = provenance_to_json(report.provenance);
    j["models"] = report.models;
    ordered_json measures = ordered_json::array();
    for (const Measure m : report.measures) measures.push_back(to_string(m));
    j["measures"] = measures;
    j["relations"] = report.relations;

    ordered_json aggregated = ordered_json::array();
    for (const AggregateScore& a : report.aggregated) {
        ordered_json row{{"relation", a.relation},
                         {"measure", to_string(a.measure)},
                         {"model", a.model},
                         {"status", status_string(a.status)},
                         {"note", a.note}};
        if (a.status == ScoreStatus::Ok) row["value"] = a.value;
        aggregated.push_back(std::move(row));
    }
    j["aggregated"] = std::move(aggregated);

    ordered_json skipped = ordered_json::object();
    for (const auto& [rel, reason] : report.skipped) skipped[rel] = reason;
    j["skipped"] = std::move(skipped);

    ordered_json dpd = ordered_json::array();
    for (const auto& tagged : report.dpd_details) dpd.push_back(binary_score_to_json(report, tagged));
    j["dpd_details"] = std::move(dpd);
    ordered_json ppd = ordered_json::array();
    for (const auto& tagged : report.ppd_details) ppd.push_back(binary_score_to_json(report, tagged));
    j["ppd_details"] = std::move(ppd);
    ordered_json tl = ordered_json::array();
    for (const auto& tagged : report.tl_tables) tl.push_back(tl_table_to_json(report, tagged));
    j["tl_tables"] = std::move(tl);

    return j.dump(2);
}

namespace {

// Reports loaded from JSON carry labels, not graph ids; rebuild small local
// vocabularies so the in-memory structs keep working.
template <typename T>
std::uint32_t intern(std::vector<std::string>& vocab, std::map<std::string, T>& index,
                     const std::string& label) {
    auto it = index.find(label);
    if (it != index.end()) return it->second;
    const auto id = static_cast<T>(vocab.size());
    vocab.push_back(label);
    index.emplace(label, id);
    return id;
}

}  // namespace

BiasReport report_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        data_error("report", std::string("malformed report JSON: ") + e.what());
    }
    try {
        BiasReport r;
        r.provenance = provenance_from_json(j.at("provenance"));
        r.models = j.at("models").get<std::vector<std::string>>();
        for (const auto& m : j.at("measures"))
            r.measures.push_back(measure_from_string(m.get<std::string>()));
        r.relations = j.at("relations").get<std::vector<std::string>>();
        for (const auto& row : j.at("aggregated")) {
            AggregateScore a;
            a.relation = row.at("relation").get<std::string>();
            a.measure = measure_from_string(row.at("measure").get<std::string>());
            a.model = row.at("model").get<std::string>();
            a.status = status_from_string(row.at("status").get<std::string>());
            a.note = row.at("note").get<std::string>();
            if (a.status == ScoreStatus::Ok) a.value = row.at("value").get<double>();
            r.aggregated.push_back(std::move(a));
        }
        for (const auto& [rel, reason] : j.at("skipped").items())
            r.skipped[rel] = reason.get<std::string>();

        std::map<std::string, EntityId> entity_index;
        std::map<std::string, RelationId> relation_index;
        std::map<std::string, int> class_index;
        auto class_id = [&](const std::string& label) {
            auto it = class_index.find(label);
            if (it != class_index.end()) return it->second;
            const int id = static_cast<int>(r.class_names.size());
            r.class_names.push_back(label);
            class_index.emplace(label, id);
            return id;
        };
        auto parse_binary = [&](const nlohmann::json& row) {
            BinaryBiasScore s;
            s.relation = intern(r.relation_names, relation_index, row.at("relation"));
            s.tail = intern(r.entity_names, entity_index, row.at("tail"));
            s.in_group_size = row.at("in_group_size").get<long long>();
            s.out_group_size = row.at("out_group_size").get<long long>();
            s.undefined = row.at("undefined").get<bool>();
            s.note = row.at("note").get<std::string>();
            s.total = row.at("total").get<double>();
            for (const auto& lj : row.at("per_label")) {
                LabelCounts lc;
                lc.label = class_id(lj.at("label").get<std::string>());
                lc.num_in = lj.at("num_in").get<long long>();
                lc.den_in = lj.at("den_in").get<long long>();
                lc.num_out = lj.at("num_out").get<long long>();
                lc.den_out = lj.at("den_out").get<long long>();
                lc.value = lj.at("value").get<double>();
                lc.empty_support = lj.at("empty_support").get<bool>();
                s.per_label.push_back(lc);
            }
            return s;
        };
        for (const auto& row : j.at("dpd_details"))
            r.dpd_details.emplace_back(row.at("model").get<std::string>(), parse_binary(row));
        for (const auto& row : j.at("ppd_details"))
            r.ppd_details.emplace_back(row.at("model").get<std::string>(), parse_binary(row));
        for (const auto& row : j.at("tl_tables")) {
            TLTable t;
            t.relation = intern(r.relation_names, relation_index, row.at("relation"));
            t.direction_tail = intern(r.entity_names, entity_index, row.at("direction_tail"));
            t.alpha = row.at("alpha").get<double>();
            t.head_sample_size = row.at("head_sample_size").get<std::size_t>();
            for (const auto& tr : row.at("rows"))
                t.rows.emplace_back(intern(r.entity_names, entity_index, tr.at("target_tail")),
                                    tr.at("mean_tl").get<double>());
            r.tl_tables.emplace_back(row.at("model").get<std::string>(), std::move(t));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        data_error("report", std::string("report JSON missing fields: ") + e.what());
    }
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

std::string format_score(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

const AggregateScore* find_score(const BiasReport& r, const std::string& relation, Measure m,
                                 const std::string& model) {
    for (const AggregateScore& a : r.aggregated)
        if (a.relation == relation && a.measure == m && a.model == model) return &a;
    return nullptr;
}

std::string cell_text(const AggregateScore* a) {
    if (a == nullptr) return "";
    switch (a->status) {
        case ScoreStatus::Ok: return format_score(a->value);
        case ScoreStatus::Undefined: return "undefined";
        case ScoreStatus::Skipped: return "skipped";
    }
    return "";
}

// relations ordered descending by the first requested measure of the first
// model; non-numeric cells sink to the bottom, ties break by name
std::vector<std::string> sorted_relations(const BiasReport& r) {
    std::vector<std::string> rels = r.relations;
    if (r.measures.empty() || r.models.empty()) return rels;
    const Measure first = r.measures.front();
    const std::string& model = r.models.front();
    std::stable_sort(rels.begin(), rels.end(), [&](const std::string& a, const std::string& b) {
        const AggregateScore* sa = find_score(r, a, first, model);
        const AggregateScore* sb = find_score(r, b, first, model);
        const bool oka = sa != nullptr && sa->status == ScoreStatus::Ok;
        const bool okb = sb != nullptr && sb->status == ScoreStatus::Ok;
        if (oka != okb) return oka;
        if (oka && okb && sa->value != sb->value) return sa->value > sb->value;
        return a < b;
    });
    return rels;
}

}  // namespace

std::string report_to_csv(const BiasReport& report) {
    std::ostringstream out;
    const bool multi_model = report.models.size() > 1;
    out << "relation";
    for (const Measure m : report.measures)
        for (const std::string& model : report.models)
            out << ',' << to_string(m) << (multi_model ? ":" + model : "");
    out << '\n';
    for (const std::string& rel : sorted_relations(report)) {
        out << csv_field(rel);
        for (const Measure m : report.measures)
            for (const std::string& model : report.models)
                out << ',' << cell_text(find_score(report, rel, m, model));
        out << '\n';
    }
    return out.str();
}

namespace {

void markdown_aggregated(std::ostringstream& out, const BiasReport& r) {
    out << "## Aggregated bias scores\n\n";
    if (r.relations.empty()) {
        out << "_No relation survived filtering; see the notes section._\n\n";
        return;
    }
    out << "| relation |";
    for (const Measure m : r.measures)
        for (const std::string& model : r.models) out << ' ' << to_string(m) << ':' << model << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < r.measures.size() * r.models.size(); ++i) out << "---|";
    out << '\n';
    for (const std::string& rel : sorted_relations(r)) {
        out << "| " << rel << " |";
        for (const Measure m : r.measures)
            for (const std::string& model : r.models) {
                const std::string cell = cell_text(find_score(r, rel, m, model));
                out << ' ' << (cell.empty() ? "-" : cell) << " |";
            }
        out << '\n';
    }
    out << '\n';
}

void markdown_per_measure(std::ostringstream& out, const BiasReport& r) {
    if (r.models.size() < 2 || r.relations.empty()) return;
    for (const Measure m : r.measures) {
        out << "## " << to_string(m) << " by embedding model\n\n| relation |";
        for (const std::string& model : r.models) out << ' ' << model << " |";
        out << "\n|---|";
        for (std::size_t i = 0; i < r.models.size(); ++i) out << "---|";
        out << '\n';
        for (const std::string& rel : sorted_relations(r)) {
            out << "| " << rel << " |";
            for (const std::string& model : r.models) {
                const std::string cell = cell_text(find_score(r, rel, m, model));
                out << ' ' << (cell.empty() ? "-" : cell) << " |";
            }
            out << '\n';
        }
        out << '\n';
    }
}

// Table-3 style: for each (model, relation), pair the two largest-sample
// direction tails and list the top-N target tails by mean TL.
void markdown_tl_pairs(std::ostringstream& out, const BiasReport& r, int top_n) {
    if (r.tl_tables.empty()) return;
    out << "## Top-" << top_n << " translational-likelihood shifts\n\n";
    std::map<std::pair<std::string, std::string>, std::vector<const TLTable*>> by_key;
    for (const auto& [model, table] : r.tl_tables)
        by_key[{model, r.relation_names[table.relation]}].push_back(&table);
    for (const auto& [key, tables] : by_key) {
        if (tables.size() < 2) continue;
        const TLTable* left = tables[0];
        const TLTable* right = tables[1];
        out << "### " << key.second << " (" << key.first << "): "
            << r.entity_names[left->direction_tail] << " vs "
            << r.entity_names[right->direction_tail] << "\n\n";
        auto top_rows = [&](const TLTable* t) {
            auto rows = t->rows;
            std::stable_sort(rows.begin(), rows.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            if (static_cast<int>(rows.size()) > top_n) rows.resize(static_cast<std::size_t>(top_n));
            return rows;
        };
        const auto lrows = top_rows(left);
        const auto rrows = top_rows(right);
        out << "| " << r.entity_names[left->direction_tail] << " | TL | "
            << r.entity_names[right->direction_tail] << " | TL |\n|---|---|---|---|\n";
        const std::size_t n = std::max(lrows.size(), rrows.size());
        for (std::size_t i = 0; i < n; ++i) {
            out << "| ";
            if (i < lrows.size())
                out << r.entity_names[lrows[i].first] << " | " << format_score(lrows[i].second);
            else
                out << " | ";
            out << " | ";
            if (i < rrows.size())
                out << r.entity_names[rrows[i].first] << " | " << format_score(rrows[i].second);
            else
                out << " | ";
            out << " |\n";
        }
        out << '\n';
    }
}

}  // namespace

std::string report_to_markdown(const BiasReport& report, int top_n) {
    std::ostringstream out;
    out << "# Bias audit report\n\n";
    markdown_aggregated(out, report);
    markdown_per_measure(out, report);
    markdown_tl_pairs(out, report, top_n);
    if (!report.skipped.empty()) {
        out << "## Skipped relations\n\n";
        for (const auto& [rel, reason] : report.skipped)
            out << "- " << rel << ": " << reason << '\n';
        out << '\n';
    }
    out << "## Provenance\n\n";
    const ProvenanceInfo& p = report.provenance;
    out << "- seed: " << p.seed << '\n';
    out << "- population: " << p.population_size << " (train " << p.train_size << ", test "
        << p.test_size << ")\n";
    out << "- classifier: " << (p.classifier.empty() ? "none" : p.classifier);
    if (!p.classifier_note.empty()) out << " (" << p.classifier_note << ")";
    out << '\n';
    out << "- grouping over " << p.grouping_scope << ", predictions over " << p.prediction_scope
        << ", " << p.ranking << " ranking\n";
    out << "- tlb: alpha " << p.tlb_alpha << ", head cap " << p.tlb_head_cap << ", "
        << p.tlb_aggregation << ", " << p.tlb_gradient << '\n';
    for (const std::string& note : p.notes) out << "- " << note << '\n';
    return out.str();
}

std::vector<std::string> emit_report(const BiasReport& report,
                                     const std::vector<ReportFormat>& formats,
                                     const std::string& out_dir, int top_n) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) data_error("report", "cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<std::string> written;
    for (const ReportFormat f : formats) {
        const std::string path = out_dir + "/report." + to_string(f);
        std::ofstream out(path);
        if (!out) data_error("report", "unwritable output path " + path);
        switch (f) {
            case ReportFormat::Json: out << report_to_json(report); break;
            case ReportFormat::Csv: out << report_to_csv(report); break;
            case ReportFormat::Markdown: out << report_to_markdown(report, top_n); break;
        }
        out << '\n';
        if (!out) data_error("report", "I/O failure writing " + path);
        written.push_back(path);
    }
    return written;
}

void save_classifier(const Classifier& clf, const std::vector<std::string>& class_names,
                     const std::string& path) {
    const ClassifierConfig& cfg = clf.config();
    ordered_json j{{"kind", cfg.kind == ClassifierKind::Logistic ? "LOGISTIC" : "MLP"},
                   {"hidden_sizes", cfg.hidden_sizes},
                   {"epochs", cfg.epochs},
                   {"learning_rate", cfg.learning_rate},
                   {"class_weighting",
                    cfg.class_weighting == ClassWeighting::Balanced ? "BALANCED" : "NONE"},
                   {"seed", cfg.seed},
                   {"layer_sizes", clf.layer_sizes()},
                   {"class_names", class_names},
                   {"weights", clf.weights()},
                   {"biases", clf.biases()}};
    std::ofstream out(path);
    if (!out) data_error("classifier", "cannot write " + path);
    out << j.dump(2) << '\n';
}

Classifier load_classifier(const std::string& path, std::vector<std::string>* class_names) {
    std::ifstream in(path);
    if (!in) data_error("classifier", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        ClassifierConfig cfg;
        cfg.kind = j.at("kind").get<std::string>() == "MLP" ? ClassifierKind::Mlp
                                                            : ClassifierKind::Logistic;
        cfg.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
        cfg.epochs = j.at("epochs").get<int>();
        cfg.learning_rate = j.at("learning_rate").get<double>();
        cfg.class_weighting = j.at("class_weighting").get<std::string>() == "BALANCED"
                                  ? ClassWeighting::Balanced
                                  : ClassWeighting::None;
        cfg.seed = j.at("seed").get<std::uint64_t>();
        if (class_names != nullptr)
            *class_names = j.at("class_names").get<std::vector<std::string>>();
        return classifier_from_parts(std::move(cfg), j.at("layer_sizes").get<std::vector<int>>(),
                                     j.at("weights").get<std::vector<std::vector<double>>>(),
                                     j.at("biases").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        data_error("classifier", "malformed classifier file " + path + ": " + e.what());
    }
}

}  // namespace kgbias
