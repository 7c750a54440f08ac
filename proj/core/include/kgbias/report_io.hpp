#pragma once

#include <string>
#include <vector>

#include "kgbias/classifier.hpp"
#include "kgbias/metrics.hpp"

namespace kgbias {

enum class ReportFormat { Json, Csv, Markdown };

ReportFormat report_format_from_string(const std::string& tag);
std::string to_string(ReportFormat f);

// Full machine-readable report, provenance included.
std::string report_to_json(const BiasReport& report);
BiasReport report_from_json(const std::string& json_text);

// relation x measure matrix; with several models the score columns become
// "MEASURE:MODEL". Skipped/undefined cells carry markers instead of numbers.
std::string report_to_csv(const BiasReport& report);

// Aggregated table (sorted descending by the first requested measure),
// per-measure model breakdowns, and top-N translational tables per direction
// pair.
std::string report_to_markdown(const BiasReport& report, int top_n = 5);

// Writes report.<ext> per requested format into out_dir; returns the paths.
std::vector<std::string> emit_report(const BiasReport& report,
                                     const std::vector<ReportFormat>& formats,
                                     const std::string& out_dir, int top_n = 5);

// Classifier cache files used by the CLI.
void save_classifier(const Classifier& clf, const std::vector<std::string>& class_names,
                     const std::string& path);
Classifier load_classifier(const std::string& path, std::vector<std::string>* class_names);

}  // namespace kgbias
