#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "emcee/eval.hpp"
#include "emcee/pipelines.hpp"

namespace emcee {

struct ReportOptions {
    std::vector<std::filesystem::path> run_dirs;
    std::string baseline = "native_basic";  // also defines the resource split
    std::set<std::string> formats{"markdown", "csv"};
    SplitStrategy split = SplitStrategy::threshold_mean;
    std::filesystem::path pricing_path;  // empty: cost table shows tokens only
    std::filesystem::path out_dir;       // empty: first run dir
};

// dataset -> method -> predictions, merged across run dirs.
using PredictionIndex =
    std::map<std::string, std::map<std::string, std::vector<PredictionRecord>>>;

PredictionIndex load_predictions(const std::vector<std::filesystem::path>& run_dirs);

struct ReportOutput {
    std::string markdown;
    std::string csv;
    std::vector<std::string> warnings;
};

// Scores every dataset against the baseline-derived split and renders the
// accuracy, improvement, diagnostic, and cost sections. Throws ConfigError
// when the baseline method is absent from a dataset.
ReportOutput build_report(const PredictionIndex& index, const ReportOptions& options,
                          const std::string& model);

// build_report plus file emission into the output dir; returns written paths.
std::vector<std::filesystem::path> emit_report(const ReportOptions& options);

}  // namespace emcee
