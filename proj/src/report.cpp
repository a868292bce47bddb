#include "emcee/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emcee/cost.hpp"
#include "emcee/errors.hpp"

namespace emcee {

using json = nlohmann::json;

namespace {

std::vector<std::filesystem::path> sorted_children(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> children;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        children.push_back(entry.path());
    }
    std::sort(children.begin(), children.end());
    return children;
}

bool is_fallback(const PredictionRecord& p) {
    for (const auto& flag : p.flags) {
        if (flag == "empty_context_fallback" || flag == "merge_parse_fallback" ||
            flag == "retrieval_miss" || flag == "retrieval_error") {
            return true;
        }
    }
    return false;
}

bool has_judge_stage(const PredictionRecord& p) {
    return std::any_of(p.stages.begin(), p.stages.end(),
                       [](const StageResponse& s) { return s.stage == "judge"; });
}

std::map<std::string, double> per_language_means(
    const std::vector<PredictionRecord>& predictions) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& p : predictions) {
        auto& [sum, n] = acc[p.language];
        sum += p.score.value_or(0.0);
        ++n;
    }
    std::map<std::string, double> means;
    for (const auto& [code, pair] : acc) means[code] = pair.first / pair.second;
    return means;
}

std::vector<ScoredEntry> to_entries(const std::vector<PredictionRecord>& predictions) {
    std::vector<ScoredEntry> entries;
    entries.reserve(predictions.size());
    for (const auto& p : predictions) {
        entries.push_back(
            {p.language, p.score.value_or(0.0), !p.parsed.ok(), is_fallback(p)});
    }
    return entries;
}

std::string cell(const std::optional<double>& value, int decimals) {
    return value.has_value() ? format_fixed(*value, decimals) : "-";
}

// Baseline first, the rest by name.
std::vector<std::string> method_order(
    const std::map<std::string, std::vector<PredictionRecord>>& by_method,
    const std::string& baseline) {
    std::vector<std::string> order;
    if (by_method.count(baseline)) order.push_back(baseline);
    for (const auto& [name, _] : by_method) {
        if (name != baseline) order.push_back(name);
    }
    return order;
}

}  // namespace

PredictionIndex load_predictions(const std::vector<std::filesystem::path>& run_dirs) {
    if (run_dirs.empty()) throw ConfigError("no run directories given");
    PredictionIndex index;
    for (const auto& run_dir : run_dirs) {
        std::filesystem::path root = run_dir / "predictions";
        if (!std::filesystem::is_directory(root)) {
            throw ConfigError("no predictions directory under " + run_dir.string());
        }
        for (const auto& dataset_dir : sorted_children(root)) {
            if (!std::filesystem::is_directory(dataset_dir)) continue;
            std::string dataset = dataset_dir.filename().string();
            for (const auto& file : sorted_children(dataset_dir)) {
                if (file.extension() != ".jsonl") continue;
                std::string method = file.stem().string();
                std::ifstream in(file);
                std::vector<PredictionRecord> predictions;
                std::string line;
                int line_number = 0;
                while (std::getline(in, line)) {
                    ++line_number;
                    if (line.empty()) continue;
                    try {
                        predictions.push_back(prediction_from_json(line));
                    } catch (const DataError& e) {
                        throw DataError(file.string() + ": " + e.what(), line_number);
                    }
                }
                // A later run dir replaces an earlier one for the same cell.
                index[dataset][method] = std::move(predictions);
            }
        }
    }
    return index;
}

ReportOutput build_report(const PredictionIndex& index, const ReportOptions& options,
                          const std::string& model) {
    ReportOutput output;
    std::ostringstream md;
    std::ostringstream csv;
    csv << "dataset,language,method,score_percent,records\n";

    std::map<std::string, std::map<std::string, MetricReport>> reports;  // dataset -> method
    md << "# Evaluation report\n";
    for (const auto& [dataset, by_method] : index) {
        auto baseline_it = by_method.find(options.baseline);
        if (baseline_it == by_method.end()) {
            throw ConfigError("baseline method '" + options.baseline +
                              "' has no predictions for dataset " + dataset);
        }
        ResourceSplit split =
            split_resources(per_language_means(baseline_it->second), options.split);

        md << "\n## " << dataset << "\n\n";
        md << "| method | All | High | Low |\n|---|---|---|---|\n";
        for (const std::string& method : method_order(by_method, options.baseline)) {
            const std::vector<PredictionRecord>& predictions = by_method.at(method);
            MetricReport report = aggregate(method, dataset, to_entries(predictions), split);
            md << "| " << method << " | " << format_fixed(report.all, 1) << " | "
               << cell(report.high, 1) << " | " << cell(report.low, 1) << " |\n";
            for (const auto& [language, score] : report.per_language) {
                csv << dataset << ',' << language << ',' << method << ','
                    << format_fixed(score.score, 2) << ',' << score.n << '\n';
            }
            reports[dataset][method] = std::move(report);
        }

        std::vector<std::string> high_codes;
        std::vector<std::string> low_codes;
        for (const auto& [code, cls] : split.assignment) {
            (cls == ResourceClass::high ? high_codes : low_codes).push_back(code);
        }
        md << "\nSplit (" << to_string(split.strategy) << ", from " << options.baseline
           << "): high =";
        for (const auto& c : high_codes) md << ' ' << c;
        md << "; low =";
        for (const auto& c : low_codes) md << ' ' << c;
        md << "\n";
    }

    std::set<std::string> non_baseline;
    for (const auto& [dataset, by_method] : reports) {
        for (const auto& [method, _] : by_method) {
            if (method != options.baseline) non_baseline.insert(method);
        }
    }
    if (!non_baseline.empty()) {
        md << "\n## Relative improvement vs " << options.baseline << " (%)\n\n";
        md << "| method | dataset | All | High | Low |\n|---|---|---|---|---|\n";
        for (const std::string& method : non_baseline) {
            std::vector<Improvement> per_dataset;
            for (const auto& [dataset, by_method] : reports) {
                auto method_it = by_method.find(method);
                auto baseline_it = by_method.find(options.baseline);
                if (method_it == by_method.end() || baseline_it == by_method.end()) continue;
                Improvement imp =
                    relative_improvement(method_it->second, baseline_it->second);
                md << "| " << method << " | " << dataset << " | " << cell(imp.all, 1) << " | "
                   << cell(imp.high, 1) << " | " << cell(imp.low, 1) << " |\n";
                per_dataset.push_back(imp);
            }
            Improvement mean = mean_improvement(per_dataset);
            md << "| " << method << " | mean | " << cell(mean.all, 1) << " | "
               << cell(mean.high, 1) << " | " << cell(mean.low, 1) << " |\n";
        }
    }

    md << "\n## Diagnostics\n\n";
    md << "| dataset | method | parse_failures | fallbacks | independent_conclusions |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& [dataset, by_method] : index) {
        for (const std::string& method : method_order(by_method, options.baseline)) {
            const MetricReport& report = reports.at(dataset).at(method);
            int independent = 0;
            for (const auto& p : by_method.at(method)) {
                if (has_judge_stage(p) && p.chosen_index == -1) ++independent;
            }
            md << "| " << dataset << " | " << method << " | " << report.parse_failures
               << " | " << report.fallbacks << " | " << independent << " |\n";
        }
    }

    std::vector<PredictionRecord> all_predictions;
    for (const auto& [_, by_method] : index) {
        for (const auto& [__, predictions] : by_method) {
            all_predictions.insert(all_predictions.end(), predictions.begin(),
                                   predictions.end());
        }
    }
    std::map<std::string, UsageTotals> usage = usage_summary(all_predictions);
    std::optional<PricingTable> pricing;
    if (!options.pricing_path.empty()) pricing = PricingTable::load(options.pricing_path);

    md << "\n## Cost\n\n";
    std::string currency = pricing ? pricing->currency : "USD";
    md << "| method | input tokens | output tokens | calls | cost (" << currency << ") |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& [method, totals] : usage) {
        std::string cost = "-";
        if (pricing) {
            std::optional<double> amount =
                price_run(totals, *pricing, model, &output.warnings);
            if (amount) cost = format_fixed(*amount, 3);
        }
        md << "| " << method << " | " << totals.input_tokens << " | " << totals.output_tokens
           << " | " << totals.call_count << " | " << cost << " |\n";
    }

    md << "\n### Per-stage tokens\n\n";
    md << "| method | stage | input | output |\n|---|---|---|---|\n";
    for (const auto& [method, totals] : usage) {
        for (const auto& [stage, stage_usage] : totals.per_stage) {
            md << "| " << method << " | " << stage << " | " << stage_usage.prompt_tokens
               << " | " << stage_usage.completion_tokens << " |\n";
        }
    }

    if (!output.warnings.empty()) {
        md << "\n## Warnings\n\n";
        for (const auto& w : output.warnings) md << "- " << w << "\n";
    }

    output.markdown = md.str();
    output.csv = csv.str();
    return output;
}

std::vector<std::filesystem::path> emit_report(const ReportOptions& options) {
    PredictionIndex index = load_predictions(options.run_dirs);

    std::string model = "unknown";
    for (const auto& run_dir : options.run_dirs) {
        std::ifstream in(run_dir / "manifest.json");
        if (!in) continue;
        try {
            json doc = json::parse(in);
            if (doc.contains("backend") && doc["backend"].contains("model")) {
                model = doc["backend"]["model"].get<std::string>();
                break;
            }
        } catch (const json::exception&) {
            continue;
        }
    }

    ReportOutput output = build_report(index, options, model);

    std::filesystem::path out_dir =
        options.out_dir.empty() ? options.run_dirs.front() : options.out_dir;
    std::filesystem::create_directories(out_dir);

    std::vector<std::filesystem::path> written;
    if (options.formats.count("markdown")) {
        std::filesystem::path path = out_dir / "report.md";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << output.markdown;
        written.push_back(path);
    }
    if (options.formats.count("csv")) {
        std::filesystem::path path = out_dir / "report.csv";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << output.csv;
        written.push_back(path);
    }
    return written;
}

}  // namespace emcee
