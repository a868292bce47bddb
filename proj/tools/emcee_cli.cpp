#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emcee/backend.hpp"
#include "emcee/errors.hpp"
#include "emcee/report.hpp"
#include "emcee/runner.hpp"

namespace {

struct RunArgs {
    std::string config_path;
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    std::string backend;
    std::string out_dir;
    int workers = 0;
};

struct ReportArgs {
    std::vector<std::string> run_dirs;
    std::string baseline = "native_basic";
    std::string emit = "markdown,csv";
    std::string split;
    std::string pricing;
    std::string out_dir;
};

template <typename T>
std::vector<T> filter_by_name(const std::vector<T>& items,
                              const std::vector<std::string>& wanted,
                              const std::string& what) {
    if (wanted.empty()) return items;
    std::vector<T> kept;
    for (const std::string& name : wanted) {
        bool found = false;
        for (const T& item : items) {
            if (item.name == name) {
                kept.push_back(item);
                found = true;
                break;
            }
        }
        if (!found) {
            throw emcee::ConfigError(what + " '" + name + "' is not in the config");
        }
    }
    return kept;
}

int cmd_run(const RunArgs& args) {
    emcee::RunConfig config = emcee::RunConfig::load(args.config_path);
    config.methods = filter_by_name(config.methods, args.methods, "method");
    config.datasets = filter_by_name(config.datasets, args.datasets, "dataset");
    if (!args.backend.empty()) config.backend.kind = args.backend;
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.workers > 0) config.workers = args.workers;

    emcee::RunSummary summary = emcee::execute_run(config);
    std::printf("wrote %d predictions under %s (%zu failures)\n", summary.predictions,
                config.out_dir.string().c_str(), summary.failures.size());
    std::printf("backend: %lld calls, %lld cache hits, %lld retries\n",
                static_cast<long long>(summary.backend_stats.transport_calls),
                static_cast<long long>(summary.backend_stats.cache_hits),
                static_cast<long long>(summary.backend_stats.retries));
    for (const auto& failure : summary.failures) {
        std::fprintf(stderr, "failed %s/%s record %s: %s\n", failure.dataset.c_str(),
                     failure.method.c_str(), failure.id.c_str(), failure.message.c_str());
    }
    return summary.exit_code;
}

int cmd_report(const ReportArgs& args) {
    emcee::ReportOptions options;
    for (const std::string& dir : args.run_dirs) options.run_dirs.emplace_back(dir);
    options.baseline = args.baseline;
    if (!args.pricing.empty()) options.pricing_path = args.pricing;
    if (!args.out_dir.empty()) options.out_dir = args.out_dir;

    options.formats.clear();
    std::string token;
    for (char c : args.emit + ",") {
        if (c == ',') {
            if (!token.empty()) {
                if (token != "markdown" && token != "csv") {
                    throw emcee::ConfigError("unknown report format '" + token + "'");
                }
                options.formats.insert(token);
                token.clear();
            }
        } else {
            token.push_back(c);
        }
    }
    if (options.formats.empty()) {
        throw emcee::ConfigError("no report formats requested");
    }

    if (!args.split.empty()) {
        options.split = emcee::parse_split_strategy(args.split);
    }

    std::vector<std::filesystem::path> written = emcee::emit_report(options);
    for (const auto& path : written) std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int cmd_cache_stats(const std::string& dir) {
    emcee::ResponseCache::Stats stats = emcee::ResponseCache::stats(dir);
    std::printf("%llu entries, %llu bytes\n", static_cast<unsigned long long>(stats.entries),
                static_cast<unsigned long long>(stats.bytes));
    return 0;
}

int cmd_cache_clear(const std::string& dir) {
    uint64_t removed = emcee::ResponseCache::clear(dir);
    std::printf("removed %llu entries\n", static_cast<unsigned long long>(removed));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multilingual prompting evaluation harness"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "execute a configured evaluation run");
    run->add_option("--config", run_args.config_path, "run config JSON")->required();
    run->add_option("--method", run_args.methods, "restrict to these method names");
    run->add_option("--dataset", run_args.datasets, "restrict to these dataset names");
    run->add_option("--backend", run_args.backend, "override the backend kind")
        ->check(CLI::IsMember({"mock", "http"}));
    run->add_option("--out", run_args.out_dir, "override the output directory");
    run->add_option("--workers", run_args.workers, "override the worker bound")
        ->check(CLI::PositiveNumber);

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "aggregate predictions into reports");
    report->add_option("--runs", report_args.run_dirs, "run directories")
        ->required()
        ->delimiter(',');
    report->add_option("--baseline", report_args.baseline,
                       "baseline method for splits and improvements");
    report->add_option("--emit", report_args.emit, "formats: markdown,csv");
    report->add_option("--split", report_args.split,
                       "threshold_mean or median_split (default threshold_mean)");
    report->add_option("--pricing", report_args.pricing, "pricing table JSON");
    report->add_option("--out", report_args.out_dir, "report output directory");

    CLI::App* cache = app.add_subcommand("cache", "inspect or clear the response cache");
    cache->require_subcommand(1);
    std::string stats_dir;
    std::string clear_dir;
    CLI::App* stats = cache->add_subcommand("stats", "print entry count and size");
    stats->add_option("--dir", stats_dir, "cache directory")->required();
    CLI::App* clear = cache->add_subcommand("clear", "remove all cached responses");
    clear->add_option("--dir", clear_dir, "cache directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (report->parsed()) return cmd_report(report_args);
        if (stats->parsed()) return cmd_cache_stats(stats_dir);
        if (clear->parsed()) return cmd_cache_clear(clear_dir);
    } catch (const emcee::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const emcee::InvalidArgument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const emcee::DataError& e) {
        if (e.line_number > 0) {
            std::fprintf(stderr, "data error (line %d): %s\n", e.line_number, e.what());
        } else {
            std::fprintf(stderr, "data error: %s\n", e.what());
        }
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
