#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emcee/backend.hpp"
#include "emcee/datasets.hpp"
#include "emcee/eval.hpp"
#include "emcee/model.hpp"

namespace emcee {

struct BackendConfig {
    std::string kind = "mock";  // mock | http
    std::string model = "mock-model";
    std::string base_url;
    std::string credential_env;
    double requests_per_minute = 0.0;
    std::filesystem::path mock_script;  // empty: fallback-only script
};

struct AdapterConfig {
    std::string kind;  // fixture | http; empty = not configured
    std::filesystem::path path;
    std::string base_url;
    std::string credential_env;

    bool configured() const { return !kind.empty(); }
};

struct RunConfig {
    std::vector<DatasetManifest> datasets;
    std::vector<MethodSpec> methods;
    BackendConfig backend;
    RetryPolicy retry;
    AdapterConfig retriever;
    AdapterConfig translator;
    std::filesystem::path templates_path;  // empty: builtin templates
    std::filesystem::path pricing_path;
    uint64_t seed = 0;
    int workers = 1;
    std::filesystem::path cache_dir;  // empty: no response cache
    std::filesystem::path out_dir;
    SplitStrategy split = SplitStrategy::threshold_mean;

    // Relative paths inside the file resolve against its directory.
    static RunConfig load(const std::filesystem::path& path);
};

struct RecordFailure {
    std::string dataset;
    std::string method;
    std::string id;
    std::string message;
};

struct RunSummary {
    int exit_code = 0;  // 0 clean, 1 record-level failures
    int predictions = 0;
    std::vector<RecordFailure> failures;
    Backend::Stats backend_stats;
};

// Loads, samples, and executes every dataset x method cell with bounded
// concurrency, then writes {out}/predictions/{dataset}/{method}.jsonl in
// (language, id) order plus {out}/manifest.json; failures land in
// {out}/errors.jsonl. Configuration problems throw ConfigError before any
// backend call.
RunSummary execute_run(const RunConfig& config);

}  // namespace emcee
