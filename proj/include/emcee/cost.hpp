#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emcee/backend.hpp"
#include "emcee/pipelines.hpp"

namespace emcee {

struct ModelRates {
    double input_rate = 0.0;   // currency per 1M prompt tokens
    double output_rate = 0.0;  // currency per 1M completion tokens
};

struct PricingTable {
    std::string currency = "USD";
    std::map<std::string, ModelRates> models;

    // JSON: {"currency": "USD", "models": {"name": {"input": r, "output": r}}}
    static PricingTable load(const std::filesystem::path& path);
};

struct UsageTotals {
    int64_t input_tokens = 0;
    int64_t output_tokens = 0;
    int64_t call_count = 0;
    // Prediction records carry no cache markers (they must stay byte-stable),
    // so this is filled from backend stats by callers that have them.
    int64_t cache_hit_count = 0;
    std::map<std::string, Usage> per_stage;
};

// input/1e6 * input_rate + output/1e6 * output_rate, full precision. A model
// absent from the table yields no amount and a warning.
std::optional<double> price_run(const UsageTotals& usage, const PricingTable& pricing,
                                const std::string& model,
                                std::vector<std::string>* warnings = nullptr);

// Groups by method name; local stages (retrieve, translate) are kept in the
// per-stage map but not counted as calls.
std::map<std::string, UsageTotals> usage_summary(
    const std::vector<PredictionRecord>& predictions);

}  // namespace emcee
