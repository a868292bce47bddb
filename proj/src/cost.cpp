#include "emcee/cost.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "emcee/errors.hpp"

namespace emcee {

using json = nlohmann::json;

PricingTable PricingTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open pricing file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    PricingTable table;
    if (doc.contains("currency")) table.currency = doc["currency"].get<std::string>();
    if (!doc.contains("models") || !doc["models"].is_object()) {
        throw ConfigError(path.string() + ": pricing file needs a models object");
    }
    for (const auto& [name, rates] : doc["models"].items()) {
        if (!rates.is_object() || !rates.contains("input") || !rates.contains("output")) {
            throw ConfigError(path.string() + ": model " + name +
                              " needs input and output rates");
        }
        ModelRates r{rates["input"].get<double>(), rates["output"].get<double>()};
        if (r.input_rate < 0.0 || r.output_rate < 0.0) {
            throw ConfigError(path.string() + ": model " + name + " has a negative rate");
        }
        table.models[name] = r;
    }
    return table;
}

std::optional<double> price_run(const UsageTotals& usage, const PricingTable& pricing,
                                const std::string& model,
                                std::vector<std::string>* warnings) {
    auto it = pricing.models.find(model);
    if (it == pricing.models.end()) {
        if (warnings) {
            warnings->push_back("no pricing entry for model '" + model + "'; cost omitted");
        }
        return std::nullopt;
    }
    return static_cast<double>(usage.input_tokens) / 1e6 * it->second.input_rate +
           static_cast<double>(usage.output_tokens) / 1e6 * it->second.output_rate;
}

std::map<std::string, UsageTotals> usage_summary(
    const std::vector<PredictionRecord>& predictions) {
    std::map<std::string, UsageTotals> summary;
    for (const auto& prediction : predictions) {
        UsageTotals& totals = summary[prediction.method];
        for (const auto& stage : prediction.stages) {
            totals.input_tokens += stage.usage.prompt_tokens;
            totals.output_tokens += stage.usage.completion_tokens;
            if (stage.stage != "retrieve" && stage.stage != "translate") ++totals.call_count;
            totals.per_stage[stage.stage] += stage.usage;
        }
    }
    return summary;
}

}  // namespace emcee
