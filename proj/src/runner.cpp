#include "emcee/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "emcee/cost.hpp"
#include "emcee/errors.hpp"
#include "emcee/pipelines.hpp"
#include "emcee/prompts.hpp"
#include "emcee/text.hpp"

namespace emcee {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

RetryPolicy parse_retry(const json& doc) {
    RetryPolicy retry;
    if (doc.contains("max_attempts")) retry.max_attempts = doc["max_attempts"].get<int>();
    if (doc.contains("backoff_initial_ms")) {
        retry.backoff_initial_ms = doc["backoff_initial_ms"].get<int>();
    }
    if (doc.contains("backoff_multiplier")) {
        retry.backoff_multiplier = doc["backoff_multiplier"].get<double>();
    }
    if (doc.contains("backoff_max_ms")) retry.backoff_max_ms = doc["backoff_max_ms"].get<int>();
    if (retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
    return retry;
}

AdapterConfig parse_adapter(const json& doc, const std::filesystem::path& base,
                            const std::string& label) {
    AdapterConfig adapter;
    if (!doc.contains("kind")) throw ConfigError(label + " config needs a kind");
    adapter.kind = doc["kind"].get<std::string>();
    if (adapter.kind == "fixture") {
        if (!doc.contains("path")) throw ConfigError(label + " fixture needs a path");
        adapter.path = resolve(base, doc["path"].get<std::string>());
    } else if (adapter.kind == "http") {
        if (!doc.contains("base_url")) throw ConfigError(label + " http adapter needs base_url");
        adapter.base_url = doc["base_url"].get<std::string>();
        if (doc.contains("credential_env")) {
            adapter.credential_env = doc["credential_env"].get<std::string>();
        }
    } else {
        throw ConfigError(label + " kind must be fixture or http, got '" + adapter.kind + "'");
    }
    return adapter;
}

DatasetManifest parse_dataset(const json& doc, const std::filesystem::path& base,
                              uint64_t default_seed) {
    DatasetManifest manifest;
    if (!doc.contains("name")) throw ConfigError("dataset entry needs a name");
    manifest.name = doc["name"].get<std::string>();
    if (!doc.contains("task")) throw ConfigError("dataset " + manifest.name + " needs a task");
    manifest.task = parse_task_kind(doc["task"].get<std::string>());
    if (!doc.contains("path")) throw ConfigError("dataset " + manifest.name + " needs a path");
    manifest.path = resolve(base, doc["path"].get<std::string>());

    if (doc.contains("segmentation_overrides")) {
        for (const auto& [code, seg] : doc["segmentation_overrides"].items()) {
            manifest.segmentation_overrides[text::to_lower_ascii(text::trim(code))] =
                parse_segmentation(seg.get<std::string>());
        }
    }
    if (!doc.contains("languages") || !doc["languages"].is_array() ||
        doc["languages"].empty()) {
        throw ConfigError("dataset " + manifest.name + " needs a non-empty language list");
    }
    for (const auto& lang : doc["languages"]) {
        manifest.languages.push_back(normalize_language_tag(lang.get<std::string>(),
                                                            manifest.segmentation_overrides));
    }
    if (doc.contains("sample_size")) {
        int n = doc["sample_size"].get<int>();
        if (n < 1) throw ConfigError("dataset " + manifest.name + " sample_size must be >= 1");
        manifest.sample_size = n;
    }
    manifest.seed = doc.contains("seed") ? doc["seed"].get<uint64_t>() : default_seed;
    if (doc.contains("exemplars")) {
        manifest.exemplar_path = resolve(base, doc["exemplars"].get<std::string>());
    }
    if (doc.contains("excluded_entity_types")) {
        manifest.excluded_entity_types.clear();
        for (const auto& t : doc["excluded_entity_types"]) {
            manifest.excluded_entity_types.insert(t.get<std::string>());
        }
    }
    return manifest;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open run config: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    std::filesystem::path base = path.parent_path();

    RunConfig config;
    try {
        if (doc.contains("seed")) config.seed = doc["seed"].get<uint64_t>();
        if (doc.contains("workers")) config.workers = doc["workers"].get<int>();
        if (config.workers < 1) throw ConfigError("workers must be >= 1");
        if (doc.contains("split_strategy")) {
            config.split = parse_split_strategy(doc["split_strategy"].get<std::string>());
        }
        if (doc.contains("templates")) {
            config.templates_path = resolve(base, doc["templates"].get<std::string>());
        }
        if (doc.contains("pricing")) {
            config.pricing_path = resolve(base, doc["pricing"].get<std::string>());
        }
        if (doc.contains("cache_dir")) {
            config.cache_dir = resolve(base, doc["cache_dir"].get<std::string>());
        }
        config.out_dir = doc.contains("out_dir")
                             ? resolve(base, doc["out_dir"].get<std::string>())
                             : base / "run_output";

        if (doc.contains("backend")) {
            const json& b = doc["backend"];
            if (b.contains("kind")) config.backend.kind = b["kind"].get<std::string>();
            if (b.contains("model")) config.backend.model = b["model"].get<std::string>();
            if (b.contains("base_url")) config.backend.base_url = b["base_url"].get<std::string>();
            if (b.contains("credential_env")) {
                config.backend.credential_env = b["credential_env"].get<std::string>();
            }
            if (b.contains("requests_per_minute")) {
                config.backend.requests_per_minute = b["requests_per_minute"].get<double>();
            }
            if (b.contains("mock_script")) {
                config.backend.mock_script = resolve(base, b["mock_script"].get<std::string>());
            }
        }
        if (config.backend.kind != "mock" && config.backend.kind != "http") {
            throw ConfigError("backend kind must be mock or http, got '" + config.backend.kind +
                              "'");
        }
        if (config.backend.kind == "http" && config.backend.base_url.empty()) {
            throw ConfigError("http backend needs a base_url");
        }
        if (config.backend.model.empty()) throw ConfigError("backend needs a model name");

        if (doc.contains("retry")) config.retry = parse_retry(doc["retry"]);
        if (doc.contains("retriever")) {
            config.retriever = parse_adapter(doc["retriever"], base, "retriever");
        }
        if (doc.contains("translator")) {
            config.translator = parse_adapter(doc["translator"], base, "translator");
        }

        if (!doc.contains("methods") || !doc["methods"].is_array() || doc["methods"].empty()) {
            throw ConfigError("config needs a non-empty methods list");
        }
        for (const auto& m : doc["methods"]) {
            if (m.is_string()) {
                config.methods.push_back(make_method_spec(m.get<std::string>()));
                continue;
            }
            if (!m.is_object() || !m.contains("kind")) {
                throw ConfigError("method entries must be a kind string or an object with kind");
            }
            std::map<std::string, std::string> params;
            if (m.contains("params")) {
                for (const auto& [k, v] : m["params"].items()) {
                    params[k] = v.is_string() ? v.get<std::string>() : v.dump();
                }
            }
            std::string name = m.contains("name") ? m["name"].get<std::string>() : "";
            config.methods.push_back(make_method_spec(m["kind"].get<std::string>(), params, name));
        }
        std::set<std::string> method_names;
        for (const auto& m : config.methods) {
            if (!method_names.insert(m.name).second) {
                throw ConfigError("duplicate method name '" + m.name + "'");
            }
        }

        if (!doc.contains("datasets") || !doc["datasets"].is_array() ||
            doc["datasets"].empty()) {
            throw ConfigError("config needs a non-empty datasets list");
        }
        std::set<std::string> dataset_names;
        for (const auto& d : doc["datasets"]) {
            DatasetManifest manifest = parse_dataset(d, base, config.seed);
            if (!dataset_names.insert(manifest.name).second) {
                throw ConfigError("duplicate dataset name '" + manifest.name + "'");
            }
            config.datasets.push_back(std::move(manifest));
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config;
}

namespace {

struct Cell {
    const DatasetManifest* manifest;
    std::vector<QueryRecord> records;
    std::vector<Exemplar> exemplars;
};

bool needs_retriever(const std::vector<MethodSpec>& methods) {
    return std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) {
        return m.kind == MethodKind::rag_native || m.kind == MethodKind::rag_eng;
    });
}

bool needs_translator(const std::vector<MethodSpec>& methods) {
    return std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) {
        return m.kind == MethodKind::trans;
    });
}

std::unique_ptr<Retriever> build_retriever(const AdapterConfig& config) {
    if (!config.configured()) return nullptr;
    if (config.kind == "fixture") {
        return std::make_unique<FixtureRetriever>(FixtureRetriever::load(config.path));
    }
    return std::make_unique<HttpRetriever>(config.base_url, config.credential_env);
}

std::unique_ptr<Translator> build_translator(const AdapterConfig& config) {
    if (!config.configured()) return nullptr;
    if (config.kind == "fixture") {
        return std::make_unique<FixtureTranslator>(FixtureTranslator::load(config.path));
    }
    return std::make_unique<HttpTranslator>(config.base_url, config.credential_env);
}

std::unique_ptr<Backend> build_backend(const RunConfig& config) {
    std::unique_ptr<Transport> transport;
    if (config.backend.kind == "mock") {
        MockScript script;
        if (!config.backend.mock_script.empty()) {
            script = MockScript::load(config.backend.mock_script);
        }
        transport = std::make_unique<MockTransport>(std::move(script));
    } else {
        transport = std::make_unique<HttpTransport>(config.backend.base_url,
                                                    config.backend.credential_env);
    }
    std::optional<std::filesystem::path> cache_dir;
    if (!config.cache_dir.empty()) cache_dir = config.cache_dir;
    return std::make_unique<Backend>(std::move(transport), cache_dir, config.retry,
                                     config.backend.requests_per_minute);
}

// Bounded worker pool over one dataset x method cell; results keep record
// order regardless of which thread finished first.
void run_cell(const Cell& cell, const MethodSpec& method, const PipelineDeps& deps,
              int workers, std::vector<PredictionRecord>& predictions,
              std::vector<RecordFailure>& failures) {
    const std::vector<QueryRecord>& records = cell.records;
    std::vector<std::optional<PredictionRecord>> slots(records.size());
    std::vector<std::string> errors(records.size());
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            try {
                slots[i] = run_method(records[i], method, deps);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (errors[i].empty()) errors[i] = "unknown error";
            }
        }
    };

    size_t thread_count = std::min<size_t>(static_cast<size_t>(workers), records.size());
    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(thread_count);
        for (size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    for (size_t i = 0; i < records.size(); ++i) {
        if (slots[i].has_value()) {
            predictions.push_back(std::move(*slots[i]));
        } else {
            failures.push_back({cell.manifest->name, method.name, records[i].id, errors[i]});
        }
    }
}

}  // namespace

RunSummary execute_run(const RunConfig& config) {
    TemplateSet templates = config.templates_path.empty()
                                ? TemplateSet::builtin()
                                : TemplateSet::load(config.templates_path);

    if (needs_retriever(config.methods) && !config.retriever.configured()) {
        throw ConfigError("a rag method is configured but no retriever is");
    }
    if (needs_translator(config.methods) && !config.translator.configured()) {
        throw ConfigError("the trans method is configured but no translator is");
    }
    if (!config.pricing_path.empty()) {
        PricingTable::load(config.pricing_path);  // fail fast on a bad table
    }

    std::vector<std::string> warnings;
    std::vector<Cell> cells;
    cells.reserve(config.datasets.size());
    for (const auto& manifest : config.datasets) {
        templates.require_coverage(manifest.languages, manifest.task, config.methods);
        Cell cell;
        cell.manifest = &manifest;
        cell.records = load_dataset(manifest);
        cell.records = filter_open_qa(cell.records, manifest.excluded_entity_types);
        if (manifest.sample_size) {
            cell.records = sample_per_language(cell.records, *manifest.sample_size,
                                               manifest.seed);
        }
        if (cell.records.empty()) {
            throw ConfigError("dataset " + manifest.name +
                              " has no records after filtering and sampling");
        }
        if (!manifest.exemplar_path.empty()) {
            ExemplarLoad loaded = load_exemplars(manifest.exemplar_path, manifest.name);
            cell.exemplars = std::move(loaded.exemplars);
            for (auto& w : loaded.warnings) warnings.push_back(std::move(w));
        }
        cells.push_back(std::move(cell));
    }

    std::unique_ptr<Retriever> retriever = build_retriever(config.retriever);
    std::unique_ptr<Translator> translator = build_translator(config.translator);
    std::unique_ptr<Backend> backend = build_backend(config);

    std::filesystem::create_directories(config.out_dir / "predictions");

    RunSummary summary;
    std::map<std::string, int> counts;
    for (const auto& cell : cells) {
        std::filesystem::path dataset_dir =
            config.out_dir / "predictions" / cell.manifest->name;
        std::filesystem::create_directories(dataset_dir);
        for (const auto& method : config.methods) {
            PipelineDeps deps{*backend,  templates,        config.backend.model,
                              cell.exemplars, retriever.get(), translator.get(),
                              config.seed};
            std::vector<PredictionRecord> predictions;
            run_cell(cell, method, deps, config.workers, predictions, summary.failures);

            std::sort(predictions.begin(), predictions.end(),
                      [](const PredictionRecord& a, const PredictionRecord& b) {
                          if (a.language != b.language) return a.language < b.language;
                          return a.id < b.id;
                      });
            std::ofstream out(dataset_dir / (method.name + ".jsonl"),
                              std::ios::binary | std::ios::trunc);
            if (!out) {
                throw ConfigError("cannot write predictions under " + dataset_dir.string());
            }
            for (const auto& p : predictions) out << prediction_to_json(p) << '\n';
            counts[cell.manifest->name + "/" + method.name] =
                static_cast<int>(predictions.size());
            summary.predictions += static_cast<int>(predictions.size());
        }
    }

    ordered_json manifest_doc;
    manifest_doc["seed"] = config.seed;
    manifest_doc["split_strategy"] = to_string(config.split);
    manifest_doc["templates_digest"] = templates.content_digest();
    manifest_doc["backend"] =
        ordered_json{{"kind", config.backend.kind}, {"model", config.backend.model}};
    ordered_json datasets_doc = ordered_json::array();
    for (const auto& cell : cells) {
        ordered_json entry;
        entry["name"] = cell.manifest->name;
        entry["task"] = to_string(cell.manifest->task);
        ordered_json langs = ordered_json::array();
        for (const auto& lang : cell.manifest->languages) langs.push_back(lang.code);
        entry["languages"] = std::move(langs);
        if (cell.manifest->sample_size) {
            entry["sample_size"] = *cell.manifest->sample_size;
        } else {
            entry["sample_size"] = nullptr;
        }
        entry["seed"] = cell.manifest->seed;
        entry["records"] = cell.records.size();
        entry["exemplars"] = cell.exemplars.size();
        datasets_doc.push_back(std::move(entry));
    }
    manifest_doc["datasets"] = std::move(datasets_doc);
    ordered_json methods_doc = ordered_json::array();
    for (const auto& method : config.methods) {
        ordered_json entry;
        entry["kind"] = to_string(method.kind);
        entry["name"] = method.name;
        entry["params"] = method.params;
        methods_doc.push_back(std::move(entry));
    }
    manifest_doc["methods"] = std::move(methods_doc);
    manifest_doc["counts"] = counts;
    manifest_doc["warnings"] = warnings;

    std::ofstream manifest_out(config.out_dir / "manifest.json",
                               std::ios::binary | std::ios::trunc);
    if (!manifest_out) {
        throw ConfigError("cannot write manifest under " + config.out_dir.string());
    }
    manifest_out << manifest_doc.dump(2) << '\n';

    if (!summary.failures.empty()) {
        std::sort(summary.failures.begin(), summary.failures.end(),
                  [](const RecordFailure& a, const RecordFailure& b) {
                      if (a.dataset != b.dataset) return a.dataset < b.dataset;
                      if (a.method != b.method) return a.method < b.method;
                      return a.id < b.id;
                  });
        std::ofstream errors_out(config.out_dir / "errors.jsonl",
                                 std::ios::binary | std::ios::trunc);
        for (const auto& f : summary.failures) {
            errors_out << ordered_json{{"dataset", f.dataset},
                                       {"method", f.method},
                                       {"id", f.id},
                                       {"error", f.message}}
                              .dump()
                       << '\n';
        }
        summary.exit_code = 1;
    }

    summary.backend_stats = backend->stats();
    return summary;
}

}  // namespace emcee
