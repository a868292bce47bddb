#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emcee/cost.hpp"
#include "emcee/errors.hpp"
#include "emcee/report.hpp"
#include "emcee/runner.hpp"
#include "helpers.hpp"

using namespace emcee;
using test_support::TempDir;
using test_support::read_file;
using test_support::write_file;

namespace {

std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(TEST_DATA_DIR) / name;
}

std::filesystem::path asset_path(const std::string& name) {
    return std::filesystem::path(ASSET_DIR) / name;
}

RunConfig small_config(const std::filesystem::path& out_dir, int workers = 1) {
    RunConfig config;
    config.seed = 7;
    config.workers = workers;
    config.out_dir = out_dir;
    config.backend.kind = "mock";
    config.backend.model = "mock-model";
    config.backend.mock_script = data_path("mock_generic.json");

    DatasetManifest dataset;
    dataset.name = "fixture";
    dataset.task = TaskKind::mcqa;
    dataset.path = data_path("fixture50.jsonl");
    dataset.languages = {normalize_language_tag("en", {}), normalize_language_tag("jv", {})};
    dataset.sample_size = 5;
    dataset.seed = 7;
    dataset.exemplar_path = data_path("exemplars_demo.jsonl");
    config.datasets.push_back(std::move(dataset));

    config.methods.push_back(make_method_spec("native_basic"));
    config.methods.push_back(
        make_method_spec("emcee", {{"extraction_mode", "single_call"}}, "emcee_single"));
    return config;
}

nlohmann::json base_config_json() {
    nlohmann::json doc;
    doc["seed"] = 7;
    doc["methods"] = {"native_basic"};
    doc["backend"] = {{"kind", "mock"},
                      {"model", "mock-model"},
                      {"mock_script", data_path("mock_generic.json").string()}};
    doc["datasets"] = nlohmann::json::array({{{"name", "fixture"},
                                              {"task", "mcqa"},
                                              {"path", data_path("fixture50.jsonl").string()},
                                              {"languages", {"en", "jv"}}}});
    return doc;
}

std::filesystem::path write_config(const TempDir& dir, const nlohmann::json& doc,
                                   const std::string& name = "config.json") {
    auto path = dir.path / name;
    write_file(path, doc.dump(2));
    return path;
}

int count_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    return lines;
}

}  // namespace

TEST_CASE("the example run config parses with every field populated") {
    RunConfig config = RunConfig::load(asset_path("run_config.example.json"));
    CHECK(config.seed == 7);
    CHECK(config.workers == 4);
    CHECK(config.split == SplitStrategy::threshold_mean);
    CHECK(config.backend.kind == "mock");
    CHECK(config.backend.model == "mock-model");
    CHECK(std::filesystem::exists(config.backend.mock_script));
    CHECK(std::filesystem::exists(config.pricing_path));
    CHECK(config.out_dir.filename() == "run_output");
    CHECK(config.retry.max_attempts == 3);
    REQUIRE(config.methods.size() == 9);
    CHECK(config.methods[0].name == "native_basic");
    CHECK(config.methods[6].name == "emcee_single");
    CHECK(config.methods[6].params.at("extraction_mode") == "single_call");
    CHECK(config.methods[8].kind == MethodKind::self_consistency_merge);
    REQUIRE(config.datasets.size() == 1);
    CHECK(config.datasets[0].name == "fixture");
    CHECK(std::filesystem::exists(config.datasets[0].path));
    CHECK(std::filesystem::exists(config.datasets[0].exemplar_path));
    CHECK(config.datasets[0].languages.size() == 2);
    CHECK(config.datasets[0].seed == 7);
}

TEST_CASE("run config validation rejects broken inputs") {
    TempDir dir("emcee_cfg");

    SUBCASE("missing file") {
        CHECK_THROWS_AS(RunConfig::load(dir.path / "absent.json"), ConfigError);
    }
    SUBCASE("invalid json") {
        auto path = dir.path / "broken.json";
        write_file(path, "{nope");
        CHECK_THROWS_WITH_AS(RunConfig::load(path), doctest::Contains("invalid JSON"),
                             ConfigError);
    }
    SUBCASE("workers below one") {
        auto doc = base_config_json();
        doc["workers"] = 0;
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("workers"), ConfigError);
    }
    SUBCASE("unknown backend kind") {
        auto doc = base_config_json();
        doc["backend"]["kind"] = "imaginary";
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("backend kind"), ConfigError);
    }
    SUBCASE("http backend needs a base url") {
        auto doc = base_config_json();
        doc["backend"]["kind"] = "http";
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("base_url"), ConfigError);
    }
    SUBCASE("empty model name") {
        auto doc = base_config_json();
        doc["backend"]["model"] = "";
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("model"), ConfigError);
    }
    SUBCASE("methods must be present") {
        auto doc = base_config_json();
        doc["methods"] = nlohmann::json::array();
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("methods"), ConfigError);
    }
    SUBCASE("duplicate method names") {
        auto doc = base_config_json();
        doc["methods"] = {"native_basic", "native_basic"};
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("duplicate method name"), ConfigError);
    }
    SUBCASE("duplicate dataset names") {
        auto doc = base_config_json();
        doc["datasets"].push_back(doc["datasets"][0]);
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("duplicate dataset name"), ConfigError);
    }
    SUBCASE("sample size below one") {
        auto doc = base_config_json();
        doc["datasets"][0]["sample_size"] = 0;
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("sample_size"), ConfigError);
    }
    SUBCASE("dataset needs languages") {
        auto doc = base_config_json();
        doc["datasets"][0]["languages"] = nlohmann::json::array();
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("language"), ConfigError);
    }
    SUBCASE("method entry needs a kind") {
        auto doc = base_config_json();
        doc["methods"] = nlohmann::json::array({nlohmann::json{{"name", "mystery"}}});
        CHECK_THROWS_WITH_AS(RunConfig::load(write_config(dir, doc)),
                             doctest::Contains("kind"), ConfigError);
    }
}

TEST_CASE("execute_run writes sorted predictions and a stable manifest") {
    TempDir dir("emcee_run");
    RunConfig config = small_config(dir.path / "out");
    RunSummary summary = execute_run(config);

    CHECK(summary.exit_code == 0);
    CHECK(summary.predictions == 20);  // 10 sampled records x 2 methods
    CHECK(summary.failures.empty());
    CHECK(summary.backend_stats.transport_calls == 10 + 10 * 3);
    CHECK(!std::filesystem::exists(config.out_dir / "errors.jsonl"));

    auto basic_path = config.out_dir / "predictions" / "fixture" / "native_basic.jsonl";
    auto emcee_path = config.out_dir / "predictions" / "fixture" / "emcee_single.jsonl";
    REQUIRE(std::filesystem::exists(basic_path));
    REQUIRE(std::filesystem::exists(emcee_path));
    CHECK(count_lines(basic_path) == 10);
    CHECK(count_lines(emcee_path) == 10);

    std::ifstream in(basic_path);
    std::string line;
    std::vector<std::pair<std::string, std::string>> keys;
    while (std::getline(in, line)) {
        PredictionRecord p = prediction_from_json(line);
        keys.emplace_back(p.language, p.id);
    }
    for (size_t i = 1; i < keys.size(); ++i) CHECK(keys[i - 1] < keys[i]);
    CHECK(keys.front().first == "en");
    CHECK(keys.back().first == "jv");

    auto manifest = nlohmann::json::parse(read_file(config.out_dir / "manifest.json"));
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["split_strategy"] == "threshold_mean");
    CHECK(manifest["backend"]["kind"] == "mock");
    CHECK(manifest["backend"]["model"] == "mock-model");
    CHECK(manifest["templates_digest"].get<std::string>().size() == 64);
    CHECK(!manifest.contains("workers"));
    REQUIRE(manifest["datasets"].size() == 1);
    CHECK(manifest["datasets"][0]["name"] == "fixture");
    CHECK(manifest["datasets"][0]["records"] == 10);
    CHECK(manifest["datasets"][0]["sample_size"] == 5);
    CHECK(manifest["datasets"][0]["exemplars"] == 3);
    CHECK(!manifest["datasets"][0].contains("path"));
    CHECK(manifest["counts"]["fixture/native_basic"] == 10);
    CHECK(manifest["counts"]["fixture/emcee_single"] == 10);
    CHECK(manifest["methods"].size() == 2);
    CHECK(manifest["warnings"].empty());
}

TEST_CASE("worker count never changes the bytes on disk") {
    TempDir dir("emcee_workers");
    std::vector<std::string> basic_bytes;
    std::vector<std::string> emcee_bytes;
    std::vector<std::string> manifest_bytes;
    for (int workers : {1, 4, 16}) {
        auto out = dir.path / ("out_" + std::to_string(workers));
        RunConfig config = small_config(out, workers);
        RunSummary summary = execute_run(config);
        CHECK(summary.exit_code == 0);
        basic_bytes.push_back(read_file(out / "predictions" / "fixture" / "native_basic.jsonl"));
        emcee_bytes.push_back(read_file(out / "predictions" / "fixture" / "emcee_single.jsonl"));
        manifest_bytes.push_back(read_file(out / "manifest.json"));
    }
    CHECK(basic_bytes[0] == basic_bytes[1]);
    CHECK(basic_bytes[0] == basic_bytes[2]);
    CHECK(emcee_bytes[0] == emcee_bytes[1]);
    CHECK(emcee_bytes[0] == emcee_bytes[2]);
    CHECK(manifest_bytes[0] == manifest_bytes[1]);
    CHECK(manifest_bytes[0] == manifest_bytes[2]);

    SUBCASE("a rerun into a fresh directory reproduces the bytes too") {
        auto out = dir.path / "out_rerun";
        execute_run(small_config(out, 4));
        CHECK(read_file(out / "predictions" / "fixture" / "native_basic.jsonl") ==
              basic_bytes[0]);
        CHECK(read_file(out / "manifest.json") == manifest_bytes[0]);
    }
}

TEST_CASE("a warm cache serves a rerun without touching the transport") {
    TempDir dir("emcee_cache");
    RunConfig config = small_config(dir.path / "out1");
    config.cache_dir = dir.path / "cache";

    RunSummary cold = execute_run(config);
    CHECK(cold.backend_stats.transport_calls == 40);
    CHECK(cold.backend_stats.cache_hits == 0);

    RunConfig rerun = small_config(dir.path / "out2");
    rerun.cache_dir = config.cache_dir;
    RunSummary warm = execute_run(rerun);
    CHECK(warm.backend_stats.transport_calls == 0);
    CHECK(warm.backend_stats.cache_hits == 40);

    CHECK(read_file(config.out_dir / "predictions" / "fixture" / "native_basic.jsonl") ==
          read_file(rerun.out_dir / "predictions" / "fixture" / "native_basic.jsonl"));
    CHECK(read_file(config.out_dir / "predictions" / "fixture" / "emcee_single.jsonl") ==
          read_file(rerun.out_dir / "predictions" / "fixture" / "emcee_single.jsonl"));
}

TEST_CASE("record-level failures land in errors.jsonl and flip the exit code") {
    TempDir dir("emcee_fail");
    RunConfig config = small_config(dir.path / "out");
    config.methods = {make_method_spec("native_basic"), make_method_spec("trans")};
    config.translator.kind = "fixture";
    config.translator.path = data_path("translation.jsonl");
    config.datasets[0].languages = {normalize_language_tag("jv", {})};
    config.datasets[0].sample_size = 2;

    RunSummary summary = execute_run(config);
    CHECK(summary.exit_code == 1);
    CHECK(summary.predictions == 2);  // native_basic still answers
    REQUIRE(summary.failures.size() == 2);
    CHECK(summary.failures[0].method == "trans");
    CHECK(summary.failures[0].message.find("no translation fixture entry") !=
          std::string::npos);

    auto errors_path = config.out_dir / "errors.jsonl";
    REQUIRE(std::filesystem::exists(errors_path));
    CHECK(count_lines(errors_path) == 2);
    auto first = nlohmann::json::parse(read_file(errors_path).substr(
        0, read_file(errors_path).find('\n')));
    CHECK(first["dataset"] == "fixture");
    CHECK(first["method"] == "trans");
    CHECK(!first["id"].get<std::string>().empty());
}

TEST_CASE("native prompting on an uncovered language is rejected up front") {
    TempDir dir("emcee_cov");
    RunConfig config = small_config(dir.path / "out");
    config.datasets[0].name = "swahili";
    config.datasets[0].path = data_path("swahili.jsonl");
    config.datasets[0].languages = {normalize_language_tag("sw", {})};
    config.datasets[0].sample_size.reset();
    config.datasets[0].exemplar_path.clear();
    config.methods = {make_method_spec("native_basic")};

    CHECK_THROWS_WITH_AS(execute_run(config), doctest::Contains("sw"), ConfigError);

    SUBCASE("a template override supplies the missing coverage") {
        config.templates_path = data_path("templates_override.json");
        config.backend.mock_script = data_path("mock_swahili.json");
        RunSummary summary = execute_run(config);
        CHECK(summary.exit_code == 0);
        CHECK(summary.predictions == 1);
    }
}

TEST_CASE("a missing adapter for a configured method fails before any call") {
    TempDir dir("emcee_adapter");
    RunConfig config = small_config(dir.path / "out");
    config.methods = {make_method_spec("rag_eng")};
    CHECK_THROWS_WITH_AS(execute_run(config), doctest::Contains("retriever"), ConfigError);

    config.methods = {make_method_spec("trans")};
    CHECK_THROWS_WITH_AS(execute_run(config), doctest::Contains("translator"), ConfigError);
}

TEST_CASE("reports render accuracy, improvement, diagnostics, and cost sections") {
    TempDir dir("emcee_report");
    RunConfig config = small_config(dir.path / "out");
    REQUIRE(execute_run(config).exit_code == 0);

    ReportOptions options;
    options.run_dirs = {config.out_dir};
    options.pricing_path = asset_path("pricing.example.json");
    auto written = emit_report(options);
    REQUIRE(written.size() == 2);

    std::string md = read_file(config.out_dir / "report.md");
    CHECK(md.rfind("# Evaluation report", 0) == 0);
    CHECK(md.find("\n## fixture\n") != std::string::npos);
    CHECK(md.find("| method | All | High | Low |") != std::string::npos);
    CHECK(md.find("| native_basic | ") != std::string::npos);
    CHECK(md.find("| emcee_single | ") != std::string::npos);
    // native_basic answers A everywhere: en scores 2/5, jv 4/5.
    CHECK(md.find("| native_basic | 60.0 | 80.0 | 40.0 |") != std::string::npos);
    CHECK(md.find("Split (threshold_mean, from native_basic): high = jv; low = en") !=
          std::string::npos);
    CHECK(md.find("## Relative improvement vs native_basic (%)") != std::string::npos);
    CHECK(md.find("| emcee_single | mean |") != std::string::npos);
    CHECK(md.find("## Diagnostics") != std::string::npos);
    CHECK(md.find("independent_conclusions") != std::string::npos);
    CHECK(md.find("## Cost") != std::string::npos);
    CHECK(md.find("cost (USD)") != std::string::npos);
    CHECK(md.find("### Per-stage tokens") != std::string::npos);
    CHECK(md.find("| emcee_single | judge |") != std::string::npos);

    std::string csv = read_file(config.out_dir / "report.csv");
    CHECK(csv.rfind("dataset,language,method,score_percent,records\n", 0) == 0);
    CHECK(csv.find("fixture,en,native_basic,40.00,5") != std::string::npos);
    CHECK(csv.find("fixture,jv,native_basic,80.00,5") != std::string::npos);
    CHECK(count_lines(config.out_dir / "report.csv") == 1 + 4);

    SUBCASE("without pricing the cost column shows a dash") {
        PredictionIndex index = load_predictions({config.out_dir});
        ReportOptions plain;
        plain.run_dirs = {config.out_dir};
        ReportOutput output = build_report(index, plain, "mock-model");
        CHECK(output.markdown.find("## Cost") != std::string::npos);
        CHECK(output.markdown.find("| - |") != std::string::npos);
    }
    SUBCASE("an unpriced model is a warning, not an error") {
        PredictionIndex index = load_predictions({config.out_dir});
        ReportOptions priced;
        priced.run_dirs = {config.out_dir};
        priced.pricing_path = asset_path("pricing.example.json");
        ReportOutput output = build_report(index, priced, "unlisted-model");
        CHECK(!output.warnings.empty());
        CHECK(output.markdown.find("## Warnings") != std::string::npos);
    }
}

TEST_CASE("a report without its baseline method is a configuration error") {
    TempDir dir("emcee_nobase");
    RunConfig config = small_config(dir.path / "out");
    config.methods = {make_method_spec("eng_cot")};
    REQUIRE(execute_run(config).exit_code == 0);

    ReportOptions options;
    options.run_dirs = {config.out_dir};
    CHECK_THROWS_WITH_AS(emit_report(options), doctest::Contains("native_basic"), ConfigError);
}

TEST_CASE("later run directories replace earlier ones per dataset and method") {
    TempDir dir("emcee_merge_dirs");
    RunConfig first = small_config(dir.path / "a");
    REQUIRE(execute_run(first).exit_code == 0);

    RunConfig second = small_config(dir.path / "b");
    second.datasets[0].sample_size = 3;
    REQUIRE(execute_run(second).exit_code == 0);

    PredictionIndex merged = load_predictions({first.out_dir, second.out_dir});
    CHECK(merged.at("fixture").at("native_basic").size() == 6);

    PredictionIndex reversed = load_predictions({second.out_dir, first.out_dir});
    CHECK(reversed.at("fixture").at("native_basic").size() == 10);

    CHECK_THROWS_AS(load_predictions({dir.path / "missing"}), ConfigError);
}

TEST_CASE("token pricing follows the configured per-million rates") {
    PricingTable pricing = PricingTable::load(asset_path("pricing.example.json"));
    CHECK(pricing.currency == "USD");

    UsageTotals first;
    first.input_tokens = 539000;
    first.output_tokens = 99000;
    auto cost = price_run(first, pricing, "gpt-4o-mini");
    REQUIRE(cost.has_value());
    CHECK(*cost == doctest::Approx(0.14025).epsilon(1e-9));
    CHECK(format_fixed(*cost, 3) == "0.140");

    UsageTotals second;
    second.input_tokens = 282000;
    second.output_tokens = 176000;
    auto other = price_run(second, pricing, "gpt-4o-mini");
    REQUIRE(other.has_value());
    CHECK(*other == doctest::Approx(0.1479).epsilon(1e-9));

    std::vector<std::string> warnings;
    CHECK(!price_run(first, pricing, "missing-model", &warnings).has_value());
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("missing-model") != std::string::npos);
}

TEST_CASE("usage summaries group by method and skip local stages in call counts") {
    PredictionRecord a;
    a.method = "rag_eng";
    a.stages = {{"retrieve", "passage", {0, 0}}, {"answer", "Answer: A", {10, 5}}};
    PredictionRecord b;
    b.method = "rag_eng";
    b.stages = {{"answer", "Answer: B", {7, 3}}};
    PredictionRecord c;
    c.method = "emcee";
    c.stages = {{"extract", "notes", {20, 8}},
                {"reason", "Answer: A", {15, 6}},
                {"judge", "Conclusion: option A is more plausible", {30, 9}}};

    auto summary = usage_summary({a, b, c});
    REQUIRE(summary.count("rag_eng") == 1);
    REQUIRE(summary.count("emcee") == 1);
    CHECK(summary["rag_eng"].input_tokens == 17);
    CHECK(summary["rag_eng"].output_tokens == 8);
    CHECK(summary["rag_eng"].call_count == 2);
    CHECK(summary["rag_eng"].per_stage.count("retrieve") == 1);
    CHECK(summary["emcee"].call_count == 3);
    CHECK(summary["emcee"].per_stage.at("judge").completion_tokens == 9);
}
