#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emcee/backend.hpp"
#include "emcee/eval.hpp"
#include "emcee/model.hpp"
#include "emcee/prompts.hpp"

namespace emcee {

struct StageResponse {
    std::string stage;  // answer, extract, augmented_answer, reason, judge, ...
    std::string text;
    Usage usage;
};

enum class CandidateStage { extraction, reasoning };
const char* to_string(CandidateStage s);

struct CandidateResponse {
    CandidateStage stage = CandidateStage::reasoning;
    std::string text;
    ParsedAnswer parsed;
    Usage usage;
};

struct Verdict {
    std::string summary;    // text between "Summary:" and "Conclusion:"
    int chosen_index = -1;  // candidate whose parsed answer matches; -1 = independent
    ParsedAnswer final;
    std::string raw_text;
};

// One evaluated record. Deliberately free of timestamps, latencies, and cache
// markers so serialized predictions are byte-stable across reruns and worker
// counts.
struct PredictionRecord {
    std::string id;
    std::string dataset;
    std::string language;  // code
    std::string method;    // MethodSpec name
    TaskKind task = TaskKind::mcqa;
    std::string final_text;  // text the final answer was parsed from
    ParsedAnswer parsed;
    std::vector<StageResponse> stages;
    Usage usage;  // sum of stage usages
    std::optional<bool> correct;
    std::optional<double> score;
    std::vector<std::string> flags;  // empty_context_fallback, route_default, ...
    int chosen_index = -1;
    std::string judge_summary;
};

std::string prediction_to_json(const PredictionRecord& prediction);
PredictionRecord prediction_from_json(const std::string& line);

class Retriever {
public:
    virtual ~Retriever() = default;
    // Ranked passages, best first; empty when nothing matches.
    virtual std::vector<std::string> search(const std::string& query) = 0;
};

// JSONL fixture, one {"query": ..., "passage": ...} per line; lookup is exact
// on the query text.
class FixtureRetriever : public Retriever {
public:
    static FixtureRetriever load(const std::filesystem::path& path);
    std::vector<std::string> search(const std::string& query) override;
    void add(std::string query, std::string passage);

private:
    std::map<std::string, std::string> passages_;
};

// GET {base_url}/search?q=... with a bearer key from the named environment
// variable; expects {"passages": [...]} or a bare JSON array of strings.
class HttpRetriever : public Retriever {
public:
    HttpRetriever(std::string base_url, std::string credential_env, int timeout_seconds = 30);
    std::vector<std::string> search(const std::string& query) override;

private:
    std::string base_url_;
    std::string credential_;
    int timeout_seconds_;
};

class Translator {
public:
    virtual ~Translator() = default;
    // Throws on failure; translation is the method, so there is no fallback.
    virtual std::string translate(const std::string& text, const std::string& source,
                                  const std::string& target) = 0;
};

// JSONL fixture, one {"text": ..., "source": ..., "target": ..., "translation": ...}
// per line.
class FixtureTranslator : public Translator {
public:
    static FixtureTranslator load(const std::filesystem::path& path);
    std::string translate(const std::string& text, const std::string& source,
                          const std::string& target) override;
    void add(std::string text, std::string source, std::string target, std::string translation);

private:
    std::map<std::string, std::string> table_;  // "source\x1ftarget\x1ftext" -> translation
};

// POST {base_url}/translate with {"q", "source", "target"}; expects {"text": ...}.
class HttpTranslator : public Translator {
public:
    HttpTranslator(std::string base_url, std::string credential_env, int timeout_seconds = 30);
    std::string translate(const std::string& text, const std::string& source,
                          const std::string& target) override;

private:
    std::string base_url_;
    std::string credential_;
    int timeout_seconds_;
};

struct PipelineDeps {
    Backend& backend;
    const TemplateSet& templates;
    std::string model;
    std::vector<Exemplar> exemplars;
    Retriever* retriever = nullptr;
    Translator* translator = nullptr;
    uint64_t seed = 0;
};

struct ExtractionOutcome {
    std::string context;
    CandidateResponse candidate;
    std::vector<StageResponse> stages;
    std::vector<std::string> flags;
};

// two_call: context call then context-grounded answer call; an empty context
// degrades to the plain basic prompt and flags the record. single_call: one
// call whose whole text serves as both context and candidate.
ExtractionOutcome emcee_extract(const QueryRecord& record, const PipelineDeps& deps,
                                ExtractionMode mode);

// English chain-of-thought pathway; temperature 0 unless overridden.
CandidateResponse emcee_reason(const QueryRecord& record, const PipelineDeps& deps,
                               double temperature = 0.0,
                               const std::map<std::string, std::string>& extra_params = {});

struct MergeOutcome {
    Verdict verdict;
    StageResponse stage;
};

// One judge call over the candidates. verdict.final may be a parse failure;
// the caller applies the reasoning-candidate fallback.
MergeOutcome emcee_merge(const QueryRecord& record,
                         const std::vector<CandidateResponse>& candidates,
                         const PipelineDeps& deps, JudgeOrder order_policy, uint64_t seed);

enum class RoutePath { extract_path, reason_path };

struct RouteOutcome {
    RoutePath path = RoutePath::reason_path;
    bool defaulted = false;  // reply was not a recognized PATH token
    StageResponse stage;
};

RouteOutcome emcee_route(const QueryRecord& record, const PipelineDeps& deps);

// Dispatches to the per-method flow, records every stage response and usage,
// and scores the parsed answer against gold. Backend errors are rethrown with
// the record id attached; a missing retriever/translator dependency is a
// configuration error.
PredictionRecord run_method(const QueryRecord& record, const MethodSpec& method,
                            const PipelineDeps& deps);

}  // namespace emcee
