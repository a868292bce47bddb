#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include "emcee/pipelines.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "emcee/text.hpp"

namespace emcee {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

const char* to_string(CandidateStage s) {
    return s == CandidateStage::extraction ? "extraction" : "reasoning";
}

namespace {

const char* to_string(AnswerKind k) {
    switch (k) {
        case AnswerKind::option_label: return "option_label";
        case AnswerKind::free_text: return "free_text";
        case AnswerKind::failure: return "failure";
    }
    return "failure";
}

AnswerKind answer_kind_from(const std::string& s) {
    if (s == "option_label") return AnswerKind::option_label;
    if (s == "free_text") return AnswerKind::free_text;
    if (s == "failure") return AnswerKind::failure;
    throw DataError("unknown answer kind '" + s + "'");
}

ordered_json parsed_to_json(const ParsedAnswer& parsed) {
    return ordered_json{{"kind", to_string(parsed.kind)},
                        {"value", parsed.value},
                        {"failure_reason", parsed.failure_reason}};
}

ParsedAnswer parsed_from_json(const json& doc) {
    ParsedAnswer parsed;
    parsed.kind = answer_kind_from(doc.at("kind").get<std::string>());
    parsed.value = doc.at("value").get<std::string>();
    parsed.failure_reason = doc.at("failure_reason").get<std::string>();
    return parsed;
}

LlmResponse complete(const PipelineDeps& deps, const PromptBundle& bundle,
                     const std::map<std::string, std::string>& extra_params = {}) {
    LlmRequest request;
    request.model = deps.model;
    request.messages = bundle.messages;
    request.temperature = bundle.temperature;
    request.max_tokens = bundle.max_tokens;
    request.extra_params = extra_params;
    return deps.backend.complete(request);
}

ParsedAnswer parse_candidate(const PipelineDeps& deps, const QueryRecord& record,
                             const std::string& text) {
    return parse_answer(text, record.task, deps.templates.markers_for(record.language.code));
}

std::string extract_summary(const std::string& raw) {
    std::string lower = text::to_lower_ascii(raw);
    size_t begin = 0;
    size_t s = lower.find("summary:");
    if (s != std::string::npos) begin = s + std::string_view("summary:").size();
    size_t end = lower.find("conclusion", begin);
    size_t count = (end == std::string::npos ? raw.size() : end) - begin;
    return text::trim(std::string_view(raw).substr(begin, count));
}

uint64_t record_seed(const PipelineDeps& deps, const QueryRecord& record) {
    return deps.seed ^ text::fnv1a64(record.id);
}

std::string percent_encode(const std::string& s) {
    static const char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

std::string require_credential(const std::string& env_name) {
    if (env_name.empty()) return "";
    const char* value = std::getenv(env_name.c_str());
    if (!value || !*value) {
        throw ConfigError("environment variable " + env_name + " is not set");
    }
    return value;
}

double parse_double_param(const MethodSpec& method, const std::string& key, double fallback) {
    std::string raw = method.param(key);
    if (raw.empty()) return fallback;
    return std::stod(raw);
}

int parse_int_param(const MethodSpec& method, const std::string& key, int fallback) {
    std::string raw = method.param(key);
    if (raw.empty()) return fallback;
    return std::stoi(raw);
}

}  // namespace

std::string prediction_to_json(const PredictionRecord& prediction) {
    ordered_json doc;
    doc["id"] = prediction.id;
    doc["dataset"] = prediction.dataset;
    doc["language"] = prediction.language;
    doc["method"] = prediction.method;
    doc["task"] = to_string(prediction.task);
    doc["final_text"] = prediction.final_text;
    doc["parsed"] = parsed_to_json(prediction.parsed);
    ordered_json stages = ordered_json::array();
    for (const auto& stage : prediction.stages) {
        stages.push_back(ordered_json{{"stage", stage.stage},
                                      {"text", stage.text},
                                      {"prompt_tokens", stage.usage.prompt_tokens},
                                      {"completion_tokens", stage.usage.completion_tokens}});
    }
    doc["stages"] = std::move(stages);
    doc["usage"] = ordered_json{{"prompt_tokens", prediction.usage.prompt_tokens},
                                {"completion_tokens", prediction.usage.completion_tokens}};
    if (prediction.correct.has_value()) {
        doc["correct"] = *prediction.correct;
    } else {
        doc["correct"] = nullptr;
    }
    if (prediction.score.has_value()) {
        doc["score"] = *prediction.score;
    } else {
        doc["score"] = nullptr;
    }
    doc["flags"] = prediction.flags;
    doc["chosen_index"] = prediction.chosen_index;
    doc["judge_summary"] = prediction.judge_summary;
    return doc.dump();
}

PredictionRecord prediction_from_json(const std::string& line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid prediction JSON: ") + e.what());
    }
    PredictionRecord p;
    p.id = doc.at("id").get<std::string>();
    p.dataset = doc.at("dataset").get<std::string>();
    p.language = doc.at("language").get<std::string>();
    p.method = doc.at("method").get<std::string>();
    p.task = parse_task_kind(doc.at("task").get<std::string>());
    p.final_text = doc.at("final_text").get<std::string>();
    p.parsed = parsed_from_json(doc.at("parsed"));
    for (const auto& s : doc.at("stages")) {
        StageResponse stage;
        stage.stage = s.at("stage").get<std::string>();
        stage.text = s.at("text").get<std::string>();
        stage.usage.prompt_tokens = s.at("prompt_tokens").get<int64_t>();
        stage.usage.completion_tokens = s.at("completion_tokens").get<int64_t>();
        p.stages.push_back(std::move(stage));
    }
    p.usage.prompt_tokens = doc.at("usage").at("prompt_tokens").get<int64_t>();
    p.usage.completion_tokens = doc.at("usage").at("completion_tokens").get<int64_t>();
    if (!doc.at("correct").is_null()) p.correct = doc.at("correct").get<bool>();
    if (!doc.at("score").is_null()) p.score = doc.at("score").get<double>();
    for (const auto& f : doc.at("flags")) p.flags.push_back(f.get<std::string>());
    p.chosen_index = doc.at("chosen_index").get<int>();
    p.judge_summary = doc.at("judge_summary").get<std::string>();
    return p;
}

FixtureRetriever FixtureRetriever::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open retrieval fixture: " + path.string());
    FixtureRetriever retriever;
    std::string raw_line;
    int line = 0;
    while (std::getline(in, raw_line)) {
        ++line;
        if (text::is_blank(raw_line)) continue;
        json doc;
        try {
            doc = json::parse(raw_line);
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": invalid JSON: " + e.what(), line);
        }
        if (!doc.contains("query") || !doc.contains("passage")) {
            throw DataError("retrieval fixture line needs query and passage", line);
        }
        retriever.add(doc["query"].get<std::string>(), doc["passage"].get<std::string>());
    }
    return retriever;
}

std::vector<std::string> FixtureRetriever::search(const std::string& query) {
    auto it = passages_.find(query);
    if (it == passages_.end()) return {};
    return {it->second};
}

void FixtureRetriever::add(std::string query, std::string passage) {
    passages_[std::move(query)] = std::move(passage);
}

HttpRetriever::HttpRetriever(std::string base_url, std::string credential_env,
                             int timeout_seconds)
    : base_url_(std::move(base_url)),
      credential_(require_credential(credential_env)),
      timeout_seconds_(timeout_seconds) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
    if (base_url_.empty()) throw ConfigError("retriever base_url must be non-empty");
}

std::vector<std::string> HttpRetriever::search(const std::string& query) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);
    auto result = client.Get("/search?q=" + percent_encode(query), headers);
    if (!result) throw TransportError("retriever request failed", ConditionClass::timeout);
    if (result->status < 200 || result->status >= 300) {
        throw TransportError("retriever returned status " + std::to_string(result->status),
                             result->status >= 500 ? ConditionClass::server_error
                                                   : ConditionClass::other);
    }
    json doc;
    try {
        doc = json::parse(result->body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("retriever response is not JSON: ") + e.what());
    }
    const json& list = doc.is_object() && doc.contains("passages") ? doc["passages"] : doc;
    if (!list.is_array()) throw ProtocolError("retriever response lacks a passage list");
    std::vector<std::string> passages;
    for (const auto& p : list) {
        if (p.is_string()) passages.push_back(p.get<std::string>());
    }
    return passages;
}

FixtureTranslator FixtureTranslator::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open translation fixture: " + path.string());
    FixtureTranslator translator;
    std::string raw_line;
    int line = 0;
    while (std::getline(in, raw_line)) {
        ++line;
        if (text::is_blank(raw_line)) continue;
        json doc;
        try {
            doc = json::parse(raw_line);
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": invalid JSON: " + e.what(), line);
        }
        for (const char* key : {"text", "source", "target", "translation"}) {
            if (!doc.contains(key)) {
                throw DataError(std::string("translation fixture line needs ") + key, line);
            }
        }
        translator.add(doc["text"].get<std::string>(), doc["source"].get<std::string>(),
                       doc["target"].get<std::string>(), doc["translation"].get<std::string>());
    }
    return translator;
}

namespace {
std::string translation_key(const std::string& source, const std::string& target,
                            const std::string& text) {
    return source + '\x1f' + target + '\x1f' + text;
}
}  // namespace

std::string FixtureTranslator::translate(const std::string& text, const std::string& source,
                                         const std::string& target) {
    auto it = table_.find(translation_key(source, target, text));
    if (it == table_.end()) {
        throw DataError("no translation fixture entry for " + source + "->" + target +
                        " text: " + text);
    }
    return it->second;
}

void FixtureTranslator::add(std::string text, std::string source, std::string target,
                            std::string translation) {
    table_[translation_key(source, target, text)] = std::move(translation);
}

HttpTranslator::HttpTranslator(std::string base_url, std::string credential_env,
                               int timeout_seconds)
    : base_url_(std::move(base_url)),
      credential_(require_credential(credential_env)),
      timeout_seconds_(timeout_seconds) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
    if (base_url_.empty()) throw ConfigError("translator base_url must be non-empty");
}

std::string HttpTranslator::translate(const std::string& text, const std::string& source,
                                      const std::string& target) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);
    json payload{{"q", text}, {"source", source}, {"target", target}};
    auto result = client.Post("/translate", headers, payload.dump(), "application/json");
    if (!result) throw TransportError("translator request failed", ConditionClass::timeout);
    if (result->status < 200 || result->status >= 300) {
        throw TransportError("translator returned status " + std::to_string(result->status),
                             result->status >= 500 ? ConditionClass::server_error
                                                   : ConditionClass::other);
    }
    json doc;
    try {
        doc = json::parse(result->body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("translator response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
        throw ProtocolError("translator response lacks a text field");
    }
    return doc["text"].get<std::string>();
}

ExtractionOutcome emcee_extract(const QueryRecord& record, const PipelineDeps& deps,
                                ExtractionMode mode) {
    ExtractionOutcome outcome;
    std::vector<std::string> render_warnings;
    PromptBundle extract_bundle =
        render_extraction(deps.templates, record, deps.exemplars, mode, &render_warnings);
    if (!render_warnings.empty()) outcome.flags.push_back("zero_shot_extraction");

    LlmResponse extract_response = complete(deps, extract_bundle);
    outcome.stages.push_back({"extract", extract_response.text, extract_response.usage});

    outcome.candidate.stage = CandidateStage::extraction;
    if (mode == ExtractionMode::single_call) {
        outcome.context = extract_response.text;
        outcome.candidate.text = extract_response.text;
        outcome.candidate.usage = extract_response.usage;
        outcome.candidate.parsed = parse_candidate(deps, record, extract_response.text);
        return outcome;
    }

    outcome.context = text::trim(extract_response.text);
    PromptBundle answer_bundle;
    std::string answer_stage = "augmented_answer";
    if (outcome.context.empty()) {
        answer_bundle = render_basic(deps.templates, record, InstructionLanguage::english);
        answer_stage = "answer";
        outcome.flags.push_back("empty_context_fallback");
    } else {
        answer_bundle = render_augmented_answer(deps.templates, record, outcome.context);
    }
    LlmResponse answer_response = complete(deps, answer_bundle);
    outcome.stages.push_back({answer_stage, answer_response.text, answer_response.usage});

    outcome.candidate.text = answer_response.text;
    outcome.candidate.usage = answer_response.usage;
    outcome.candidate.usage += extract_response.usage;
    outcome.candidate.parsed = parse_candidate(deps, record, answer_response.text);
    return outcome;
}

CandidateResponse emcee_reason(const QueryRecord& record, const PipelineDeps& deps,
                               double temperature,
                               const std::map<std::string, std::string>& extra_params) {
    PromptBundle bundle = render_cot(deps.templates, record, InstructionLanguage::english);
    bundle.temperature = temperature;
    LlmResponse response = complete(deps, bundle, extra_params);
    CandidateResponse candidate;
    candidate.stage = CandidateStage::reasoning;
    candidate.text = response.text;
    candidate.usage = response.usage;
    candidate.parsed = parse_candidate(deps, record, response.text);
    return candidate;
}

MergeOutcome emcee_merge(const QueryRecord& record,
                         const std::vector<CandidateResponse>& candidates,
                         const PipelineDeps& deps, JudgeOrder order_policy, uint64_t seed) {
    if (candidates.size() < 2) {
        throw InvalidArgument("merge needs at least two candidates");
    }
    std::vector<std::string> texts;
    for (const auto& c : candidates) {
        if (text::is_blank(c.text)) {
            throw InvalidArgument("merge candidates must have non-empty text");
        }
        texts.push_back(c.text);
    }

    JudgeBundle judge = render_judge(deps.templates, record, texts, order_policy, seed);
    LlmResponse response = complete(deps, judge.bundle);

    MergeOutcome outcome;
    outcome.stage = {"judge", response.text, response.usage};
    outcome.verdict.raw_text = response.text;
    outcome.verdict.summary = extract_summary(response.text);
    outcome.verdict.final = scan_answer_region(response.text, record.task,
                                               deps.templates.markers_for(record.language.code));
    outcome.verdict.chosen_index = -1;
    if (outcome.verdict.final.ok()) {
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (candidates[i].parsed == outcome.verdict.final) {
                outcome.verdict.chosen_index = static_cast<int>(i);
                break;
            }
        }
    }
    return outcome;
}

RouteOutcome emcee_route(const QueryRecord& record, const PipelineDeps& deps) {
    PromptBundle bundle = render_route(deps.templates, record);
    LlmResponse response = complete(deps, bundle);

    RouteOutcome outcome;
    outcome.stage = {"route", response.text, response.usage};
    std::string token = text::to_lower_ascii(text::trim(response.text));
    if (token == "path: extract") {
        outcome.path = RoutePath::extract_path;
    } else if (token == "path: reason") {
        outcome.path = RoutePath::reason_path;
    } else {
        outcome.path = RoutePath::reason_path;
        outcome.defaulted = true;
    }
    return outcome;
}

namespace {

void finish_prediction(PredictionRecord& prediction, const QueryRecord& record) {
    for (const auto& stage : prediction.stages) prediction.usage += stage.usage;
    RecordScore scored = score_record(prediction.parsed, record);
    prediction.correct = scored.correct;
    prediction.score = scored.score;
}

void run_single_bundle(PredictionRecord& prediction, const QueryRecord& record,
                       const PipelineDeps& deps, const PromptBundle& bundle,
                       const std::string& stage_name) {
    LlmResponse response = complete(deps, bundle);
    prediction.stages.push_back({stage_name, response.text, response.usage});
    prediction.final_text = response.text;
    prediction.parsed = parse_candidate(deps, record, response.text);
}

void run_emcee(PredictionRecord& prediction, const QueryRecord& record,
               const PipelineDeps& deps, const MethodSpec& method) {
    ExtractionMode mode = parse_extraction_mode(method.param("extraction_mode", "two_call"));
    JudgeOrder order = parse_judge_order(method.param("judge_order", "fixed"));
    double reason_temperature = parse_double_param(method, "reason_temperature", 0.0);

    ExtractionOutcome extraction = emcee_extract(record, deps, mode);
    prediction.stages = extraction.stages;
    prediction.flags = extraction.flags;

    CandidateResponse reasoning = emcee_reason(record, deps, reason_temperature);
    prediction.stages.push_back({"reason", reasoning.text, reasoning.usage});

    std::vector<CandidateResponse> candidates{extraction.candidate, reasoning};
    MergeOutcome merge =
        emcee_merge(record, candidates, deps, order, record_seed(deps, record));
    prediction.stages.push_back(merge.stage);
    prediction.judge_summary = merge.verdict.summary;
    prediction.chosen_index = merge.verdict.chosen_index;

    if (merge.verdict.final.ok()) {
        prediction.final_text = merge.verdict.raw_text;
        prediction.parsed = merge.verdict.final;
    } else {
        prediction.final_text = reasoning.text;
        prediction.parsed = reasoning.parsed;
        prediction.flags.push_back("merge_parse_fallback");
    }
}

void run_route(PredictionRecord& prediction, const QueryRecord& record,
               const PipelineDeps& deps, const MethodSpec& method) {
    ExtractionMode mode = parse_extraction_mode(method.param("extraction_mode", "two_call"));

    RouteOutcome route = emcee_route(record, deps);
    prediction.stages.push_back(route.stage);
    if (route.defaulted) prediction.flags.push_back("route_default");

    if (route.path == RoutePath::extract_path) {
        ExtractionOutcome extraction = emcee_extract(record, deps, mode);
        for (auto& stage : extraction.stages) prediction.stages.push_back(std::move(stage));
        for (auto& flag : extraction.flags) prediction.flags.push_back(std::move(flag));
        prediction.final_text = extraction.candidate.text;
        prediction.parsed = extraction.candidate.parsed;
    } else {
        CandidateResponse reasoning = emcee_reason(record, deps);
        prediction.stages.push_back({"reason", reasoning.text, reasoning.usage});
        prediction.final_text = reasoning.text;
        prediction.parsed = reasoning.parsed;
    }
}

void run_self_consistency(PredictionRecord& prediction, const QueryRecord& record,
                          const PipelineDeps& deps, const MethodSpec& method) {
    int k = parse_int_param(method, "sc_samples", 3);
    if (k < 2) throw InvalidArgument("self-consistency needs at least two samples");
    double temperature = parse_double_param(method, "sc_temperature", 0.7);
    JudgeOrder order = parse_judge_order(method.param("judge_order", "fixed"));

    std::vector<CandidateResponse> candidates;
    candidates.push_back(emcee_reason(record, deps));
    prediction.stages.push_back({"reason", candidates[0].text, candidates[0].usage});
    for (int i = 1; i < k; ++i) {
        CandidateResponse sampled =
            emcee_reason(record, deps, temperature, {{"sample_index", std::to_string(i)}});
        prediction.stages.push_back({"reason", sampled.text, sampled.usage});
        candidates.push_back(std::move(sampled));
    }

    MergeOutcome merge =
        emcee_merge(record, candidates, deps, order, record_seed(deps, record));
    prediction.stages.push_back(merge.stage);
    prediction.judge_summary = merge.verdict.summary;
    prediction.chosen_index = merge.verdict.chosen_index;

    if (merge.verdict.final.ok()) {
        prediction.final_text = merge.verdict.raw_text;
        prediction.parsed = merge.verdict.final;
    } else {
        prediction.final_text = candidates[0].text;
        prediction.parsed = candidates[0].parsed;
        prediction.flags.push_back("merge_parse_fallback");
    }
}

void run_rag(PredictionRecord& prediction, const QueryRecord& record, const PipelineDeps& deps,
             const MethodSpec& method, InstructionLanguage lang) {
    if (!deps.retriever) {
        throw ConfigError("method " + method.name + " requires a retriever");
    }
    size_t word_limit =
        static_cast<size_t>(parse_int_param(method, "passage_word_limit", 100));
    size_t char_limit =
        static_cast<size_t>(parse_int_param(method, "passage_char_limit", 100));

    std::string passage;
    try {
        std::vector<std::string> passages = deps.retriever->search(record.question);
        if (passages.empty()) {
            prediction.flags.push_back("retrieval_miss");
        } else {
            passage = record.language.segmentation == Segmentation::per_character
                          ? text::truncate_characters(passages.front(), char_limit)
                          : text::truncate_words(passages.front(), word_limit);
            if (text::is_blank(passage)) prediction.flags.push_back("retrieval_miss");
        }
    } catch (const TransportError&) {
        prediction.flags.push_back("retrieval_error");
    } catch (const ProtocolError&) {
        prediction.flags.push_back("retrieval_error");
    }

    if (!text::is_blank(passage)) {
        prediction.stages.push_back({"retrieve", passage, Usage{0, 0}});
    }
    PromptBundle bundle = render_rag(deps.templates, record, passage, lang);
    run_single_bundle(prediction, record, deps, bundle, "answer");
}

void run_translate(PredictionRecord& prediction, const QueryRecord& record,
                   const PipelineDeps& deps, const MethodSpec& method) {
    if (!deps.translator) {
        throw ConfigError("method " + method.name + " requires a translator");
    }
    QueryRecord translated = record;
    translated.meta.clear();
    translated.question =
        deps.translator->translate(record.question, record.language.code, "en");
    if (text::is_blank(translated.question)) {
        throw DataError("empty translation for record " + record.id);
    }
    for (auto& option : translated.options) {
        option.body = deps.translator->translate(option.body, record.language.code, "en");
        if (text::is_blank(option.body)) {
            throw DataError("empty option translation for record " + record.id);
        }
    }

    std::string audit = translated.question;
    for (const auto& option : translated.options) {
        audit += '\n' + option.label + ". " + option.body;
    }
    prediction.stages.push_back({"translate", audit, Usage{0, 0}});

    PromptBundle bundle = render_basic(deps.templates, translated, InstructionLanguage::english);
    run_single_bundle(prediction, record, deps, bundle, "answer");
}

void dispatch(PredictionRecord& prediction, const QueryRecord& record,
              const MethodSpec& method, const PipelineDeps& deps) {
    switch (method.kind) {
        case MethodKind::native_basic:
            run_single_bundle(prediction, record, deps,
                              render_basic(deps.templates, record, InstructionLanguage::native),
                              "answer");
            return;
        case MethodKind::eng_basic:
            run_single_bundle(prediction, record, deps,
                              render_basic(deps.templates, record, InstructionLanguage::english),
                              "answer");
            return;
        case MethodKind::native_cot:
            run_single_bundle(prediction, record, deps,
                              render_cot(deps.templates, record, InstructionLanguage::native),
                              "reason");
            return;
        case MethodKind::eng_cot:
            run_single_bundle(prediction, record, deps,
                              render_cot(deps.templates, record, InstructionLanguage::english),
                              "reason");
            return;
        case MethodKind::xlt:
            run_single_bundle(prediction, record, deps, render_xlt(deps.templates, record),
                              "answer");
            return;
        case MethodKind::adaptive:
            run_single_bundle(prediction, record, deps, render_adaptive(deps.templates, record),
                              "adapt");
            return;
        case MethodKind::trans:
            run_translate(prediction, record, deps, method);
            return;
        case MethodKind::rag_native:
            run_rag(prediction, record, deps, method, InstructionLanguage::native);
            return;
        case MethodKind::rag_eng:
            run_rag(prediction, record, deps, method, InstructionLanguage::english);
            return;
        case MethodKind::emcee:
            run_emcee(prediction, record, deps, method);
            return;
        case MethodKind::emcee_route:
            run_route(prediction, record, deps, method);
            return;
        case MethodKind::self_consistency_merge:
            run_self_consistency(prediction, record, deps, method);
            return;
    }
    throw InvalidArgument("unhandled method kind");
}

}  // namespace

PredictionRecord run_method(const QueryRecord& record, const MethodSpec& method,
                            const PipelineDeps& deps) {
    PredictionRecord prediction;
    prediction.id = record.id;
    prediction.dataset = record.dataset;
    prediction.language = record.language.code;
    prediction.method = method.name.empty() ? to_string(method.kind) : method.name;
    prediction.task = record.task;

    try {
        dispatch(prediction, record, method, deps);
    } catch (const TransportError& e) {
        throw TransportError("record " + record.id + ": " + e.what(), e.condition);
    } catch (const ProtocolError& e) {
        throw ProtocolError("record " + record.id + ": " + e.what());
    }

    finish_prediction(prediction, record);
    return prediction;
}

}  // namespace emcee
