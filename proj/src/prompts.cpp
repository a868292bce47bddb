#include "emcee/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "emcee/errors.hpp"
#include "emcee/text.hpp"

namespace emcee {

using json = nlohmann::ordered_json;

const char* to_string(Stage s) {
    switch (s) {
        case Stage::answer: return "answer";
        case Stage::extract: return "extract";
        case Stage::augmented_answer: return "augmented_answer";
        case Stage::reason: return "reason";
        case Stage::judge: return "judge";
        case Stage::route: return "route";
        case Stage::adapt: return "adapt";
    }
    return "answer";
}

ExtractionMode parse_extraction_mode(std::string_view s) {
    if (s == "two_call") return ExtractionMode::two_call;
    if (s == "single_call") return ExtractionMode::single_call;
    throw ConfigError("unknown extraction mode: " + std::string(s));
}

JudgeOrder parse_judge_order(std::string_view s) {
    if (s == "fixed") return JudgeOrder::fixed;
    if (s == "swap") return JudgeOrder::swap;
    if (s == "seeded_random") return JudgeOrder::seeded_random;
    throw ConfigError("unknown judge order: " + std::string(s));
}

namespace {

TaskTemplates english_mcqa() {
    TaskTemplates t;
    t.instruction = "The following is a multiple-choice question.";
    t.format_line =
        "You should provide the final answer at the end in the format: 'Answer: [option]'.";
    t.cot_line =
        "Let's think step-by-step in English, and provide the final answer at the end in the "
        "format: 'Answer: [option]'";
    return t;
}

TaskTemplates english_open_qa() {
    TaskTemplates t;
    t.instruction = "Answer the question in one or a few words in English:";
    t.format_line = "You should provide the final answer at the end in the format: 'Answer: '";
    t.cot_line =
        "Let's think step-by-step in English, and provide the final answer at the end in the "
        "format: 'Answer: '";
    return t;
}

TaskTemplates english_nli() {
    TaskTemplates t;
    t.scaffold = "{premise}\nBased on the previous passage, is it true that {hypothesis}?";
    t.format_line = "Answer should be in the format of \"Answer: [Yes or No or Maybe]\".";
    t.cot_line =
        "Let's think step-by-step in English, and provide the final answer at the end in the "
        "format: 'Answer: [Yes or No or Maybe]'";
    return t;
}

TaskTemplates english_copa() {
    TaskTemplates t;
    t.scaffold =
        "Here is a premise: {premise}.\n"
        "What is the {question_word}?\n"
        "Help me pick the more plausible option:\n"
        "-choice1: {choice1}, -choice2: {choice2}\n"
        "You should only choose one option for your answer.";
    t.format_line = "You should answer the question in the format of 'Answer: [1 or 2]'";
    t.cot_line =
        "Let's think step-by-step in English, and provide the final answer at the end in the "
        "format: 'Answer: [1 or 2]'";
    return t;
}

TaskTemplates javanese_mcqa() {
    TaskTemplates t;
    t.instruction = "Ing ngisor iki minangka pitakon pilihan ganda.";
    t.format_line =
        "Sampeyan kudu nyedhiyakake jawaban pungkasan ing pungkasan nganggo format: "
        "'Wangsulan: [pilihan]'.";
    t.cot_line =
        "Ayo mikir kanthi bertahap nganggo basa Jawa, lan weneh jawaban pungkasan ing pungkasan "
        "kanthi format: 'Jawaban: [pilihan]'";
    return t;
}

constexpr const char* kXltTemplate =
    "I want you to act as an question answering expert for {language}.\n"
    "Request: {request}\n"
    "You should retell the request in English.\n"
    "You should do step-by-step answer to obtain an option.\n"
    "You should step-by-step answer the request.\n"
    "You should tell me the answer in this format `Answer : [{answer_slot}]'.";

constexpr const char* kJudgeTemplate =
    "You are an impartial judge. {user_count} users have each answered the same question. "
    "Compare their responses, paying close attention to linguistic nuance, cultural context, "
    "and subject-specific reasoning, and decide which final answer is the most appropriate.\n"
    "\n"
    "Question:\n"
    "{question_block}\n"
    "\n"
    "{candidate_blocks}"
    "First write 'Summary:' followed by a brief summary of each user's argument. Then write "
    "'Conclusion:' followed by the reasoning for your decision. {format_line}";

constexpr const char* kRouteTemplate =
    "You are deciding how to answer a question written in {language}. There are two pathways:\n"
    "PATH: EXTRACT - first gather background knowledge about the language, culture, or local "
    "context, then answer using it.\n"
    "PATH: REASON - answer directly with step-by-step reasoning in English.\n"
    "Choose EXTRACT when answering depends on local language, customs, or cultural context; "
    "choose REASON when general knowledge and reasoning suffice.\n"
    "\n"
    "Question:\n"
    "{question_block}\n"
    "\n"
    "Based on the language characteristics of the query alone, reply with exactly one line: "
    "PATH: EXTRACT or PATH: REASON";

constexpr const char* kAdaptiveSystemPrompt =
    "Whenever you decide that a cultural/contextual note is required, output exactly:\n"
    "Explanation: <your explanation here>\n"
    "Otherwise, output exactly:\n"
    "Explanation: None\n"
    "Do not include any other words, headings, or punctuation.";

constexpr const char* kExtractionTemplate =
    "You are a multilingual expert assistant with deep knowledge of local languages, cultures, "
    "and customs.\n"
    "Read the question and provide the background knowledge needed to answer it, typically "
    "within 3-5 sentences.\n"
    "Explain any language-specific terms, cultural references, or context a non-native speaker "
    "would need. Do not give the final answer yet.\n"
    "\n"
    "{exemplar_blocks}"
    "Question:\n"
    "{question_block}\n"
    "\n"
    "Background knowledge:";

constexpr const char* kExtractionSingleCallTemplate =
    "You are a multilingual expert assistant with deep knowledge of local languages, cultures, "
    "and customs.\n"
    "Read the question and first provide the background knowledge needed to answer it, "
    "typically within 3-5 sentences.\n"
    "Explain any language-specific terms, cultural references, or context a non-native speaker "
    "would need. Then use that knowledge to answer the question. {format_line}\n"
    "\n"
    "{exemplar_blocks}"
    "Question:\n"
    "{question_block}\n"
    "\n"
    "Background knowledge:";

const char* task_key(TaskKind task) { return to_string(task); }

TaskTemplates merge_task_templates(TaskTemplates base, const json& doc) {
    if (doc.contains("instruction")) base.instruction = doc["instruction"];
    if (doc.contains("scaffold")) base.scaffold = doc["scaffold"];
    if (doc.contains("format_line")) base.format_line = doc["format_line"];
    if (doc.contains("cot_line")) base.cot_line = doc["cot_line"];
    return base;
}

std::string options_block(const std::vector<Option>& options) {
    std::string out;
    for (const auto& o : options) {
        if (!out.empty()) out += '\n';
        out += o.label + ". " + o.body;
    }
    return out;
}

std::string question_block(const QueryRecord& record) {
    std::string out = record.question;
    std::string opts = options_block(record.options);
    if (!opts.empty()) {
        out += '\n';
        out += opts;
    }
    return out;
}

std::string join_nonempty(std::initializer_list<std::string> parts) {
    std::string out;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        if (!out.empty()) out += '\n';
        out += p;
    }
    return out;
}

// nli/copa question text: prefer the localized scaffold over the ingested
// composition when the record still carries its raw pieces.
std::string task_body(const TaskTemplates& t, const QueryRecord& record) {
    if (!t.scaffold.empty()) {
        std::vector<const char*> needed;
        if (record.task == TaskKind::nli) {
            needed = {"premise", "hypothesis"};
        } else if (record.task == TaskKind::copa) {
            needed = {"premise", "question_word", "choice1", "choice2"};
        }
        if (!needed.empty()) {
            bool complete = std::all_of(needed.begin(), needed.end(), [&](const char* key) {
                return record.meta.count(key) > 0;
            });
            if (complete) {
                std::string body = t.scaffold;
                for (const char* key : needed) {
                    body = text::replace_all(std::move(body), "{" + std::string(key) + "}",
                                             record.meta.at(key));
                }
                return body;
            }
        }
    }
    if (record.task == TaskKind::mcqa) return question_block(record);
    return record.question;
}

const char* xlt_answer_slot(TaskKind task) {
    switch (task) {
        case TaskKind::mcqa: return "option";
        case TaskKind::copa: return "1 or 2";
        case TaskKind::nli: return "Yes or No or Maybe";
        case TaskKind::open_qa: return "answer";
    }
    return "option";
}

PromptBundle user_bundle(std::string content, Stage stage) {
    PromptBundle bundle;
    bundle.messages.push_back({"user", std::move(content)});
    bundle.stage = stage;
    return bundle;
}

}  // namespace

TemplateSet TemplateSet::builtin() {
    TemplateSet set;
    LanguageTemplates english;
    english.tasks[TaskKind::mcqa] = english_mcqa();
    english.tasks[TaskKind::open_qa] = english_open_qa();
    english.tasks[TaskKind::nli] = english_nli();
    english.tasks[TaskKind::copa] = english_copa();
    english.answer_markers = {"Answer"};
    set.languages_["en"] = std::move(english);

    LanguageTemplates javanese;
    javanese.tasks[TaskKind::mcqa] = javanese_mcqa();
    javanese.answer_markers = {"Wangsulan", "Jawaban"};
    set.languages_["jv"] = std::move(javanese);

    set.xlt_template_ = kXltTemplate;
    set.judge_template_ = kJudgeTemplate;
    set.route_template_ = kRouteTemplate;
    set.adaptive_system_prompt_ = kAdaptiveSystemPrompt;
    set.extraction_template_ = kExtractionTemplate;
    set.extraction_single_call_template_ = kExtractionSingleCallTemplate;
    set.validate();
    set.recompute_digest();
    return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template set: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("invalid template set " + path.string() + ": " + e.what());
    }

    TemplateSet set = builtin();
    if (doc.contains("xlt_template")) set.xlt_template_ = doc["xlt_template"];
    if (doc.contains("judge_template")) set.judge_template_ = doc["judge_template"];
    if (doc.contains("route_template")) set.route_template_ = doc["route_template"];
    if (doc.contains("adaptive_system_prompt"))
        set.adaptive_system_prompt_ = doc["adaptive_system_prompt"];
    if (doc.contains("extraction_template")) set.extraction_template_ = doc["extraction_template"];
    if (doc.contains("extraction_single_call_template"))
        set.extraction_single_call_template_ = doc["extraction_single_call_template"];

    const json languages_doc = doc.value("languages", json::object());
    for (const auto& [code, lang_doc] : languages_doc.items()) {
        LanguageTemplates& lang = set.languages_[code];
        if (lang_doc.contains("answer_markers")) {
            lang.answer_markers.clear();
            for (const auto& m : lang_doc["answer_markers"]) {
                lang.answer_markers.push_back(m.get<std::string>());
            }
        }
        const json tasks_doc = lang_doc.value("tasks", json::object());
        for (const auto& [task_name, task_doc] : tasks_doc.items()) {
            TaskKind task = parse_task_kind(task_name);
            TaskTemplates base;
            if (auto it = lang.tasks.find(task); it != lang.tasks.end()) base = it->second;
            lang.tasks[task] = merge_task_templates(std::move(base), task_doc);
        }
    }
    set.validate();
    set.recompute_digest();
    return set;
}

void TemplateSet::validate() const {
    auto en = languages_.find("en");
    if (en == languages_.end()) throw ConfigError("template set must define English entries");
    for (TaskKind task :
         {TaskKind::mcqa, TaskKind::open_qa, TaskKind::nli, TaskKind::copa}) {
        auto it = en->second.tasks.find(task);
        if (it == en->second.tasks.end() || it->second.format_line.empty() ||
            it->second.cot_line.empty()) {
            throw ConfigError(std::string("template set is missing English templates for task ") +
                              task_key(task));
        }
    }
    if (en->second.answer_markers.empty()) {
        throw ConfigError("template set must define an English answer marker");
    }
    if (xlt_template_.empty() || judge_template_.empty() || route_template_.empty() ||
        adaptive_system_prompt_.empty() || extraction_template_.empty() ||
        extraction_single_call_template_.empty()) {
        throw ConfigError("template set is missing a pipeline template");
    }
}

void TemplateSet::recompute_digest() {
    json doc;
    json langs = json::object();
    for (const auto& [code, lang] : languages_) {
        json tasks = json::object();
        for (const auto& [task, t] : lang.tasks) {
            tasks[task_key(task)] = {{"instruction", t.instruction},
                                     {"scaffold", t.scaffold},
                                     {"format_line", t.format_line},
                                     {"cot_line", t.cot_line}};
        }
        langs[code] = {{"tasks", tasks}, {"answer_markers", lang.answer_markers}};
    }
    doc["languages"] = langs;
    doc["xlt_template"] = xlt_template_;
    doc["judge_template"] = judge_template_;
    doc["route_template"] = route_template_;
    doc["adaptive_system_prompt"] = adaptive_system_prompt_;
    doc["extraction_template"] = extraction_template_;
    doc["extraction_single_call_template"] = extraction_single_call_template_;
    content_digest_ = text::sha256_hex(doc.dump());
}

const TaskTemplates& TemplateSet::task_templates(const std::string& language_code,
                                                 TaskKind task) const {
    auto lang = languages_.find(language_code);
    if (lang == languages_.end()) {
        throw ConfigError("no localized templates for language '" + language_code + "'");
    }
    auto it = lang->second.tasks.find(task);
    if (it == lang->second.tasks.end()) {
        throw ConfigError("no localized " + std::string(task_key(task)) +
                          " templates for language '" + language_code + "'");
    }
    return it->second;
}

bool TemplateSet::has_task_templates(const std::string& language_code, TaskKind task) const {
    auto lang = languages_.find(language_code);
    if (lang == languages_.end()) return false;
    return lang->second.tasks.count(task) > 0;
}

std::vector<std::string> TemplateSet::markers_for(const std::string& language_code) const {
    std::vector<std::string> markers;
    if (auto lang = languages_.find(language_code); lang != languages_.end()) {
        markers = lang->second.answer_markers;
    }
    for (const auto& m : languages_.at("en").answer_markers) {
        if (std::find(markers.begin(), markers.end(), m) == markers.end()) markers.push_back(m);
    }
    return markers;
}

void TemplateSet::require_coverage(const std::vector<LanguageTag>& languages, TaskKind task,
                                   const std::vector<MethodSpec>& methods) const {
    bool needs_basic = false;
    bool needs_cot = false;
    for (const auto& method : methods) {
        if (method.kind == MethodKind::native_basic || method.kind == MethodKind::rag_native) {
            needs_basic = true;
        }
        if (method.kind == MethodKind::native_cot) needs_cot = true;
    }
    if (!needs_basic && !needs_cot) return;
    for (const auto& lang : languages) {
        if (!has_task_templates(lang.code, task)) {
            throw ConfigError("no localized " + std::string(task_key(task)) +
                              " templates for language '" + lang.code +
                              "' required by a native-instruction method");
        }
        const TaskTemplates& t = task_templates(lang.code, task);
        if (needs_basic && t.format_line.empty()) {
            throw ConfigError("language '" + lang.code + "' is missing a localized " +
                              task_key(task) + " format line");
        }
        if (needs_cot && t.cot_line.empty()) {
            throw ConfigError("language '" + lang.code + "' is missing a localized " +
                              task_key(task) + " step-by-step line");
        }
    }
}

PromptBundle render_basic(const TemplateSet& set, const QueryRecord& record,
                          InstructionLanguage lang) {
    const TaskTemplates& t = set.task_templates(
        lang == InstructionLanguage::native ? record.language.code : "en", record.task);
    return user_bundle(join_nonempty({t.instruction, task_body(t, record), t.format_line}),
                       Stage::answer);
}

PromptBundle render_cot(const TemplateSet& set, const QueryRecord& record,
                        InstructionLanguage lang) {
    const TaskTemplates& t = set.task_templates(
        lang == InstructionLanguage::native ? record.language.code : "en", record.task);
    return user_bundle(join_nonempty({t.instruction, task_body(t, record), t.cot_line}),
                       Stage::reason);
}

PromptBundle render_xlt(const TemplateSet& set, const QueryRecord& record) {
    std::string content = set.xlt_template();
    content = text::replace_all(std::move(content), "{language}",
                                record.language.display_name.empty()
                                    ? record.language.code
                                    : record.language.display_name);
    content = text::replace_all(std::move(content), "{request}", question_block(record));
    content = text::replace_all(std::move(content), "{answer_slot}",
                                xlt_answer_slot(record.task));
    return user_bundle(std::move(content), Stage::answer);
}

PromptBundle render_extraction(const TemplateSet& set, const QueryRecord& record,
                               const std::vector<Exemplar>& exemplars, ExtractionMode mode,
                               std::vector<std::string>* warnings) {
    if (exemplars.empty() && warnings != nullptr) {
        warnings->push_back("no exemplars loaded; extraction runs zero-shot");
    }
    const TaskTemplates& english = set.task_templates("en", record.task);

    std::string blocks;
    for (const auto& ex : exemplars) {
        std::string q = ex.question;
        std::string opts = options_block(ex.options);
        if (!opts.empty()) q += '\n' + opts;
        blocks += "Question:\n" + q + "\n\nBackground knowledge: " + ex.explanation + "\n";
        if (mode == ExtractionMode::single_call && !ex.answer_label.empty()) {
            blocks += "Answer: " + ex.answer_label + "\n";
        }
        blocks += "\n";
    }

    std::string content = mode == ExtractionMode::two_call
                              ? set.extraction_template()
                              : set.extraction_single_call_template();
    content = text::replace_all(std::move(content), "{exemplar_blocks}", blocks);
    content = text::replace_all(std::move(content), "{question_block}", question_block(record));
    content = text::replace_all(std::move(content), "{format_line}", english.format_line);
    return user_bundle(std::move(content), Stage::extract);
}

PromptBundle render_augmented_answer(const TemplateSet& set, const QueryRecord& record,
                                     const std::string& context) {
    if (text::is_blank(context)) {
        throw InvalidArgument("augmented answer requires non-empty context");
    }
    const TaskTemplates& english = set.task_templates("en", record.task);
    std::string content = "Background:\n" + text::trim(context) + "\n\n" +
                          question_block(record) + "\n" + english.format_line;
    return user_bundle(std::move(content), Stage::augmented_answer);
}

JudgeBundle render_judge(const TemplateSet& set, const QueryRecord& record,
                         const std::vector<std::string>& candidates, JudgeOrder order_policy,
                         uint64_t seed) {
    if (candidates.size() < 2) {
        throw InvalidArgument("judge requires at least 2 candidate responses");
    }
    std::vector<size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    if (order_policy == JudgeOrder::swap) {
        std::reverse(order.begin(), order.end());
    } else if (order_policy == JudgeOrder::seeded_random) {
        text::SplitMix64 rng(seed);
        for (size_t i = order.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(rng.bounded(i + 1));
            std::swap(order[i], order[j]);
        }
    }

    std::string blocks;
    for (size_t k = 0; k < order.size(); ++k) {
        blocks += "User" + std::to_string(k + 1) + ": " + candidates[order[k]] + "\n\n";
    }
    const TaskTemplates& english = set.task_templates("en", record.task);
    std::string content = set.judge_template();
    content = text::replace_all(std::move(content), "{user_count}",
                                std::to_string(candidates.size()));
    content = text::replace_all(std::move(content), "{question_block}", question_block(record));
    content = text::replace_all(std::move(content), "{candidate_blocks}", blocks);
    content = text::replace_all(std::move(content), "{format_line}", english.format_line);

    JudgeBundle result;
    result.bundle = user_bundle(std::move(content), Stage::judge);
    result.order = std::move(order);
    return result;
}

PromptBundle render_route(const TemplateSet& set, const QueryRecord& record) {
    std::string content = set.route_template();
    content = text::replace_all(std::move(content), "{language}",
                                record.language.display_name.empty()
                                    ? record.language.code
                                    : record.language.display_name);
    content = text::replace_all(std::move(content), "{question_block}", question_block(record));
    return user_bundle(std::move(content), Stage::route);
}

PromptBundle render_adaptive(const TemplateSet& set, const QueryRecord& record) {
    PromptBundle cot = render_cot(set, record, InstructionLanguage::english);
    PromptBundle bundle;
    bundle.messages.push_back({"system", set.adaptive_system_prompt()});
    bundle.messages.push_back({"user", cot.messages.front().content});
    bundle.stage = Stage::adapt;
    return bundle;
}

PromptBundle render_rag(const TemplateSet& set, const QueryRecord& record,
                        const std::string& passage, InstructionLanguage lang,
                        std::vector<std::string>* warnings) {
    if (text::is_blank(passage)) {
        if (warnings != nullptr) {
            warnings->push_back("empty passage for record " + record.id +
                                "; falling back to the basic prompt");
        }
        return render_basic(set, record, lang);
    }
    const TaskTemplates& t = set.task_templates(
        lang == InstructionLanguage::native ? record.language.code : "en", record.task);
    std::string reference = "Reference:\n" + text::trim(passage);
    return user_bundle(
        join_nonempty({t.instruction, reference, task_body(t, record), t.format_line}),
        Stage::answer);
}

}  // namespace emcee
