#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emcee/backend.hpp"
#include "emcee/model.hpp"

namespace emcee {

enum class Stage { answer, extract, augmented_answer, reason, judge, route, adapt };
const char* to_string(Stage s);

enum class InstructionLanguage { native, english };

struct PromptBundle {
    std::vector<Message> messages;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    Stage stage = Stage::answer;
};

struct TaskTemplates {
    std::string instruction;  // leading instruction line; empty for nli/copa
    std::string scaffold;     // question scaffold with {premise}/{hypothesis}/... slots
    std::string format_line;  // answer-format line for basic prompts
    std::string cot_line;     // step-by-step line, replaces format_line in CoT prompts
};

struct LanguageTemplates {
    std::map<TaskKind, TaskTemplates> tasks;
    std::vector<std::string> answer_markers;  // "Answer", "Wangsulan", ... (no colon)
};

class TemplateSet {
public:
    // English plus the published Javanese strings, with the authored judge,
    // route, extraction, and adaptive templates.
    static TemplateSet builtin();
    // Builtin set with JSON-file overrides merged on top.
    static TemplateSet load(const std::filesystem::path& path);

    const TaskTemplates& task_templates(const std::string& language_code, TaskKind task) const;
    bool has_task_templates(const std::string& language_code, TaskKind task) const;
    // Localized markers first, English "Answer" always appended.
    std::vector<std::string> markers_for(const std::string& language_code) const;

    const std::string& xlt_template() const { return xlt_template_; }
    const std::string& judge_template() const { return judge_template_; }
    const std::string& route_template() const { return route_template_; }
    const std::string& adaptive_system_prompt() const { return adaptive_system_prompt_; }
    const std::string& extraction_template() const { return extraction_template_; }
    const std::string& extraction_single_call_template() const {
        return extraction_single_call_template_;
    }
    // SHA-256 over the canonical serialization of every template string;
    // recorded in run manifests so outputs are traceable to prompt content.
    const std::string& content_digest() const { return content_digest_; }

    // Fails fast (ConfigError naming the language) when a method needing
    // native-language instructions lacks localized templates for `task`.
    void require_coverage(const std::vector<LanguageTag>& languages, TaskKind task,
                          const std::vector<MethodSpec>& methods) const;

private:
    std::map<std::string, LanguageTemplates> languages_;
    std::string xlt_template_;
    std::string judge_template_;
    std::string route_template_;
    std::string adaptive_system_prompt_;
    std::string extraction_template_;
    std::string extraction_single_call_template_;
    std::string content_digest_;

    void validate() const;
    void recompute_digest();
};

enum class ExtractionMode { two_call, single_call };
ExtractionMode parse_extraction_mode(std::string_view s);

enum class JudgeOrder { fixed, swap, seeded_random };
JudgeOrder parse_judge_order(std::string_view s);

PromptBundle render_basic(const TemplateSet& set, const QueryRecord& record,
                          InstructionLanguage lang);
PromptBundle render_cot(const TemplateSet& set, const QueryRecord& record,
                        InstructionLanguage lang);
PromptBundle render_xlt(const TemplateSet& set, const QueryRecord& record);

// English extraction instruction with exemplar demonstrations; single_call mode
// additionally asks for the final answer in the task's format.
PromptBundle render_extraction(const TemplateSet& set, const QueryRecord& record,
                               const std::vector<Exemplar>& exemplars, ExtractionMode mode,
                               std::vector<std::string>* warnings = nullptr);

// Context block + native question + English format line. Throws InvalidArgument
// on blank context.
PromptBundle render_augmented_answer(const TemplateSet& set, const QueryRecord& record,
                                     const std::string& context);

struct JudgeBundle {
    PromptBundle bundle;
    // order[k] = index into `candidates` of the text presented as User{k+1}
    std::vector<size_t> order;
};

JudgeBundle render_judge(const TemplateSet& set, const QueryRecord& record,
                         const std::vector<std::string>& candidates, JudgeOrder order_policy,
                         uint64_t seed);

PromptBundle render_route(const TemplateSet& set, const QueryRecord& record);
PromptBundle render_adaptive(const TemplateSet& set, const QueryRecord& record);

// Basic prompt with a Reference block holding the passage; blank passage falls
// back to the plain basic prompt and records a warning.
PromptBundle render_rag(const TemplateSet& set, const QueryRecord& record,
                        const std::string& passage, InstructionLanguage lang,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace emcee
