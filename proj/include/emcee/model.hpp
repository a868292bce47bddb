#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace emcee {

enum class Segmentation { whitespace, per_character };

struct LanguageTag {
    std::string code;          // lowercase, ≤ 12 chars
    std::string display_name;  // "Javanese", "Swahili", ...; falls back to the code
    Segmentation segmentation = Segmentation::whitespace;

    bool operator==(const LanguageTag& o) const { return code == o.code; }
    bool operator<(const LanguageTag& o) const { return code < o.code; }
};

enum class TaskKind { mcqa, open_qa, nli, copa };

const char* to_string(TaskKind t);
TaskKind parse_task_kind(std::string_view s);

struct Option {
    std::string label;
    std::string body;
};

// Either an option label (mcqa/copa/nli) or free-text answers with aliases (open_qa).
struct GoldAnswer {
    std::string label;
    std::vector<std::string> texts;
};

struct QueryRecord {
    std::string id;
    std::string dataset;
    LanguageTag language;
    TaskKind task = TaskKind::mcqa;
    std::string question;
    std::vector<Option> options;  // empty for open_qa
    GoldAnswer gold;
    std::string category;  // empty when absent
    std::map<std::string, std::string> meta;
};

struct Exemplar {
    std::string question;
    std::vector<Option> options;
    std::string category;
    std::string explanation;
    std::string answer_label;
};

enum class MethodKind {
    native_basic,
    eng_basic,
    native_cot,
    eng_cot,
    xlt,
    trans,
    rag_native,
    rag_eng,
    emcee,
    emcee_route,
    adaptive,
    self_consistency_merge,
};

const char* to_string(MethodKind k);
MethodKind parse_method_kind(std::string_view s);

struct MethodSpec {
    MethodKind kind = MethodKind::eng_basic;
    std::string name;  // report/file identity; defaults to the kind string
    std::map<std::string, std::string> params;

    std::string param(const std::string& key, const std::string& fallback = "") const;
};

// Builds a spec and validates params against the kind (extraction_mode values,
// sc_samples ≥ 2, numeric temperatures, known keys only). Throws ConfigError.
MethodSpec make_method_spec(std::string_view kind_name,
                            const std::map<std::string, std::string>& params = {},
                            std::string_view instance_name = "");

struct ValidationIssue {
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string describe() const;  // "field: message; field: message"
};

// Checks every record invariant; total function, never throws.
ValidationReport validate_record(const QueryRecord& record);

// Lowercases/trims the code and assigns segmentation from the built-in table
// (zh/ja/th per character), with config overrides taking precedence.
// Throws InvalidArgument on empty input or a code longer than 12 chars.
LanguageTag normalize_language_tag(std::string_view raw,
                                   const std::map<std::string, Segmentation>& overrides = {});

// Built-in display names for the evaluated languages; unknown codes echo back.
std::string language_display_name(std::string_view code);

Segmentation parse_segmentation(std::string_view s);

}  // namespace emcee
