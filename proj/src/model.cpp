#include "emcee/model.hpp"

#include <algorithm>
#include <set>

#include "emcee/errors.hpp"
#include "emcee/eval.hpp"
#include "emcee/text.hpp"

namespace emcee {

const char* to_string(TaskKind t) {
    switch (t) {
        case TaskKind::mcqa: return "mcqa";
        case TaskKind::open_qa: return "open_qa";
        case TaskKind::nli: return "nli";
        case TaskKind::copa: return "copa";
    }
    return "mcqa";
}

TaskKind parse_task_kind(std::string_view s) {
    if (s == "mcqa") return TaskKind::mcqa;
    if (s == "open_qa") return TaskKind::open_qa;
    if (s == "nli") return TaskKind::nli;
    if (s == "copa") return TaskKind::copa;
    throw InvalidArgument("unknown task kind: " + std::string(s));
}

const char* to_string(MethodKind k) {
    switch (k) {
        case MethodKind::native_basic: return "native_basic";
        case MethodKind::eng_basic: return "eng_basic";
        case MethodKind::native_cot: return "native_cot";
        case MethodKind::eng_cot: return "eng_cot";
        case MethodKind::xlt: return "xlt";
        case MethodKind::trans: return "trans";
        case MethodKind::rag_native: return "rag_native";
        case MethodKind::rag_eng: return "rag_eng";
        case MethodKind::emcee: return "emcee";
        case MethodKind::emcee_route: return "emcee_route";
        case MethodKind::adaptive: return "adaptive";
        case MethodKind::self_consistency_merge: return "self_consistency_merge";
    }
    return "eng_basic";
}

MethodKind parse_method_kind(std::string_view s) {
    static const std::map<std::string, MethodKind, std::less<>> table = {
        {"native_basic", MethodKind::native_basic},
        {"eng_basic", MethodKind::eng_basic},
        {"native_cot", MethodKind::native_cot},
        {"eng_cot", MethodKind::eng_cot},
        {"xlt", MethodKind::xlt},
        {"trans", MethodKind::trans},
        {"rag_native", MethodKind::rag_native},
        {"rag_eng", MethodKind::rag_eng},
        {"emcee", MethodKind::emcee},
        {"emcee_route", MethodKind::emcee_route},
        {"adaptive", MethodKind::adaptive},
        {"self_consistency_merge", MethodKind::self_consistency_merge},
    };
    auto it = table.find(s);
    if (it == table.end()) throw ConfigError("unknown method kind: " + std::string(s));
    return it->second;
}

std::string MethodSpec::param(const std::string& key, const std::string& fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

namespace {

bool parse_nonneg_number(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size() && out >= 0.0;
    } catch (const std::exception&) {
        return false;
    }
}

bool parse_positive_int(const std::string& s, long& out) {
    try {
        size_t pos = 0;
        out = std::stol(s, &pos);
        return pos == s.size() && out >= 1;
    } catch (const std::exception&) {
        return false;
    }
}

void check_enum_param(const std::string& method, const std::string& key, const std::string& value,
                      std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (value == a) return;
    }
    throw ConfigError("method " + method + ": invalid value '" + value + "' for param " + key);
}

}  // namespace

MethodSpec make_method_spec(std::string_view kind_name,
                            const std::map<std::string, std::string>& params,
                            std::string_view instance_name) {
    MethodSpec spec;
    spec.kind = parse_method_kind(kind_name);
    spec.name = instance_name.empty() ? std::string(kind_name) : std::string(instance_name);
    spec.params = params;

    static const std::map<MethodKind, std::set<std::string>> allowed = {
        {MethodKind::emcee, {"extraction_mode", "judge_order", "reason_temperature"}},
        {MethodKind::emcee_route, {"extraction_mode"}},
        {MethodKind::self_consistency_merge, {"sc_samples", "sc_temperature", "judge_order"}},
        {MethodKind::rag_native, {"passage_word_limit", "passage_char_limit"}},
        {MethodKind::rag_eng, {"passage_word_limit", "passage_char_limit"}},
    };

    auto allowed_it = allowed.find(spec.kind);
    for (const auto& [key, value] : params) {
        if (allowed_it == allowed.end() || !allowed_it->second.count(key)) {
            throw ConfigError("method " + spec.name + " does not accept param " + key);
        }
        if (key == "extraction_mode") {
            check_enum_param(spec.name, key, value, {"two_call", "single_call"});
        } else if (key == "judge_order") {
            check_enum_param(spec.name, key, value, {"fixed", "swap", "seeded_random"});
        } else if (key == "reason_temperature" || key == "sc_temperature") {
            double t = 0;
            if (!parse_nonneg_number(value, t)) {
                throw ConfigError("method " + spec.name + ": param " + key +
                                  " must be a number >= 0, got '" + value + "'");
            }
        } else if (key == "sc_samples") {
            long n = 0;
            if (!parse_positive_int(value, n) || n < 2) {
                throw ConfigError("method " + spec.name + ": sc_samples must be an integer >= 2");
            }
        } else if (key == "passage_word_limit" || key == "passage_char_limit") {
            long n = 0;
            if (!parse_positive_int(value, n)) {
                throw ConfigError("method " + spec.name + ": param " + key +
                                  " must be an integer >= 1");
            }
        }
    }
    return spec;
}

std::string ValidationReport::describe() const {
    std::string out;
    for (const auto& issue : issues) {
        if (!out.empty()) out += "; ";
        out += issue.field + ": " + issue.message;
    }
    return out;
}

namespace {

bool labels_distinct(const std::vector<Option>& options) {
    std::set<std::string> seen;
    for (const auto& o : options) {
        if (!seen.insert(o.label).second) return false;
    }
    return true;
}

bool has_label(const std::vector<Option>& options, const std::string& label) {
    return std::any_of(options.begin(), options.end(),
                       [&](const Option& o) { return o.label == label; });
}

}  // namespace

ValidationReport validate_record(const QueryRecord& record) {
    ValidationReport report;
    auto add = [&](const char* field, std::string message) {
        report.issues.push_back({field, std::move(message)});
    };

    if (record.id.empty()) add("id", "must be non-empty");
    if (record.language.code.empty()) {
        add("language", "code must be non-empty");
    } else {
        if (record.language.code.size() > 12) add("language", "code must be <= 12 chars");
        if (std::any_of(record.language.code.begin(), record.language.code.end(),
                        [](unsigned char c) { return c >= 'A' && c <= 'Z'; })) {
            add("language", "code must be lowercase");
        }
    }

    switch (record.task) {
        case TaskKind::mcqa:
            if (record.options.size() < 2) add("options", "mcqa requires >= 2 options");
            if (!labels_distinct(record.options)) add("options", "labels must be distinct");
            if (!has_label(record.options, record.gold.label)) {
                add("gold", "label '" + record.gold.label + "' is not an option label");
            }
            break;
        case TaskKind::copa: {
            if (record.options.size() != 2) {
                add("options", "copa requires exactly 2 options");
            } else if (record.options[0].label != "1" || record.options[1].label != "2") {
                add("options", "copa options must be labeled \"1\",\"2\"");
            }
            if (record.gold.label != "1" && record.gold.label != "2") {
                add("gold", "label must be \"1\" or \"2\"");
            }
            break;
        }
        case TaskKind::nli: {
            std::set<std::string> labels;
            for (const auto& o : record.options) labels.insert(o.label);
            if (record.options.size() != 3 ||
                labels != std::set<std::string>{"Yes", "No", "Maybe"}) {
                add("options", "nli requires exactly 3 options labeled Yes/No/Maybe");
            }
            if (record.gold.label != "Yes" && record.gold.label != "No" &&
                record.gold.label != "Maybe") {
                add("gold", "label must be Yes, No, or Maybe");
            }
            break;
        }
        case TaskKind::open_qa: {
            if (!record.options.empty()) add("options", "open_qa must have no options");
            if (record.gold.texts.empty()) {
                add("gold", "free_text non-empty");
            } else {
                std::set<std::vector<std::string>> seen;
                for (const auto& t : record.gold.texts) {
                    auto tokens = normalize_answer_text(t, record.language);
                    if (!seen.insert(tokens).second) {
                        add("gold", "duplicate alias after normalization: '" + t + "'");
                        break;
                    }
                }
            }
            break;
        }
    }
    return report;
}

LanguageTag normalize_language_tag(std::string_view raw,
                                   const std::map<std::string, Segmentation>& overrides) {
    std::string code = text::to_lower_ascii(text::trim(raw));
    if (code.empty()) throw InvalidArgument("language tag must be non-empty");
    if (code.size() > 12) throw InvalidArgument("language tag too long: " + code);

    std::string primary = code.substr(0, code.find('-'));
    Segmentation seg = Segmentation::whitespace;
    static const std::set<std::string> per_char = {"zh", "ja", "th"};
    if (per_char.count(primary)) seg = Segmentation::per_character;
    if (auto it = overrides.find(primary); it != overrides.end()) seg = it->second;
    if (auto it = overrides.find(code); it != overrides.end()) seg = it->second;

    LanguageTag tag;
    tag.code = code;
    tag.display_name = language_display_name(code);
    tag.segmentation = seg;
    return tag;
}

std::string language_display_name(std::string_view code) {
    static const std::map<std::string, std::string, std::less<>> names = {
        {"af", "Afrikaans"}, {"ar", "Arabic"},    {"bg", "Bulgarian"},
        {"de", "German"},    {"el", "Greek"},     {"en", "English"},
        {"es", "Spanish"},
        {"et", "Estonian"},  {"fr", "French"},    {"hi", "Hindi"},
        {"ht", "Haitian Creole"}, {"id", "Indonesian"}, {"it", "Italian"},
        {"ja", "Japanese"},  {"jv", "Javanese"},  {"pt", "Portuguese"},
        {"qu", "Quechua"},   {"ru", "Russian"},   {"sw", "Swahili"},
        {"ta", "Tamil"},     {"th", "Thai"},      {"tr", "Turkish"},
        {"ur", "Urdu"},      {"vi", "Vietnamese"}, {"zh", "Chinese"},
    };
    auto it = names.find(code);
    if (it != names.end()) return it->second;
    std::string_view primary = code.substr(0, code.find('-'));
    it = names.find(primary);
    return it != names.end() ? it->second : std::string(code);
}

Segmentation parse_segmentation(std::string_view s) {
    if (s == "whitespace") return Segmentation::whitespace;
    if (s == "per_character") return Segmentation::per_character;
    throw InvalidArgument("unknown segmentation: " + std::string(s));
}

}  // namespace emcee
