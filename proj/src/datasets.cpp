#include "emcee/datasets.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "emcee/errors.hpp"
#include "emcee/eval.hpp"
#include "emcee/prompts.hpp"
#include "emcee/text.hpp"

namespace emcee {

using json = nlohmann::json;

namespace {

std::string json_to_string(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

std::vector<Option> parse_options(const json& doc, int line) {
    std::vector<Option> options;
    for (const auto& o : doc) {
        if (!o.is_object() || !o.contains("label") || !o.contains("body")) {
            throw DataError("option entries need label and body", line);
        }
        options.push_back({json_to_string(o["label"]), json_to_string(o["body"])});
    }
    return options;
}

std::string nli_label_from(const json& value, int line) {
    if (value.is_number_integer()) {
        switch (value.get<int>()) {
            case 0: return "Yes";    // entailment
            case 1: return "Maybe";  // neutral
            case 2: return "No";     // contradiction
        }
        throw DataError("nli label integer must be 0, 1, or 2", line);
    }
    std::string s = json_to_string(value);
    if (s == "entailment") return "Yes";
    if (s == "neutral") return "Maybe";
    if (s == "contradiction") return "No";
    return s;
}

std::string copa_label_from(const json& value, int line) {
    if (value.is_number_integer()) {
        int v = value.get<int>();
        if (v == 0) return "1";
        if (v == 1) return "2";
        throw DataError("copa label integer must be 0 or 1", line);
    }
    return json_to_string(value);
}

GoldAnswer parse_gold(const json& doc, TaskKind task, int line) {
    GoldAnswer gold;
    if (doc.is_string()) {
        gold.label = doc.get<std::string>();
        return gold;
    }
    if (!doc.is_object()) throw DataError("gold must be an object or a label string", line);
    if (doc.contains("texts")) {
        for (const auto& t : doc["texts"]) gold.texts.push_back(json_to_string(t));
        return gold;
    }
    if (!doc.contains("label")) throw DataError("gold needs a label or texts", line);
    switch (task) {
        case TaskKind::nli: gold.label = nli_label_from(doc["label"], line); break;
        case TaskKind::copa: gold.label = copa_label_from(doc["label"], line); break;
        default: gold.label = json_to_string(doc["label"]); break;
    }
    return gold;
}

std::string instantiate(std::string scaffold,
                        std::initializer_list<std::pair<const char*, const std::string*>> slots) {
    for (const auto& [key, value] : slots) {
        scaffold = text::replace_all(std::move(scaffold), "{" + std::string(key) + "}", *value);
    }
    return scaffold;
}

// Raw nli/copa fields become question/options via the English scaffolds; the
// pieces stay in meta so localized scaffolds can recompose them at render time.
void flatten_record(QueryRecord& record, const json& doc, const TemplateSet& templates,
                    int line) {
    if (record.task == TaskKind::nli && doc.contains("premise") && doc.contains("hypothesis")) {
        std::string premise = json_to_string(doc["premise"]);
        std::string hypothesis = json_to_string(doc["hypothesis"]);
        record.meta["premise"] = premise;
        record.meta["hypothesis"] = hypothesis;
        record.question = instantiate(templates.task_templates("en", TaskKind::nli).scaffold,
                                      {{"premise", &premise}, {"hypothesis", &hypothesis}});
        if (record.options.empty()) {
            record.options = {{"Yes", "Yes"}, {"No", "No"}, {"Maybe", "Maybe"}};
        }
        return;
    }
    if (record.task == TaskKind::copa && doc.contains("premise") && doc.contains("choice1") &&
        doc.contains("choice2")) {
        std::string premise = json_to_string(doc["premise"]);
        std::string choice1 = json_to_string(doc["choice1"]);
        std::string choice2 = json_to_string(doc["choice2"]);
        std::string question_word;
        if (doc.contains("question_word")) {
            question_word = json_to_string(doc["question_word"]);
        } else if (doc.contains("question")) {
            question_word = json_to_string(doc["question"]);
        } else {
            throw DataError("copa record needs a question word (cause or effect)", line);
        }
        record.meta["premise"] = premise;
        record.meta["choice1"] = choice1;
        record.meta["choice2"] = choice2;
        record.meta["question_word"] = question_word;
        record.question = instantiate(templates.task_templates("en", TaskKind::copa).scaffold,
                                      {{"premise", &premise},
                                       {"question_word", &question_word},
                                       {"choice1", &choice1},
                                       {"choice2", &choice2}});
        if (record.options.empty()) {
            record.options = {{"1", choice1}, {"2", choice2}};
        }
        return;
    }
    if (record.task == TaskKind::nli && record.options.empty()) {
        record.options = {{"Yes", "Yes"}, {"No", "No"}, {"Maybe", "Maybe"}};
    }
}

std::string normalize_entity_type(std::string_view raw) {
    std::string s = text::to_lower_ascii(text::trim(raw));
    for (char& c : s) {
        if (c == '-' || c == ' ') c = '_';
    }
    if (s == "not_answerable") s = "unanswerable";
    return s;
}

}  // namespace

std::vector<QueryRecord> load_dataset(const DatasetManifest& manifest) {
    std::ifstream in(manifest.path);
    if (!in) throw ConfigError("cannot open dataset file: " + manifest.path.string());

    std::set<std::string> wanted;
    for (const auto& lang : manifest.languages) wanted.insert(lang.code);

    TemplateSet templates = TemplateSet::builtin();
    std::vector<QueryRecord> records;
    std::set<std::string> seen_ids;
    std::string raw_line;
    int line = 0;
    while (std::getline(in, raw_line)) {
        ++line;
        if (text::is_blank(raw_line)) continue;
        json doc;
        try {
            doc = json::parse(raw_line);
        } catch (const json::exception& e) {
            throw DataError(manifest.path.string() + ": invalid JSON: " + e.what(), line);
        }
        if (!doc.is_object()) throw DataError("record line must be a JSON object", line);

        QueryRecord record;
        record.dataset = manifest.name;
        if (!doc.contains("id")) throw DataError("record is missing an id", line);
        record.id = json_to_string(doc["id"]);
        if (!doc.contains("language")) {
            throw DataError("record " + record.id + " is missing a language", line);
        }
        record.language = normalize_language_tag(json_to_string(doc["language"]),
                                                 manifest.segmentation_overrides);
        record.task = manifest.task;
        if (doc.contains("task")) {
            TaskKind declared = parse_task_kind(doc["task"].get<std::string>());
            if (declared != manifest.task) {
                throw DataError("record " + record.id + " declares task " +
                                    to_string(declared) + " but the dataset is " +
                                    to_string(manifest.task),
                                line);
            }
        }
        if (doc.contains("question")) record.question = json_to_string(doc["question"]);
        if (doc.contains("options")) record.options = parse_options(doc["options"], line);
        if (doc.contains("category")) record.category = json_to_string(doc["category"]);
        if (doc.contains("meta")) {
            for (const auto& [k, v] : doc["meta"].items()) record.meta[k] = json_to_string(v);
        }
        flatten_record(record, doc, templates, line);
        if (!doc.contains("gold")) {
            throw DataError("record " + record.id + " is missing gold", line);
        }
        record.gold = parse_gold(doc["gold"], record.task, line);

        // Keep the first spelling of aliases that collide after normalization.
        if (record.task == TaskKind::open_qa && record.gold.texts.size() > 1) {
            std::set<std::vector<std::string>> seen;
            std::vector<std::string> kept;
            for (const auto& t : record.gold.texts) {
                if (seen.insert(normalize_answer_text(t, record.language)).second) {
                    kept.push_back(t);
                }
            }
            record.gold.texts = std::move(kept);
        }

        if (!wanted.empty() && !wanted.count(record.language.code)) continue;

        if (!seen_ids.insert(record.id).second) {
            throw DataError("duplicate record id '" + record.id + "'", line);
        }
        ValidationReport report = validate_record(record);
        if (!report.ok()) {
            throw DataError("record " + record.id + " is invalid: " + report.describe(), line);
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<QueryRecord> filter_open_qa(const std::vector<QueryRecord>& records,
                                        const std::set<std::string>& excluded_entity_types) {
    std::set<std::string> excluded;
    for (const auto& e : excluded_entity_types) excluded.insert(normalize_entity_type(e));

    std::vector<QueryRecord> kept;
    kept.reserve(records.size());
    for (const auto& record : records) {
        if (record.task == TaskKind::open_qa) {
            auto it = record.meta.find("entity_type");
            if (it != record.meta.end() && excluded.count(normalize_entity_type(it->second))) {
                continue;
            }
        }
        kept.push_back(record);
    }
    return kept;
}

std::vector<QueryRecord> sample_per_language(const std::vector<QueryRecord>& records, int n,
                                             uint64_t seed) {
    if (n < 1) throw InvalidArgument("sample size must be >= 1");

    std::vector<std::string> language_order;
    std::map<std::string, std::vector<size_t>> by_language;
    for (size_t i = 0; i < records.size(); ++i) {
        const std::string& code = records[i].language.code;
        auto [it, inserted] = by_language.try_emplace(code);
        if (inserted) language_order.push_back(code);
        it->second.push_back(i);
    }

    std::vector<QueryRecord> out;
    for (const auto& code : language_order) {
        std::vector<size_t> indices = by_language[code];
        if (indices.size() > static_cast<size_t>(n)) {
            text::SplitMix64 rng(seed ^ text::fnv1a64(code));
            for (size_t i = indices.size() - 1; i > 0; --i) {
                size_t j = static_cast<size_t>(rng.bounded(i + 1));
                std::swap(indices[i], indices[j]);
            }
            indices.resize(static_cast<size_t>(n));
            std::sort(indices.begin(), indices.end());
        }
        for (size_t i : indices) out.push_back(records[i]);
    }
    return out;
}

ExemplarLoad load_exemplars(const std::filesystem::path& path, const std::string& dataset) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open exemplar file: " + path.string());

    ExemplarLoad result;
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
        Exemplar ex;
        if (!doc.contains("question") || !doc.contains("explanation")) {
            throw DataError("exemplar needs question and explanation", line);
        }
        ex.question = json_to_string(doc["question"]);
        ex.explanation = json_to_string(doc["explanation"]);
        if (text::is_blank(ex.explanation)) {
            throw DataError("exemplar explanation must be non-empty", line);
        }
        if (doc.contains("options")) ex.options = parse_options(doc["options"], line);
        if (doc.contains("category")) ex.category = json_to_string(doc["category"]);
        if (doc.contains("answer_label")) ex.answer_label = json_to_string(doc["answer_label"]);
        if (!ex.options.empty() && !ex.answer_label.empty()) {
            bool found = std::any_of(ex.options.begin(), ex.options.end(), [&](const Option& o) {
                return o.label == ex.answer_label;
            });
            if (!found) {
                throw DataError("exemplar answer label '" + ex.answer_label +
                                    "' is not among its option labels",
                                line);
            }
        }
        result.exemplars.push_back(std::move(ex));
    }

    std::string lowered = text::to_lower_ascii(dataset);
    size_t expected = lowered.find("m3") != std::string::npos ? 4 : 3;
    if (result.exemplars.size() != expected) {
        result.warnings.push_back("expected " + std::to_string(expected) + " exemplars for " +
                                  dataset + ", found " +
                                  std::to_string(result.exemplars.size()));
    }
    return result;
}

}  // namespace emcee
