#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "emcee/backend.hpp"
#include "emcee/cost.hpp"
#include "emcee/eval.hpp"
#include "emcee/model.hpp"
#include "emcee/prompts.hpp"

namespace py = pybind11;

namespace {

emcee::QueryRecord record_from_dict(const py::dict& d) {
    emcee::QueryRecord record;
    record.id = d.contains("id") ? d["id"].cast<std::string>() : "py";
    record.language = emcee::normalize_language_tag(d["language"].cast<std::string>());
    record.task = emcee::parse_task_kind(d["task"].cast<std::string>());
    record.question = d["question"].cast<std::string>();
    if (d.contains("options")) {
        for (const auto& item : d["options"].cast<py::list>()) {
            auto pair = item.cast<std::pair<std::string, std::string>>();
            record.options.push_back({pair.first, pair.second});
        }
    }
    if (d.contains("gold_label")) record.gold.label = d["gold_label"].cast<std::string>();
    if (d.contains("gold_texts")) {
        record.gold.texts = d["gold_texts"].cast<std::vector<std::string>>();
    }
    if (d.contains("meta")) {
        for (const auto& item : d["meta"].cast<py::dict>()) {
            record.meta[item.first.cast<std::string>()] = item.second.cast<std::string>();
        }
    }
    return record;
}

py::dict parsed_to_dict(const emcee::ParsedAnswer& parsed) {
    py::dict out;
    switch (parsed.kind) {
        case emcee::AnswerKind::option_label: out["kind"] = "option_label"; break;
        case emcee::AnswerKind::free_text: out["kind"] = "free_text"; break;
        case emcee::AnswerKind::failure: out["kind"] = "failure"; break;
    }
    out["value"] = parsed.value;
    out["failure_reason"] = parsed.failure_reason;
    return out;
}

py::list messages_to_list(const std::vector<emcee::Message>& messages) {
    py::list out;
    for (const auto& m : messages) {
        py::dict entry;
        entry["role"] = m.role;
        entry["content"] = m.content;
        out.append(entry);
    }
    return out;
}

std::vector<emcee::Message> messages_from_list(const py::list& messages) {
    std::vector<emcee::Message> out;
    for (const auto& item : messages) {
        py::dict d = item.cast<py::dict>();
        out.push_back({d["role"].cast<std::string>(), d["content"].cast<std::string>()});
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(emcee_eval, m) {
    m.doc() = "multilingual prompting pipeline: rendering, parsing, and metrics";

    m.def(
        "parse_answer",
        [](const std::string& text, const std::string& task,
           const std::vector<std::string>& markers) {
            return parsed_to_dict(
                emcee::parse_answer(text, emcee::parse_task_kind(task), markers));
        },
        py::arg("text"), py::arg("task"),
        py::arg("markers") = std::vector<std::string>{"Answer"});

    m.def(
        "scan_verdict",
        [](const std::string& text, const std::string& task,
           const std::vector<std::string>& markers) {
            return parsed_to_dict(
                emcee::scan_answer_region(text, emcee::parse_task_kind(task), markers));
        },
        py::arg("text"), py::arg("task"),
        py::arg("markers") = std::vector<std::string>{"Answer"});

    m.def(
        "normalize_answer_text",
        [](const std::string& text, const std::string& language) {
            return emcee::normalize_answer_text(text, emcee::normalize_language_tag(language));
        },
        py::arg("text"), py::arg("language") = "en");

    m.def("span_f1", &emcee::span_f1, py::arg("pred_tokens"), py::arg("gold_variants"));

    m.def(
        "split_resources",
        [](const std::map<std::string, double>& scores, const std::string& strategy) {
            emcee::ResourceSplit split =
                emcee::split_resources(scores, emcee::parse_split_strategy(strategy));
            py::dict out;
            for (const auto& [code, cls] : split.assignment) {
                out[py::str(code)] = cls == emcee::ResourceClass::high ? "high" : "low";
            }
            return out;
        },
        py::arg("scores"), py::arg("strategy") = "threshold_mean");

    m.def("round_half_up", &emcee::round_half_up, py::arg("value"), py::arg("decimals"));
    m.def("format_fixed", &emcee::format_fixed, py::arg("value"), py::arg("decimals"));

    m.def(
        "render_basic",
        [](const py::dict& record, bool english) {
            emcee::TemplateSet templates = emcee::TemplateSet::builtin();
            emcee::PromptBundle bundle = emcee::render_basic(
                templates, record_from_dict(record),
                english ? emcee::InstructionLanguage::english
                        : emcee::InstructionLanguage::native);
            return messages_to_list(bundle.messages);
        },
        py::arg("record"), py::arg("english") = true);

    m.def(
        "render_cot",
        [](const py::dict& record, bool english) {
            emcee::TemplateSet templates = emcee::TemplateSet::builtin();
            emcee::PromptBundle bundle = emcee::render_cot(
                templates, record_from_dict(record),
                english ? emcee::InstructionLanguage::english
                        : emcee::InstructionLanguage::native);
            return messages_to_list(bundle.messages);
        },
        py::arg("record"), py::arg("english") = true);

    m.def(
        "render_xlt",
        [](const py::dict& record) {
            emcee::TemplateSet templates = emcee::TemplateSet::builtin();
            return messages_to_list(
                emcee::render_xlt(templates, record_from_dict(record)).messages);
        },
        py::arg("record"));

    m.def(
        "cache_key",
        [](const std::string& model, const py::list& messages, double temperature,
           const std::string& backend_id) {
            emcee::LlmRequest request;
            request.model = model;
            request.messages = messages_from_list(messages);
            request.temperature = temperature;
            return emcee::cache_key(request, backend_id);
        },
        py::arg("model"), py::arg("messages"), py::arg("temperature") = 0.0,
        py::arg("backend_id") = "mock");

    m.def(
        "mock_reply",
        [](const std::string& script_path, const std::string& model, const py::list& messages) {
            emcee::MockScript script = emcee::MockScript::load(script_path);
            emcee::LlmRequest request;
            request.model = model;
            request.messages = messages_from_list(messages);
            emcee::LlmResponse response = emcee::mock_complete(request, script);
            py::dict out;
            out["text"] = response.text;
            out["prompt_tokens"] = response.usage.prompt_tokens;
            out["completion_tokens"] = response.usage.completion_tokens;
            return out;
        },
        py::arg("script_path"), py::arg("model"), py::arg("messages"));

    m.def(
        "price_tokens",
        [](int64_t input_tokens, int64_t output_tokens, double input_rate,
           double output_rate) {
            emcee::PricingTable table;
            table.models["m"] = {input_rate, output_rate};
            emcee::UsageTotals usage;
            usage.input_tokens = input_tokens;
            usage.output_tokens = output_tokens;
            return *emcee::price_run(usage, table, "m");
        },
        py::arg("input_tokens"), py::arg("output_tokens"), py::arg("input_rate"),
        py::arg("output_rate"));
}
