#include "emcee/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>

#include "emcee/errors.hpp"
#include "emcee/text.hpp"

namespace emcee {

ParsedAnswer ParsedAnswer::option(std::string label) {
    ParsedAnswer p;
    p.kind = AnswerKind::option_label;
    p.value = std::move(label);
    return p;
}

ParsedAnswer ParsedAnswer::text(std::string value) {
    ParsedAnswer p;
    p.kind = AnswerKind::free_text;
    p.value = std::move(value);
    return p;
}

ParsedAnswer ParsedAnswer::failed(std::string reason) {
    ParsedAnswer p;
    p.kind = AnswerKind::failure;
    p.failure_reason = std::move(reason);
    return p;
}

namespace {

bool ascii_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool equals_ci(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

// Window following the last "Marker:" occurrence (word-bounded, optional spaces
// before the colon), up to the end of that line. npos start when absent.
struct MarkerWindow {
    size_t begin = std::string_view::npos;
    size_t end = 0;
    bool found() const { return begin != std::string_view::npos; }
};

MarkerWindow find_last_marker_window(std::string_view text,
                                     const std::vector<std::string>& markers) {
    MarkerWindow best;
    size_t best_marker_pos = 0;
    for (const std::string& raw : markers) {
        std::string marker = text::trim(raw);
        while (!marker.empty() && (marker.back() == ':' || marker.back() == ' ')) marker.pop_back();
        if (marker.empty()) continue;
        for (size_t pos = 0; pos + marker.size() <= text.size(); ++pos) {
            if (!equals_ci(text.substr(pos, marker.size()), marker)) continue;
            if (pos > 0 && ascii_alnum(text[pos - 1])) continue;
            size_t j = pos + marker.size();
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
            size_t after_colon;
            if (j < text.size() && text[j] == ':') {
                after_colon = j + 1;
            } else if (j + 3 <= text.size() && text.substr(j, 3) == "\xEF\xBC\x9A") {
                after_colon = j + 3;  // fullwidth colon
            } else {
                continue;
            }
            if (!best.found() || pos > best_marker_pos) {
                best_marker_pos = pos;
                best.begin = after_colon;
                size_t eol = text.find('\n', after_colon);
                best.end = eol == std::string_view::npos ? text.size() : eol;
            }
        }
    }
    return best;
}

// A single letter with non-alphanumeric neighbors: "B", "(B)", "option B", "B.".
std::string first_standalone_letter(std::string_view window, bool uppercase_only) {
    for (size_t i = 0; i < window.size(); ++i) {
        char c = window[i];
        if (!std::isalpha(static_cast<unsigned char>(c))) continue;
        if (uppercase_only && !std::isupper(static_cast<unsigned char>(c))) continue;
        bool left_ok = i == 0 || !ascii_alnum(window[i - 1]);
        bool right_ok = i + 1 == window.size() || !ascii_alnum(window[i + 1]);
        if (left_ok && right_ok) {
            return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    return {};
}

std::string first_standalone_choice_digit(std::string_view window) {
    for (size_t i = 0; i < window.size(); ++i) {
        char c = window[i];
        if (c != '1' && c != '2') continue;
        bool left_ok = i == 0 || !ascii_alnum(window[i - 1]);
        bool right_ok = i + 1 == window.size() || !ascii_alnum(window[i + 1]);
        if (left_ok && right_ok) return std::string(1, c);
    }
    // "choice1" / "choice2" spelled without a separator
    std::string lower = text::to_lower_ascii(window);
    size_t pos = lower.rfind("choice1");
    size_t pos2 = lower.rfind("choice2");
    if (pos != std::string::npos && (pos2 == std::string::npos || pos > pos2)) return "1";
    if (pos2 != std::string::npos) return "2";
    return {};
}

std::string first_nli_word(std::string_view window) {
    static const char* words[] = {"yes", "no", "maybe"};
    static const char* canon[] = {"Yes", "No", "Maybe"};
    size_t best = std::string_view::npos;
    std::string result;
    for (int w = 0; w < 3; ++w) {
        std::string_view word = words[w];
        for (size_t i = 0; i + word.size() <= window.size(); ++i) {
            if (!equals_ci(window.substr(i, word.size()), word)) continue;
            bool left_ok = i == 0 || !ascii_alnum(window[i - 1]);
            bool right_ok = i + word.size() == window.size() || !ascii_alnum(window[i + word.size()]);
            if (left_ok && right_ok) {
                if (i < best) {
                    best = i;
                    result = canon[w];
                }
                break;
            }
        }
    }
    return result;
}

// Canonicalizes a candidate token against the task's answer pattern; empty when
// the token does not fit.
std::string canonicalize_token(std::string_view token, TaskKind task) {
    switch (task) {
        case TaskKind::mcqa:
            if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0]))) {
                return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(token[0]))));
            }
            return {};
        case TaskKind::copa:
            if (token == "1" || token == "2") return std::string(token);
            return {};
        case TaskKind::nli:
            if (equals_ci(token, "yes")) return "Yes";
            if (equals_ci(token, "no")) return "No";
            if (equals_ci(token, "maybe")) return "Maybe";
            return {};
        case TaskKind::open_qa:
            return {};
    }
    return {};
}

std::string match_task_pattern(std::string_view window, TaskKind task) {
    switch (task) {
        case TaskKind::mcqa: return first_standalone_letter(window, false);
        case TaskKind::copa: return first_standalone_choice_digit(window);
        case TaskKind::nli: return first_nli_word(window);
        case TaskKind::open_qa: return text::trim(window);
    }
    return {};
}

// Last "option X ... more plausible" statement in the region; empty when none.
std::string scan_more_plausible(std::string_view region, TaskKind task) {
    static const std::regex re(
        R"(\boption[^A-Za-z0-9\r\n]{1,4}([A-Za-z0-9]{1,8})[^\r\n]{0,80}?\bmore\s+plausible)",
        std::regex::icase);
    std::string s(region);
    std::string found;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
        std::string canon = canonicalize_token((*it)[1].str(), task);
        if (!canon.empty()) found = canon;
    }
    return found;
}

// Last explicit "option X" mention anywhere in the region (mcqa only).
std::string scan_option_mention(std::string_view region, TaskKind task) {
    if (task != TaskKind::mcqa) return {};
    static const std::regex re(R"(\boption[^A-Za-z0-9\r\n]{1,4}([A-Za-z0-9]{1,8}))",
                               std::regex::icase);
    std::string s(region);
    std::string found;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
        std::string canon = canonicalize_token((*it)[1].str(), task);
        if (!canon.empty()) found = canon;
    }
    return found;
}

// Final alphanumeric run of the text, if it fits the task pattern. Uppercase
// required for mcqa so trailing articles ("a") never read as option A.
std::string trailing_standalone(std::string_view region, TaskKind task) {
    size_t end = region.size();
    while (end > 0 && !ascii_alnum(region[end - 1])) --end;
    if (end == 0) return {};
    size_t start = end;
    while (start > 0 && ascii_alnum(region[start - 1])) --start;
    std::string_view token = region.substr(start, end - start);
    if (task == TaskKind::mcqa && token.size() == 1 &&
        !std::isupper(static_cast<unsigned char>(token[0]))) {
        return {};
    }
    return canonicalize_token(token, task);
}

// Last `n` codepoints of the text (UTF-8 safe).
std::string_view utf8_tail(std::string_view s, size_t n) {
    size_t count = 0;
    size_t i = s.size();
    while (i > 0 && count < n) {
        --i;
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++count;
    }
    return s.substr(i);
}

}  // namespace

ParsedAnswer parse_answer(std::string_view text_in, TaskKind task,
                          const std::vector<std::string>& markers) {
    MarkerWindow window = find_last_marker_window(text_in, markers);
    if (window.found()) {
        std::string match =
            match_task_pattern(text_in.substr(window.begin, window.end - window.begin), task);
        if (!match.empty()) {
            return task == TaskKind::open_qa ? ParsedAnswer::text(match)
                                             : ParsedAnswer::option(match);
        }
        return ParsedAnswer::failed("answer marker present but no parseable answer followed");
    }

    if (task == TaskKind::open_qa) {
        return ParsedAnswer::failed("no answer marker found");
    }
    std::string_view tail = utf8_tail(text_in, 200);
    std::string match = scan_more_plausible(tail, task);
    if (match.empty()) match = trailing_standalone(tail, task);
    if (!match.empty()) return ParsedAnswer::option(match);
    return ParsedAnswer::failed("no answer marker or trailing answer pattern found");
}

ParsedAnswer scan_answer_region(std::string_view text_in, TaskKind task,
                                const std::vector<std::string>& markers) {
    auto scan = [&](std::string_view region) -> std::string {
        MarkerWindow window = find_last_marker_window(region, markers);
        if (window.found()) {
            std::string match =
                match_task_pattern(region.substr(window.begin, window.end - window.begin), task);
            if (!match.empty()) return match;
        }
        if (task == TaskKind::open_qa) return {};
        std::string match = scan_more_plausible(region, task);
        if (match.empty()) match = scan_option_mention(region, task);
        if (match.empty()) match = trailing_standalone(region, task);
        return match;
    };

    std::string_view region = text_in;
    MarkerWindow conclusion = find_last_marker_window(text_in, {"Conclusion"});
    if (conclusion.found()) region = text_in.substr(conclusion.begin);

    std::string match = scan(region);
    if (match.empty() && region.size() != text_in.size()) match = scan(text_in);
    if (match.empty()) {
        return ParsedAnswer::failed("no answer found in verdict text");
    }
    return task == TaskKind::open_qa ? ParsedAnswer::text(match) : ParsedAnswer::option(match);
}

std::vector<std::string> normalize_answer_text(std::string_view text_in,
                                               const LanguageTag& language) {
    std::string folded = text::nfkc_casefold(text_in);
    std::string stripped;
    stripped.reserve(folded.size());
    for (uint32_t cp : text::decode_utf8(folded)) {
        if (text::is_punct(cp)) {
            stripped += ' ';
        } else {
            stripped += text::encode_utf8(cp);
        }
    }
    if (language.segmentation == Segmentation::per_character) {
        std::vector<std::string> tokens;
        for (uint32_t cp : text::decode_utf8(stripped)) {
            if (!text::is_space(cp)) tokens.push_back(text::encode_utf8(cp));
        }
        return tokens;
    }
    return text::split_whitespace(stripped);
}

double span_f1(const std::vector<std::string>& pred_tokens,
               const std::vector<std::vector<std::string>>& gold_variants) {
    std::map<std::string, int> pred_counts;
    for (const auto& t : pred_tokens) ++pred_counts[t];

    double best = 0.0;
    for (const auto& gold : gold_variants) {
        if (pred_tokens.empty() || gold.empty()) continue;
        std::map<std::string, int> gold_counts;
        for (const auto& t : gold) ++gold_counts[t];
        long overlap = 0;
        for (const auto& [token, count] : gold_counts) {
            auto it = pred_counts.find(token);
            if (it != pred_counts.end()) overlap += std::min(count, it->second);
        }
        if (overlap == 0) continue;
        double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
        double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

RecordScore score_record(const ParsedAnswer& parsed, const QueryRecord& record) {
    RecordScore result;
    if (record.task == TaskKind::open_qa) {
        if (parsed.kind != AnswerKind::free_text) {
            result.score = 0.0;
            return result;
        }
        std::vector<std::vector<std::string>> golds;
        golds.reserve(record.gold.texts.size());
        for (const auto& g : record.gold.texts) {
            golds.push_back(normalize_answer_text(g, record.language));
        }
        result.score = span_f1(normalize_answer_text(parsed.value, record.language), golds);
        return result;
    }
    bool correct = parsed.kind == AnswerKind::option_label && parsed.value == record.gold.label;
    result.correct = correct;
    result.score = correct ? 1.0 : 0.0;
    return result;
}

SplitStrategy parse_split_strategy(std::string_view s) {
    if (s == "threshold_mean") return SplitStrategy::threshold_mean;
    if (s == "median_split") return SplitStrategy::median_split;
    throw InvalidArgument("unknown split strategy: " + std::string(s));
}

const char* to_string(SplitStrategy s) {
    return s == SplitStrategy::threshold_mean ? "threshold_mean" : "median_split";
}

ResourceSplit split_resources(const std::map<std::string, double>& per_language_scores,
                              SplitStrategy strategy) {
    if (per_language_scores.empty()) {
        throw InvalidArgument("split_resources requires at least one language score");
    }
    ResourceSplit split;
    split.strategy = strategy;
    if (strategy == SplitStrategy::threshold_mean) {
        double sum = 0.0;
        for (const auto& [code, score] : per_language_scores) sum += score;
        split.threshold = sum / static_cast<double>(per_language_scores.size());
        for (const auto& [code, score] : per_language_scores) {
            split.assignment[code] =
                score > split.threshold ? ResourceClass::high : ResourceClass::low;
        }
        return split;
    }
    std::vector<std::pair<std::string, double>> ordered(per_language_scores.begin(),
                                                        per_language_scores.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    size_t high_count = (ordered.size() + 1) / 2;
    for (size_t i = 0; i < ordered.size(); ++i) {
        split.assignment[ordered[i].first] =
            i < high_count ? ResourceClass::high : ResourceClass::low;
    }
    return split;
}

MetricReport aggregate(const std::string& method, const std::string& dataset,
                       const std::vector<ScoredEntry>& entries, const ResourceSplit& split) {
    MetricReport report;
    report.method = method;
    report.dataset = dataset;

    std::map<std::string, std::pair<double, int>> sums;  // language → (sum, n)
    for (const auto& entry : entries) {
        if (!split.assignment.count(entry.language)) {
            throw InvalidArgument("language '" + entry.language + "' missing from resource split");
        }
        auto& [sum, n] = sums[entry.language];
        sum += entry.score;
        ++n;
        if (entry.parse_failure) ++report.parse_failures;
        if (entry.fallback) ++report.fallbacks;
    }

    double all_sum = 0.0, high_sum = 0.0, low_sum = 0.0;
    int high_n = 0, low_n = 0;
    for (const auto& [code, acc] : sums) {
        double mean = 100.0 * acc.first / static_cast<double>(acc.second);
        report.per_language[code] = {mean, acc.second};
        all_sum += mean;
        if (split.assignment.at(code) == ResourceClass::high) {
            high_sum += mean;
            ++high_n;
        } else {
            low_sum += mean;
            ++low_n;
        }
    }
    if (!sums.empty()) all_sum /= static_cast<double>(sums.size());
    report.all = all_sum;
    if (high_n > 0) report.high = high_sum / high_n;
    if (low_n > 0) report.low = low_sum / low_n;
    return report;
}

namespace {

std::optional<double> relative(std::optional<double> x, std::optional<double> b) {
    if (!x || !b || *b == 0.0) return std::nullopt;
    return 100.0 * (*x - *b) / *b;
}

}  // namespace

Improvement relative_improvement(const MetricReport& report, const MetricReport& baseline) {
    Improvement imp;
    if (baseline.all != 0.0) imp.all = 100.0 * (report.all - baseline.all) / baseline.all;
    imp.high = relative(report.high, baseline.high);
    imp.low = relative(report.low, baseline.low);
    return imp;
}

Improvement mean_improvement(const std::vector<Improvement>& per_dataset) {
    double sums[3] = {0, 0, 0};
    int counts[3] = {0, 0, 0};
    for (const auto& imp : per_dataset) {
        const std::optional<double>* parts[3] = {&imp.all, &imp.high, &imp.low};
        for (int i = 0; i < 3; ++i) {
            if (*parts[i]) {
                sums[i] += **parts[i];
                ++counts[i];
            }
        }
    }
    Improvement mean;
    if (counts[0]) mean.all = sums[0] / counts[0];
    if (counts[1]) mean.high = sums[1] / counts[1];
    if (counts[2]) mean.low = sums[2] / counts[2];
    return mean;
}

double round_half_up(double value, int decimals) {
    double scale = std::pow(10.0, decimals);
    double scaled = std::abs(value) * scale;
    double rounded = std::floor(scaled + 0.5);
    return std::copysign(rounded / scale, value);
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, round_half_up(value, decimals));
    std::string out(buf);
    if (out == "-0" || out.rfind("-0.", 0) == 0) {
        bool nonzero = out.find_first_of("123456789") != std::string::npos;
        if (!nonzero) out.erase(0, 1);
    }
    return out;
}

}  // namespace emcee
