#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emcee/model.hpp"

namespace emcee {

enum class AnswerKind { option_label, free_text, failure };

struct ParsedAnswer {
    AnswerKind kind = AnswerKind::failure;
    std::string value;           // option label or free text
    std::string failure_reason;  // set only when kind == failure

    bool ok() const { return kind != AnswerKind::failure; }

    static ParsedAnswer option(std::string label);
    static ParsedAnswer text(std::string value);
    static ParsedAnswer failed(std::string reason);

    bool operator==(const ParsedAnswer& o) const {
        return kind == o.kind && value == o.value;
    }
};

// Scans for the LAST marker occurrence ("Answer:", "Wangsulan:", ... each given
// without the colon) and matches the task's pattern in the rest of that line.
// With no marker, falls back to scanning the final 200 characters. Never throws;
// unparseable text yields a failure value.
ParsedAnswer parse_answer(std::string_view text, TaskKind task,
                          const std::vector<std::string>& markers);

// Wider scan used on judge verdicts: the whole region after "Conclusion:" is
// searched (marker, "option X ... more plausible", last explicit option mention,
// trailing standalone token), falling back to the whole text.
ParsedAnswer scan_answer_region(std::string_view text, TaskKind task,
                                const std::vector<std::string>& markers);

// NFKC casefold, strip punctuation, collapse whitespace, then split by the
// language's segmentation (whitespace words, or one token per codepoint).
std::vector<std::string> normalize_answer_text(std::string_view text,
                                               const LanguageTag& language);

// Token-multiset F1 against each gold variant; returns the max. 0 when either
// side is empty or nothing overlaps.
double span_f1(const std::vector<std::string>& pred_tokens,
               const std::vector<std::vector<std::string>>& gold_variants);

struct RecordScore {
    std::optional<bool> correct;  // label tasks
    double score = 0.0;           // [0,1]: 0/1 accuracy, or span F1 for open_qa
};

// Parse failures score 0 (counted incorrect), never dropped.
RecordScore score_record(const ParsedAnswer& parsed, const QueryRecord& record);

enum class SplitStrategy { threshold_mean, median_split };
enum class ResourceClass { high, low };

SplitStrategy parse_split_strategy(std::string_view s);
const char* to_string(SplitStrategy s);

struct ResourceSplit {
    SplitStrategy strategy = SplitStrategy::threshold_mean;
    double threshold = 0.0;  // meaningful for threshold_mean
    std::map<std::string, ResourceClass> assignment;
};

// Scores are the Native-Basic per-language means. threshold_mean: above the
// mean is high, ties low. median_split: sort descending (ties by code), top
// half rounded up is high.
ResourceSplit split_resources(const std::map<std::string, double>& per_language_scores,
                              SplitStrategy strategy);

struct ScoredEntry {
    std::string language;  // code
    double score = 0.0;    // [0,1]
    bool parse_failure = false;
    bool fallback = false;
};

struct LanguageScore {
    double score = 0.0;  // percent
    int n = 0;
};

struct MetricReport {
    std::string method;
    std::string dataset;
    std::map<std::string, LanguageScore> per_language;  // percent scores
    double all = 0.0;
    std::optional<double> high;
    std::optional<double> low;
    int parse_failures = 0;
    int fallbacks = 0;
};

// Per-language mean × 100, then unweighted means across languages (all) and
// across each split class. Throws InvalidArgument when an entry's language is
// missing from the split.
MetricReport aggregate(const std::string& method, const std::string& dataset,
                       const std::vector<ScoredEntry>& entries,
                       const ResourceSplit& split);

struct Improvement {
    std::optional<double> all;  // percent, 100·(x−b)/b; absent when b = 0
    std::optional<double> high;
    std::optional<double> low;
};

Improvement relative_improvement(const MetricReport& report, const MetricReport& baseline);

// Unweighted mean across datasets, skipping absent components.
Improvement mean_improvement(const std::vector<Improvement>& per_dataset);

// Half-up rounding applied only at report emission; internals keep full precision.
double round_half_up(double value, int decimals);
std::string format_fixed(double value, int decimals);

}  // namespace emcee
