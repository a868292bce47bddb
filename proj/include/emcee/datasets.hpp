#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emcee/model.hpp"

namespace emcee {

struct DatasetManifest {
    std::string name;
    TaskKind task = TaskKind::mcqa;
    std::filesystem::path path;
    std::vector<LanguageTag> languages;
    std::optional<int> sample_size;
    uint64_t seed = 0;
    std::filesystem::path exemplar_path;  // empty when the dataset ships none
    std::set<std::string> excluded_entity_types{"long_answer", "unanswerable"};
    std::map<std::string, Segmentation> segmentation_overrides;
};

// Reads canonical JSONL records: validates each one, attaches the dataset name,
// keeps file order, drops languages outside the manifest list. premise/
// hypothesis/choice fields are flattened into question/options, with the raw
// pieces preserved in record meta.
std::vector<QueryRecord> load_dataset(const DatasetManifest& manifest);

// Drops open_qa records whose normalized entity type is excluded; order kept.
std::vector<QueryRecord> filter_open_qa(const std::vector<QueryRecord>& records,
                                        const std::set<std::string>& excluded_entity_types);

// Per-language seeded draw: Fisher-Yates over a SplitMix64 generator keyed by
// seed xor fnv1a64(language code), first min(n, available) picks, kept in file
// order, grouped by language in first-appearance order.
std::vector<QueryRecord> sample_per_language(const std::vector<QueryRecord>& records, int n,
                                             uint64_t seed);

struct ExemplarLoad {
    std::vector<Exemplar> exemplars;
    std::vector<std::string> warnings;
};

// M3-Exam-style datasets are expected to ship 4 exemplars, others 3; a count
// mismatch is a warning, not an error.
ExemplarLoad load_exemplars(const std::filesystem::path& path, const std::string& dataset);

}  // namespace emcee
