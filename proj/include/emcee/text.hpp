#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace emcee::text {

// UTF-8 decoding is lossy: invalid sequences become U+FFFD.
std::vector<uint32_t> decode_utf8(std::string_view s);
std::string encode_utf8(uint32_t cp);

// ICU NFKC_Casefold: compatibility normalization + case folding in one pass.
std::string nfkc_casefold(std::string_view s);

bool is_punct(uint32_t cp);   // Unicode P* classes
bool is_space(uint32_t cp);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
bool is_blank(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// First `limit` whitespace-separated words (used for passage truncation).
std::string truncate_words(std::string_view s, size_t limit);
// First `limit` codepoints, whitespace ignored in the count.
std::string truncate_characters(std::string_view s, size_t limit);

uint64_t fnv1a64(std::string_view s);

// Deterministic 64-bit generator; the pinned source for seeded sampling.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next();
    // Uniform draw in [0, bound) via modulo; deterministic across platforms.
    uint64_t bounded(uint64_t bound) { return next() % bound; }
};

std::string sha256_hex(std::string_view data);

}  // namespace emcee::text
