#include <doctest.h>

#include "emcee/text.hpp"

using namespace emcee;

TEST_CASE("utf8 round trip") {
    std::string s = "a\xC3\xA9\xE4\xB8\xAD\xF0\x9F\x98\x80";  // a é 中 😀
    auto cps = text::decode_utf8(s);
    REQUIRE(cps.size() == 4);
    CHECK(cps[0] == 0x61);
    CHECK(cps[1] == 0xE9);
    CHECK(cps[2] == 0x4E2D);
    CHECK(cps[3] == 0x1F600);
    std::string back;
    for (uint32_t cp : cps) back += text::encode_utf8(cp);
    CHECK(back == s);
}

TEST_CASE("invalid utf8 becomes replacement char") {
    std::string s = "a\xFF\x62";
    auto cps = text::decode_utf8(s);
    REQUIRE(cps.size() == 3);
    CHECK(cps[0] == 0x61);
    CHECK(cps[1] == 0xFFFD);
    CHECK(cps[2] == 0x62);
}

TEST_CASE("nfkc casefold folds case and compatibility forms") {
    CHECK(text::nfkc_casefold("HELLO") == "hello");
    CHECK(text::nfkc_casefold("\xEF\xAC\x81re") == "fire");        // ﬁ ligature
    CHECK(text::nfkc_casefold("\xEF\xBC\xA1") == "a");             // fullwidth A
    CHECK(text::nfkc_casefold("Stra\xC3\x9F""e") == "strasse");    // ß
}

TEST_CASE("punctuation and space classes") {
    CHECK(text::is_punct('.'));
    CHECK(text::is_punct(','));
    CHECK(text::is_punct(0x3002));  // ideographic full stop
    CHECK_FALSE(text::is_punct('a'));
    CHECK(text::is_space(' '));
    CHECK(text::is_space(0x3000));  // ideographic space
    CHECK_FALSE(text::is_space('x'));
}

TEST_CASE("ascii helpers") {
    CHECK(text::to_lower_ascii("AbC Ž") == "abc Ž");
    CHECK(text::trim("  x y \n\t") == "x y");
    CHECK(text::trim("") == "");
    CHECK(text::is_blank("  \n\t "));
    CHECK_FALSE(text::is_blank(" a "));
    CHECK(text::starts_with_ci("Answer: B", "answer"));
    CHECK_FALSE(text::starts_with_ci("Ans", "answer"));
    CHECK(text::replace_all("a{x}b{x}", "{x}", "1") == "a1b1");
    CHECK(text::replace_all("aaa", "aa", "b") == "ba");
}

TEST_CASE("splitting") {
    auto words = text::split_whitespace("  one\ttwo\nthree ");
    REQUIRE(words.size() == 3);
    CHECK(words[0] == "one");
    CHECK(words[2] == "three");
    CHECK(text::split_whitespace("").empty());

    auto lines = text::split_lines("a\nb\n\nc");
    REQUIRE(lines.size() == 4);
    CHECK(lines[2] == "");
    CHECK(lines[3] == "c");
}

TEST_CASE("word truncation keeps the first n words") {
    CHECK(text::truncate_words("one two three four", 2) == "one two");
    CHECK(text::truncate_words("one two", 5) == "one two");
    CHECK(text::truncate_words("", 3) == "");
    std::string hundred_one;
    for (int i = 0; i < 101; ++i) hundred_one += "w" + std::to_string(i) + " ";
    auto cut = text::split_whitespace(text::truncate_words(hundred_one, 100));
    CHECK(cut.size() == 100);
    CHECK(cut.back() == "w99");
}

TEST_CASE("character truncation counts non-space codepoints") {
    // 中文 split across a space: the space is not counted against the limit
    CHECK(text::truncate_characters("\xE4\xB8\xAD \xE6\x96\x87\xE5\xAD\x97", 2) ==
          "\xE4\xB8\xAD \xE6\x96\x87");
    CHECK(text::truncate_characters("abc", 10) == "abc");
    CHECK(text::truncate_characters("abcd", 3) == "abc");
}

TEST_CASE("fnv1a64 pinned vectors") {
    CHECK(text::fnv1a64("") == 14695981039346656037ULL);
    CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(text::fnv1a64("hello") == 0xa430d84680aabd0bULL);
    CHECK(text::fnv1a64("jv") == 0x08c15207b564cc71ULL);
    CHECK(text::fnv1a64("en") == 0x088e3807b53946aaULL);
}

TEST_CASE("splitmix64 pinned sequences") {
    text::SplitMix64 zero(0);
    CHECK(zero.next() == 0xe220a8397b1dcdafULL);
    CHECK(zero.next() == 0x6e789e6aa1b965f4ULL);
    CHECK(zero.next() == 0x06c45d188009454fULL);

    text::SplitMix64 forty_two(42);
    CHECK(forty_two.next() == 0xbdd732262feb6e95ULL);
    CHECK(forty_two.next() == 0x28efe333b266f103ULL);
    CHECK(forty_two.next() == 0x47526757130f9f52ULL);

    text::SplitMix64 bounded(42);
    CHECK(bounded.bounded(10) == 0xbdd732262feb6e95ULL % 10);
}

TEST_CASE("sha256 pinned vectors") {
    CHECK(text::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(text::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
