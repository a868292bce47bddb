#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "emcee/datasets.hpp"
#include "emcee/errors.hpp"
#include "helpers.hpp"

using namespace emcee;
using test_support::TempDir;
using test_support::write_file;

namespace {

DatasetManifest fixture_manifest() {
    DatasetManifest m;
    m.name = "fixture";
    m.task = TaskKind::mcqa;
    m.path = std::string(TEST_DATA_DIR) + "/fixture50.jsonl";
    m.languages = {normalize_language_tag("en", {}), normalize_language_tag("jv", {})};
    return m;
}

std::vector<std::string> ids_of(const std::vector<QueryRecord>& records,
                                const std::string& language) {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (r.language.code == language) out.push_back(r.id);
    }
    return out;
}

}  // namespace

TEST_CASE("load_dataset reads the fixture corpus in file order") {
    auto records = load_dataset(fixture_manifest());
    REQUIRE(records.size() == 50);
    CHECK(records.front().id == "q001");
    CHECK(records.back().id == "q050");
    CHECK(records.front().dataset == "fixture");
    CHECK(records.front().language.code == "en");
    CHECK(records.front().options.size() == 4);
    CHECK(records.front().gold.label == "A");
    CHECK(records[25].language.code == "jv");
    for (size_t i = 1; i < records.size(); ++i) {
        CHECK(records[i - 1].id < records[i].id);  // fixture happens to be sorted
    }
}

TEST_CASE("load_dataset drops languages outside the manifest") {
    DatasetManifest m = fixture_manifest();
    m.languages = {normalize_language_tag("en", {})};
    auto records = load_dataset(m);
    CHECK(records.size() == 25);
    for (const auto& r : records) CHECK(r.language.code == "en");
}

TEST_CASE("load_dataset reads the pagupon record") {
    DatasetManifest m;
    m.name = "m3exam";
    m.task = TaskKind::mcqa;
    m.path = std::string(TEST_DATA_DIR) + "/pagupon.jsonl";
    m.languages = {normalize_language_tag("jv", {})};
    auto records = load_dataset(m);
    REQUIRE(records.size() == 1);
    CHECK(records[0].id == "m3exam_jv_0001");
    CHECK(records[0].question == "Pagupon Iku Jenenge Kandhang ...");
    REQUIRE(records[0].options.size() == 4);
    CHECK(records[0].options[3].label == "D");
    CHECK(records[0].options[3].body == "Dara");
    CHECK(records[0].gold.label == "D");
    CHECK(records[0].category == "language");
}

TEST_CASE("load_dataset rejects malformed input with line numbers") {
    TempDir dir("emcee_ds");
    DatasetManifest m;
    m.name = "bad";
    m.task = TaskKind::mcqa;
    m.languages = {normalize_language_tag("en", {})};

    const std::string good =
        R"({"id": "ok1", "language": "en", "question": "Pick one.", "options": [{"label": "A", "body": "first"}, {"label": "B", "body": "second"}], "gold": {"label": "A"}})";

    SUBCASE("missing file") {
        m.path = dir.path / "absent.jsonl";
        CHECK_THROWS_AS(load_dataset(m), ConfigError);
    }
    SUBCASE("invalid json carries the line number") {
        m.path = dir.path / "broken.jsonl";
        write_file(m.path, good + "\n{not json\n");
        try {
            load_dataset(m);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("invalid JSON") != std::string::npos);
            CHECK(e.line_number == 2);
        }
    }
    SUBCASE("non-object line") {
        m.path = dir.path / "array.jsonl";
        write_file(m.path, "[1, 2, 3]\n");
        CHECK_THROWS_WITH_AS(load_dataset(m), doctest::Contains("JSON object"), DataError);
    }
    SUBCASE("missing id") {
        m.path = dir.path / "noid.jsonl";
        write_file(m.path, R"({"language": "en", "question": "q", "gold": "A"})" "\n");
        CHECK_THROWS_WITH_AS(load_dataset(m), doctest::Contains("missing an id"), DataError);
    }
    SUBCASE("missing language") {
        m.path = dir.path / "nolang.jsonl";
        write_file(m.path, R"({"id": "x1", "question": "q", "gold": "A"})" "\n");
        CHECK_THROWS_WITH_AS(load_dataset(m), doctest::Contains("x1 is missing a language"),
                             DataError);
    }
    SUBCASE("declared task must match the dataset") {
        m.path = dir.path / "mismatch.jsonl";
        write_file(
            m.path,
            R"({"id": "x2", "language": "en", "task": "nli", "question": "q", "gold": "A"})" "\n");
        CHECK_THROWS_WITH_AS(load_dataset(m),
                             doctest::Contains("declares task nli but the dataset is mcqa"),
                             DataError);
    }
    SUBCASE("missing gold") {
        m.path = dir.path / "nogold.jsonl";
        write_file(
            m.path,
            R"({"id": "x3", "language": "en", "question": "q", "options": [{"label": "A", "body": "a"}, {"label": "B", "body": "b"}]})" "\n");
        CHECK_THROWS_WITH_AS(load_dataset(m), doctest::Contains("x3 is missing gold"), DataError);
    }
    SUBCASE("duplicate id") {
        m.path = dir.path / "dup.jsonl";
        write_file(m.path, good + "\n" + good + "\n");
        CHECK_THROWS_WITH_AS(load_dataset(m), doctest::Contains("duplicate record id 'ok1'"),
                             DataError);
    }
    SUBCASE("structurally invalid record") {
        m.path = dir.path / "invalid.jsonl";
        write_file(
            m.path,
            R"({"id": "x4", "language": "en", "question": "q", "options": [{"label": "A", "body": "a"}, {"label": "B", "body": "b"}], "gold": {"label": "Z"}})" "\n");
        try {
            load_dataset(m);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("x4 is invalid") != std::string::npos);
            CHECK(e.line_number == 1);
        }
    }
    SUBCASE("blank lines are skipped") {
        m.path = dir.path / "blanks.jsonl";
        write_file(m.path, "\n   \n" + good + "\n\n");
        auto records = load_dataset(m);
        REQUIRE(records.size() == 1);
        CHECK(records[0].id == "ok1");
    }
}

TEST_CASE("nli records flatten premise and hypothesis into an english scaffold") {
    TempDir dir("emcee_nli");
    DatasetManifest m;
    m.name = "xnli_demo";
    m.task = TaskKind::nli;
    m.path = dir.path / "nli.jsonl";
    m.languages = {normalize_language_tag("sw", {})};
    write_file(
        m.path,
        R"({"id": "n1", "language": "sw", "premise": "Mvua ilinyesha usiku kucha.", "hypothesis": "Ardhi ilikuwa kavu asubuhi.", "gold": {"label": 2}})"
        "\n"
        R"({"id": "n2", "language": "sw", "premise": "Aliondoka mapema.", "hypothesis": "Alifika kwanza.", "gold": {"label": "neutral"}})"
        "\n"
        R"({"id": "n3", "language": "sw", "premise": "Paka amelala.", "hypothesis": "Paka hayuko macho.", "gold": {"label": 0}})"
        "\n");
    auto records = load_dataset(m);
    REQUIRE(records.size() == 3);

    const auto& r = records[0];
    CHECK(r.question ==
          "Mvua ilinyesha usiku kucha.\nBased on the previous passage, is it true that Ardhi "
          "ilikuwa kavu asubuhi.?");
    REQUIRE(r.options.size() == 3);
    CHECK(r.options[0].label == "Yes");
    CHECK(r.options[1].label == "No");
    CHECK(r.options[2].label == "Maybe");
    CHECK(r.meta.at("premise") == "Mvua ilinyesha usiku kucha.");
    CHECK(r.meta.at("hypothesis") == "Ardhi ilikuwa kavu asubuhi.");
    CHECK(r.gold.label == "No");
    CHECK(records[1].gold.label == "Maybe");
    CHECK(records[2].gold.label == "Yes");
}

TEST_CASE("copa records flatten choices and map integer gold labels") {
    TempDir dir("emcee_copa");
    DatasetManifest m;
    m.name = "xcopa_demo";
    m.task = TaskKind::copa;
    m.path = dir.path / "copa.jsonl";
    m.languages = {normalize_language_tag("ht", {})};
    write_file(
        m.path,
        R"({"id": "c1", "language": "ht", "premise": "Chen an te jape tout nwit", "choice1": "Vwazen yo te plenyen", "choice2": "Chen an te dmi byen", "question_word": "effect", "gold": {"label": 0}})"
        "\n"
        R"({"id": "c2", "language": "ht", "premise": "Li te bliye parapli li", "choice1": "Li te mouye", "choice2": "Li te rete sek", "question": "effect", "gold": {"label": 1}})"
        "\n");
    auto records = load_dataset(m);
    REQUIRE(records.size() == 2);

    const auto& r = records[0];
    CHECK(r.question ==
          "Here is a premise: Chen an te jape tout nwit.\nWhat is the effect?\nHelp me pick the "
          "more plausible option:\n-choice1: Vwazen yo te plenyen, -choice2: Chen an te dmi "
          "byen\nYou should only choose one option for your answer.");
    REQUIRE(r.options.size() == 2);
    CHECK(r.options[0].label == "1");
    CHECK(r.options[0].body == "Vwazen yo te plenyen");
    CHECK(r.options[1].label == "2");
    CHECK(r.gold.label == "1");
    CHECK(records[1].gold.label == "2");
    CHECK(r.meta.at("question_word") == "effect");

    SUBCASE("question word is required") {
        m.path = dir.path / "noword.jsonl";
        write_file(
            m.path,
            R"({"id": "c3", "language": "ht", "premise": "p", "choice1": "a", "choice2": "b", "gold": {"label": 0}})" "\n");
        CHECK_THROWS_WITH_AS(load_dataset(m), doctest::Contains("question word"), DataError);
    }
}

TEST_CASE("open_qa gold aliases are deduplicated keeping the first spelling") {
    TempDir dir("emcee_oq");
    DatasetManifest m;
    m.name = "mkqa_demo";
    m.task = TaskKind::open_qa;
    m.path = dir.path / "oq.jsonl";
    m.languages = {normalize_language_tag("en", {})};
    write_file(
        m.path,
        R"({"id": "o1", "language": "en", "question": "Capital of France?", "gold": {"texts": ["Paris", "paris.", "PARIS", "the  Paris"]}, "meta": {"entity_type": "Location"}})"
        "\n");
    auto records = load_dataset(m);
    REQUIRE(records.size() == 1);
    // "Paris"/"paris."/"PARIS" all normalize to the same token run; "the Paris" differs.
    REQUIRE(records[0].gold.texts.size() == 2);
    CHECK(records[0].gold.texts[0] == "Paris");
    CHECK(records[0].gold.texts[1] == "the  Paris");
    CHECK(records[0].meta.at("entity_type") == "Location");
}

TEST_CASE("filter_open_qa drops excluded entity types after normalization") {
    auto make = [](std::string id, std::string entity_type) {
        QueryRecord r;
        r.id = std::move(id);
        r.task = TaskKind::open_qa;
        r.language = normalize_language_tag("en", {});
        r.question = "q";
        r.gold.texts = {"x"};
        if (!entity_type.empty()) r.meta["entity_type"] = std::move(entity_type);
        return r;
    };
    std::vector<QueryRecord> records = {
        make("k1", "Long-Answer"),   make("k2", "entity"), make("k3", "not answerable"),
        make("k4", "  UNANSWERABLE  "), make("k5", ""),    make("k6", "date"),
    };
    auto kept = filter_open_qa(records, {"long_answer", "unanswerable"});
    std::vector<std::string> ids;
    for (const auto& r : kept) ids.push_back(r.id);
    CHECK(ids == std::vector<std::string>{"k2", "k5", "k6"});

    SUBCASE("non-open_qa records pass through untouched") {
        std::vector<QueryRecord> mixed = records;
        for (auto& r : mixed) r.task = TaskKind::mcqa;
        CHECK(filter_open_qa(mixed, {"long_answer", "unanswerable"}).size() == mixed.size());
    }
    SUBCASE("exclusion argument is normalized too") {
        auto kept2 = filter_open_qa(records, {"Long Answer", "Not-Answerable"});
        CHECK(kept2.size() == 3);
    }
}

TEST_CASE("sample_per_language draws a pinned deterministic subset") {
    auto records = load_dataset(fixture_manifest());
    auto sampled = sample_per_language(records, 5, 7);
    REQUIRE(sampled.size() == 10);

    CHECK(ids_of(sampled, "en") ==
          std::vector<std::string>{"q014", "q015", "q018", "q019", "q021"});
    CHECK(ids_of(sampled, "jv") ==
          std::vector<std::string>{"q027", "q028", "q029", "q032", "q048"});

    SUBCASE("languages stay grouped in first-appearance order") {
        for (size_t i = 0; i < 5; ++i) CHECK(sampled[i].language.code == "en");
        for (size_t i = 5; i < 10; ++i) CHECK(sampled[i].language.code == "jv");
    }
    SUBCASE("the draw is repeatable") {
        auto again = sample_per_language(records, 5, 7);
        REQUIRE(again.size() == sampled.size());
        for (size_t i = 0; i < sampled.size(); ++i) CHECK(again[i].id == sampled[i].id);
    }
    SUBCASE("a different seed gives a different draw") {
        auto other = sample_per_language(records, 5, 8);
        std::vector<std::string> a, b;
        for (const auto& r : sampled) a.push_back(r.id);
        for (const auto& r : other) b.push_back(r.id);
        CHECK(a != b);
    }
}

TEST_CASE("sample_per_language keeps everything when the quota covers the corpus") {
    auto records = load_dataset(fixture_manifest());
    auto sampled = sample_per_language(records, 25, 7);
    REQUIRE(sampled.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) CHECK(sampled[i].id == records[i].id);

    auto oversized = sample_per_language(records, 500, 7);
    CHECK(oversized.size() == records.size());
}

TEST_CASE("sample_per_language rejects a non-positive quota") {
    auto records = load_dataset(fixture_manifest());
    CHECK_THROWS_AS(sample_per_language(records, 0, 7), InvalidArgument);
    CHECK_THROWS_AS(sample_per_language(records, -3, 7), InvalidArgument);
}

TEST_CASE("load_exemplars reads the demo file") {
    auto loaded = load_exemplars(std::string(TEST_DATA_DIR) + "/exemplars_demo.jsonl", "fixture");
    REQUIRE(loaded.exemplars.size() == 3);
    CHECK(loaded.warnings.empty());
    CHECK(loaded.exemplars[0].question.find("gamelan") != std::string::npos);
    CHECK(loaded.exemplars[0].answer_label == "B");
    CHECK(!loaded.exemplars[0].explanation.empty());
}

TEST_CASE("load_exemplars expects four entries for m3-style datasets") {
    auto ok = load_exemplars(std::string(TEST_DATA_DIR) + "/exemplars_m3.jsonl", "m3exam");
    CHECK(ok.exemplars.size() == 4);
    CHECK(ok.warnings.empty());

    auto short_set =
        load_exemplars(std::string(TEST_DATA_DIR) + "/exemplars_demo.jsonl", "m3exam");
    CHECK(short_set.exemplars.size() == 3);
    REQUIRE(short_set.warnings.size() == 1);
    CHECK(short_set.warnings[0].find("expected 4 exemplars") != std::string::npos);
    CHECK(short_set.warnings[0].find("found 3") != std::string::npos);

    auto long_for_plain =
        load_exemplars(std::string(TEST_DATA_DIR) + "/exemplars_m3.jsonl", "fixture");
    REQUIRE(long_for_plain.warnings.size() == 1);
    CHECK(long_for_plain.warnings[0].find("expected 3 exemplars") != std::string::npos);
}

TEST_CASE("load_exemplars validates its entries") {
    TempDir dir("emcee_ex");
    auto path = dir.path / "ex.jsonl";

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_exemplars(dir.path / "absent.jsonl", "fixture"), ConfigError);
    }
    SUBCASE("question is required") {
        write_file(path, R"({"explanation": "some context"})" "\n");
        CHECK_THROWS_AS(load_exemplars(path, "fixture"), DataError);
    }
    SUBCASE("explanation is required") {
        write_file(path, R"({"question": "Why?"})" "\n");
        CHECK_THROWS_AS(load_exemplars(path, "fixture"), DataError);
    }
    SUBCASE("explanation must not be blank") {
        write_file(path, R"({"question": "Why?", "explanation": "   "})" "\n");
        CHECK_THROWS_AS(load_exemplars(path, "fixture"), DataError);
    }
    SUBCASE("answer label must name an option") {
        write_file(
            path,
            R"({"question": "Why?", "options": [{"label": "A", "body": "a"}, {"label": "B", "body": "b"}], "explanation": "context", "answer_label": "C"})"
            "\n");
        CHECK_THROWS_AS(load_exemplars(path, "fixture"), DataError);
    }
}
