#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "monoforge/corpus/document.hpp"
#include "monoforge/corpus/manifest_io.hpp"
#include "support/fixtures.hpp"

using namespace monoforge;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "monoforge-tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("count_word_tokens basics") {
    CHECK(count_word_tokens("") == 0);
    CHECK(count_word_tokens("a b  c\n") == 3);
    CHECK(count_word_tokens("   ") == 0);
    CHECK(count_word_tokens("one") == 1);
    // Unicode whitespace separates too.
    CHECK(count_word_tokens("a b") == 2);
    CHECK(count_word_tokens("नम दु") == 2);
}

TEST_CASE("count_word_tokens on a generated 100-word sentence") {
    Rng rng(7);
    std::string s;
    for (int i = 0; i < 100; ++i) {
        if (i) s += ' ';
        s += fixtures::latin_word(rng);
    }
    CHECK(count_word_tokens(s) == 100);
}

TEST_CASE("count_word_tokens is additive over a space join") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::string a = fixtures::make_sentence(rng, false, 1 + rng.next_below(8));
        std::string b = fixtures::make_sentence(rng, trial % 2, 1 + rng.next_below(8));
        CHECK(count_word_tokens(a + " " + b) ==
              count_word_tokens(a) + count_word_tokens(b));
    }
}

TEST_CASE("language tag parsing") {
    CHECK(parse_language_tag("en") == LanguageTag{"en", ""});
    CHECK(parse_language_tag("hi-Deva") == LanguageTag{"hi", "Deva"});
    CHECK(parse_language_tag("hi-Deva").str() == "hi-Deva");
    CHECK_THROWS_AS(parse_language_tag(""), Error);
    CHECK_THROWS_AS(parse_language_tag("EN"), Error);
    CHECK_THROWS_AS(parse_language_tag("e n"), Error);
}

TEST_CASE("make_document splits paragraphs and counts tokens") {
    auto doc = make_document("para one here\n\npara two", parse_language_tag("en"),
                             "https://example.test/a", {});
    REQUIRE(doc.paragraphs.size() == 2);
    CHECK(doc.paragraph(0) == "para one here");
    CHECK(doc.paragraph(1) == "para two");
    CHECK(doc.word_tokens == 5);
    CHECK(doc.id.size() == 32);
    CHECK(doc.id == content_id("https://example.test/a"));

    auto no_url = make_document("same text", parse_language_tag("en"), "", {});
    CHECK(no_url.id == content_id("same text"));
    validate_document(doc);
    validate_document(no_url);
}

TEST_CASE("document ids are stable across reruns") {
    auto a = make_document("alpha beta", parse_language_tag("en"), "", {});
    auto b = make_document("alpha beta", parse_language_tag("en"), "", {});
    CHECK(a.id == b.id);
    auto c = make_document("alpha beta!", parse_language_tag("en"), "", {});
    CHECK(a.id != c.id);
}

TEST_CASE("validate_document rejects invariant violations") {
    auto good = make_document("hello world", parse_language_tag("en"), "", {});

    SUBCASE("span out of bounds") {
        auto d = good;
        d.paragraphs = {{0, 99}};
        CHECK_THROWS_AS(validate_document(d), Error);
    }
    SUBCASE("overlapping spans") {
        auto d = good;
        d.paragraphs = {{0, 7}, {5, 11}};
        CHECK_THROWS_AS(validate_document(d), Error);
    }
    SUBCASE("word count mismatch") {
        auto d = good;
        d.word_tokens = 3;
        CHECK_THROWS_AS(validate_document(d), Error);
    }
    SUBCASE("synthetic without source lang") {
        auto d = good;
        d.provenance.kind = ProvenanceKind::synthetic;
        CHECK_THROWS_AS(validate_document(d), Error);
    }
    SUBCASE("clean with source lang") {
        auto d = good;
        d.provenance.source_lang = parse_language_tag("en");
        CHECK_THROWS_AS(validate_document(d), Error);
    }
}

TEST_CASE("validate_manifest rejects duplicate ids and language mixes") {
    auto corpus = fixtures::make_corpus("en", 3, 1);
    validate_manifest(corpus);

    SUBCASE("duplicate id") {
        corpus.documents.push_back(corpus.documents[0]);
        CHECK_THROWS_AS(validate_manifest(corpus), Error);
    }
    SUBCASE("language mix") {
        corpus.documents[1].lang = parse_language_tag("hi");
        CHECK_THROWS_AS(validate_manifest(corpus), Error);
    }
}

TEST_CASE("manifest save/load round trip") {
    auto corpus = fixtures::make_corpus("hi", 5, 42);
    corpus.stage = "clean";
    corpus.created_at = "2026-01-01T00:00:00Z";
    corpus.documents[2].bpe_tokens = 123;
    corpus.documents[3].provenance =
        Provenance{ProvenanceKind::synthetic, parse_language_tag("en"), "mt-x", true};

    auto path = temp_file("roundtrip.jsonl");
    save_manifest(corpus, path);
    auto loaded = load_manifest(path);

    CHECK(loaded.lang == corpus.lang);
    CHECK(loaded.stage == corpus.stage);
    CHECK(loaded.created_at == corpus.created_at);
    REQUIRE(loaded.documents.size() == corpus.documents.size());
    for (size_t i = 0; i < corpus.documents.size(); ++i) {
        CHECK(loaded.documents[i] == corpus.documents[i]);
    }
}

TEST_CASE("two saves of the same manifest are byte-identical") {
    auto corpus = fixtures::make_corpus("en", 4, 9);
    corpus.created_at = "2026-01-01T00:00:00Z";
    auto p1 = temp_file("stable1.jsonl");
    auto p2 = temp_file("stable2.jsonl");
    save_manifest(corpus, p1);
    save_manifest(corpus, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(!slurp(p1).empty());
}

TEST_CASE("multi-byte UTF-8 round-trips losslessly") {
    CorpusManifest corpus;
    corpus.lang = parse_language_tag("hi");
    corpus.stage = "test";
    corpus.documents.push_back(make_document(
        "नमस्ते दुनिया"
        "\n\n\U0001F00Bx \"quoted\" \\back\\",
        corpus.lang, "", {}));
    auto path = temp_file("utf8.jsonl");
    save_manifest(corpus, path);
    auto loaded = load_manifest(path);
    REQUIRE(loaded.documents.size() == 1);
    CHECK(loaded.documents[0].text == corpus.documents[0].text);
    CHECK(loaded.documents[0] == corpus.documents[0]);
}

TEST_CASE("empty file loads as empty manifest") {
    auto path = temp_file("empty.jsonl");
    std::ofstream(path, std::ios::trunc).close();
    auto loaded = load_manifest(path);
    CHECK(loaded.documents.empty());
}

TEST_CASE("malformed and invalid lines are reported with context") {
    auto path = temp_file("bad.jsonl");
    {
        std::ofstream out(path, std::ios::trunc);
        out << "{not json\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("line 1"), Error);

    auto corpus = fixtures::make_corpus("en", 1, 3);
    corpus.documents[0].paragraphs = {{0, 4}, {2, 8}};  // overlap
    {
        std::ofstream out(path, std::ios::trunc);
        out << document_to_json_line(corpus.documents[0]) << "\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(path),
                         doctest::Contains(corpus.documents[0].id.c_str()), Error);
}

TEST_CASE("dropped-document sidecar records the drop reason") {
    auto corpus = fixtures::make_corpus("en", 2, 5);
    std::vector<DroppedDocument> dropped;
    dropped.push_back({corpus.documents[0], "lid", "hi"});
    dropped.push_back({corpus.documents[1], "toxicity", "badword"});
    auto path = temp_file("dropped.jsonl");
    save_dropped(dropped, corpus.lang, "lid", path);

    auto body = slurp(path);
    CHECK(body.find("\"drop_reason\":\"lid\"") != std::string::npos);
    CHECK(body.find("\"drop_reason\":\"toxicity\"") != std::string::npos);
    CHECK(body.find("\"drop_detail\":\"badword\"") != std::string::npos);
}

TEST_CASE("paragraph spans never exceed text length") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        auto doc = make_document(fixtures::make_text(rng, trial % 2, 1 + rng.next_below(5)),
                                 parse_language_tag(trial % 2 ? "hi" : "en"), "", {});
        uint64_t covered = 0;
        for (const auto& p : doc.paragraphs) {
            REQUIRE(p.begin <= p.end);
            REQUIRE(p.end <= doc.text.size());
            covered += p.end - p.begin;
        }
        CHECK(covered <= doc.text.size());
    }
}
