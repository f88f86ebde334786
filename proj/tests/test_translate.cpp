#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "monoforge/bpe/tokenizer.hpp"
#include "monoforge/corpus/manifest_io.hpp"
#include "monoforge/lm/train.hpp"
#include "monoforge/text/sentences.hpp"
#include "monoforge/text/unicode.hpp"
#include "monoforge/translate/translate.hpp"
#include "support/fixtures.hpp"
#include "support/lm_fixtures.hpp"

// httplib drags in system socket headers whose macros collide with Eigen's
// template internals; keep it after everything that includes Eigen.
#include <httplib.h>
#include <json.hpp>

using namespace monoforge;

namespace {

using fixtures::char_model;

MtBackendDescriptor descriptor(const std::string& endpoint, size_t batch = 64) {
    MtBackendDescriptor d;
    d.endpoint = endpoint;
    d.model_id = "test-mt-v1";
    d.src = parse_language_tag("en");
    d.tgt = parse_language_tag("hi");
    d.batch_size = batch;
    d.beam = 5;
    return d;
}

TranslateOptions fast_options() {
    TranslateOptions opts;
    opts.retry.sleep = false;
    return opts;
}

// Fails (throws) on every nth translate_batch call, succeeds otherwise.
// Deterministic, so retried runs always recover.
class FlakyBackend : public MtBackend {
public:
    explicit FlakyBackend(size_t every) : every_(every) {}
    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override {
        if (++calls_ % every_ == 0) throw Error("injected transient fault");
        return sentences;
    }
    size_t calls() const { return calls_; }

private:
    size_t every_;
    size_t calls_ = 0;
};

class AlwaysFailBackend : public MtBackend {
public:
    std::vector<std::string> translate_batch(const std::vector<std::string>&) override {
        throw Error("backend is down");
    }
};

// Fails every batch containing the poisoned sentence; echoes the rest.
class PoisonBackend : public MtBackend {
public:
    explicit PoisonBackend(std::string poison) : poison_(std::move(poison)) {}
    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override {
        for (const auto& s : sentences) {
            if (s == poison_) throw Error("poisoned sentence");
        }
        return sentences;
    }

private:
    std::string poison_;
};

// Echo backend that records every chunk submitted to it.
class RecordingBackend : public MtBackend {
public:
    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override {
        seen.insert(seen.end(), sentences.begin(), sentences.end());
        batch_sizes.push_back(sentences.size());
        return sentences;
    }
    std::vector<std::string> seen;
    std::vector<size_t> batch_sizes;
};

// Returns the wrong number of translations once, then behaves.
class MiscountBackend : public MtBackend {
public:
    std::vector<std::string> translate_batch(
        const std::vector<std::string>& sentences) override {
        if (first_) {
            first_ = false;
            return std::vector<std::string>(sentences.size() + 1, "x");
        }
        return sentences;
    }

private:
    bool first_ = true;
};

// Overfit repair fixture: a character tokenizer over one sentence and a
// one-block LM trained until it memorizes that sentence.
struct RepairFixture {
    TokenizerModel tok;
    TinyLMParams<double> lm;
    std::string sentence;
};

RepairFixture overfit_fixture(const std::string& sentence) {
    RepairFixture fx{fixtures::char_model({sentence}), {}, sentence};
    double loss = 0.0;
    fx.lm = fixtures::train_char_lm(fx.tok, {sentence}, 400, 64, &loss);
    REQUIRE(loss < 0.05);  // memorized
    return fx;
}

// Brute-force oracle for the clause-split rule: the longest prefix ending
// at clause punctuation followed by whitespace (with text after) whose
// token count fits the limit.
std::string clause_split_oracle(const std::string& text, const TokenizerModel& tok,
                                size_t max_tokens) {
    std::string best;
    size_t i = 0;
    while (i < text.size()) {
        size_t next = i;
        const char32_t cp = unicode::decode_utf8(text, next).cp;
        if ((cp == U',' || cp == U';' || cp == U':') && next < text.size()) {
            size_t probe = next;
            size_t ws_end = next;
            while (probe < text.size()) {
                size_t after = probe;
                if (!unicode::is_whitespace(unicode::decode_utf8(text, after).cp)) break;
                ws_end = after;
                probe = after;
            }
            if (ws_end > next && ws_end < text.size()) {
                const std::string prefix = text.substr(0, next);
                if (tok.token_count(prefix) <= max_tokens && prefix.size() > best.size()) {
                    best = prefix;
                }
            }
        }
        i = next;
    }
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Backend descriptors and builtin backends
// ---------------------------------------------------------------------------

TEST_CASE("descriptor validation enforces beam, batch, and language fields") {
    CHECK_NOTHROW(descriptor("identity").validate());
    auto bad = descriptor("");
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = descriptor("identity");
    bad.beam = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = descriptor("identity");
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = descriptor("identity");
    bad.src = {};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = descriptor("identity");
    bad.tgt = {};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("make_backend dispatches on the endpoint") {
    auto echo = make_backend(descriptor("identity"));
    CHECK(echo->translate_batch({"a", "b"}) == std::vector<std::string>{"a", "b"});
    CHECK_NOTHROW(make_backend(descriptor("http://127.0.0.1:1/x")));
    CHECK_NOTHROW(make_backend(descriptor("https://mt.example/api")));
    CHECK_THROWS_AS(make_backend(descriptor("table")), Error);
    CHECK_THROWS_AS(make_backend(descriptor("ftp://mt.example")), Error);
}

TEST_CASE("identity backend echoes, table backend maps exactly") {
    IdentityBackend echo;
    CHECK(echo.translate_batch({}).empty());
    CHECK(echo.translate_batch({"x"}) == std::vector<std::string>{"x"});

    TableBackend table({{"ek do.", "एक दो।"}, {"teen.", "तीन।"}});
    CHECK(table.translate_batch({"teen.", "ek do."}) ==
          std::vector<std::string>{"तीन।", "एक दो।"});
    CHECK_THROWS_WITH_AS(table.translate_batch({"unknown"}),
                         doctest::Contains("no translation"), Error);
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

TEST_CASE("short sentence passes chunking untouched") {
    auto tok = char_model({"a short sentence."});
    const std::string s = "a short sentence.";
    ChunkSet cs = check_chunk(s, tok, 256);
    CHECK_FALSE(cs.over_limit);
    REQUIRE(cs.pieces.size() == 1);
    CHECK(cs.pieces[0] == s);
    CHECK(cs.joiners.empty());
    // Exactly at the limit is still one piece.
    CHECK(tok.token_count(s) == 17);
    CHECK_FALSE(check_chunk(s, tok, 17).over_limit);
    CHECK(check_chunk(s, tok, 16).over_limit);
}

TEST_CASE("long unpunctuated sentence hard-splits within the token limit") {
    auto tok = char_model({"a"});
    const std::string s(300, 'a');  // 300 tokens, no split points
    ChunkSet cs = check_chunk(s, tok, 256);
    CHECK(cs.over_limit);
    CHECK(cs.pieces.size() >= 2);
    for (const auto& piece : cs.pieces) {
        CHECK(tok.token_count(piece) <= 256);
    }
    CHECK(rejoin_chunks(cs.pieces, cs.joiners) == s);
    for (const auto& j : cs.joiners) CHECK(j.empty());  // hard cuts consume nothing
}

TEST_CASE("over-limit sentence with a comma splits at the clause boundary") {
    auto tok = char_model({"ab, ."});
    // 126 a's + comma = 127 tokens, one marker token for the space, then
    // 128 b's + period = 129 tokens; 257 total, one over a 256 limit.
    const std::string s = std::string(126, 'a') + ", " + std::string(128, 'b') + ".";
    REQUIRE(tok.token_count(s) == 257);
    ChunkSet cs = check_chunk(s, tok, 256);
    CHECK(cs.over_limit);
    REQUIRE(cs.pieces.size() == 2);
    CHECK(cs.pieces[0] == std::string(126, 'a') + ",");
    CHECK(cs.pieces[1] == std::string(128, 'b') + ".");
    REQUIRE(cs.joiners.size() == 1);
    CHECK(cs.joiners[0] == " ");
    CHECK(rejoin_chunks(cs.pieces, cs.joiners) == s);
    // Oracle: the chosen first piece is the longest fitting clause prefix.
    CHECK(cs.pieces[0] == clause_split_oracle(s, tok, 256));
}

TEST_CASE("clause split prefers the longest boundary that fits") {
    auto tok = char_model({"ab, ;"});
    // Boundaries after 10, 30, and 200 tokens; limit 64 → the 30-token one.
    const std::string s = std::string(9, 'a') + ", " + std::string(18, 'b') + "; " +
                          std::string(168, 'a') + ", " + std::string(40, 'b');
    REQUIRE(tok.token_count(s) > 64);
    ChunkSet cs = check_chunk(s, tok, 64);
    CHECK(cs.over_limit);
    CHECK(cs.pieces[0] == clause_split_oracle(s, tok, 64));
    CHECK(cs.pieces[0] == std::string(9, 'a') + ", " + std::string(18, 'b') + ";");
    CHECK(rejoin_chunks(cs.pieces, cs.joiners) == s);
    for (const auto& piece : cs.pieces) CHECK(tok.token_count(piece) <= 64);
}

TEST_CASE("hard splits through byte fallback land on codepoint boundaries") {
    // Tokenizer trained on ASCII only: Devanagari goes through byte
    // fallback, three tokens per codepoint, so naive cuts would land
    // mid-codepoint.
    auto tok = char_model({"abc."});
    const std::string s = "कखगघ";  // 4 codepoints, 12 bytes, 12 tokens
    REQUIRE(tok.token_count(s) == 12);
    ChunkSet cs = check_chunk(s, tok, 4);
    CHECK(cs.over_limit);
    for (const auto& piece : cs.pieces) {
        CHECK(tok.token_count(piece) <= 4);
        size_t bad = 0;
        unicode::decode_utf8_string(piece, &bad);
        CHECK(bad == 0);  // every piece is complete UTF-8
    }
    CHECK(rejoin_chunks(cs.pieces, cs.joiners) == s);
}

TEST_CASE("chunking edge cases") {
    auto tok = char_model({"abc."});
    CHECK_THROWS_AS(check_chunk("abc", tok, 0), Error);
    // A single 3-byte codepoint cannot be split below 3 tokens.
    CHECK_THROWS_WITH_AS(check_chunk("क", tok, 2),
                         doctest::Contains("cannot split"), Error);
    ChunkSet empty = check_chunk("", tok, 4);
    CHECK_FALSE(empty.over_limit);
    REQUIRE(empty.pieces.size() == 1);
    CHECK(empty.pieces[0].empty());
}

TEST_CASE("rejoin_chunks validates the joiner count") {
    CHECK(rejoin_chunks({}, {}).empty());
    CHECK(rejoin_chunks({"a"}, {}) == "a");
    CHECK(rejoin_chunks({"a", "b"}, {" "}) == "a b");
    CHECK(rejoin_chunks({"a", "b"}, {""}) == "ab");
    CHECK_THROWS_AS(rejoin_chunks({"a", "b"}, {}), Error);
    CHECK_THROWS_AS(rejoin_chunks({"a"}, {" "}), Error);
}

TEST_CASE("chunk property: random sentences rejoin byte-exactly") {
    Rng rng(4242);
    std::vector<std::string> corpus;
    for (int i = 0; i < 20; ++i) corpus.push_back(fixtures::make_sentence(rng, false, 60));
    auto tok = char_model(corpus);
    for (const auto& s : corpus) {
        for (size_t limit : {8u, 17u, 64u}) {
            ChunkSet cs = check_chunk(s, tok, limit);
            CHECK(rejoin_chunks(cs.pieces, cs.joiners) == s);
            for (const auto& piece : cs.pieces) CHECK(tok.token_count(piece) <= limit);
            CHECK(cs.over_limit == (tok.token_count(s) > limit));
        }
    }
}

// ---------------------------------------------------------------------------
// translate_corpus
// ---------------------------------------------------------------------------

TEST_CASE("identity backend round-trips every document byte-exactly") {
    const CorpusManifest input = fixtures::make_corpus("en", 4, 77);
    std::vector<std::string> texts;
    for (const auto& d : input.documents) texts.push_back(d.text);
    auto tok = char_model(texts);

    const auto desc = descriptor("identity", 3);
    IdentityBackend echo;
    const LanguageTag tgt = parse_language_tag("hi");
    TranslateResult r = translate_corpus(input, echo, desc, tok, tgt, fast_options());

    REQUIRE(r.synthetic.documents.size() == input.documents.size());
    CHECK(r.synthetic.lang.str() == "hi");
    CHECK(r.synthetic.stage == "translate");
    CHECK(r.synthetic.created_at == input.created_at);
    for (size_t i = 0; i < input.documents.size(); ++i) {
        const Document& src = input.documents[i];
        const Document& out = r.synthetic.documents[i];
        CHECK(out.text == src.text);  // echo identity, exact
        CHECK(out.url == src.url);
        CHECK(out.paragraphs.size() == src.paragraphs.size());
        CHECK(out.lang.str() == "hi");
        CHECK(out.provenance.kind == ProvenanceKind::synthetic);
        REQUIRE(out.provenance.source_lang.has_value());
        CHECK(out.provenance.source_lang->str() == "en");
        CHECK(out.provenance.mt_model_id == "test-mt-v1");
        CHECK_FALSE(out.provenance.repaired);
    }
    CHECK(r.failures.empty());
    CHECK(r.stats.failed_docs == 0);
    CHECK(r.stats.sentences == r.records.size());
    CHECK(r.stats.chunks == r.stats.sentences);  // nothing over the limit
    CHECK(r.stats.batches == (r.stats.chunks + desc.batch_size - 1) / desc.batch_size);
    for (const auto& rec : r.records) {
        CHECK_FALSE(rec.failed);
        CHECK_FALSE(rec.truncated);
        CHECK_FALSE(rec.repaired);
        CHECK(rec.output == rec.span.text);
        CHECK(rec.raw_output == rec.output);
    }
}

TEST_CASE("sentence spans reconstruct each source paragraph") {
    const CorpusManifest input = fixtures::make_corpus("en", 3, 19);
    std::vector<std::string> texts;
    for (const auto& d : input.documents) texts.push_back(d.text);
    auto tok = char_model(texts);
    IdentityBackend echo;
    TranslateResult r = translate_corpus(input, echo, descriptor("identity"), tok,
                                         parse_language_tag("hi"), fast_options());

    std::map<std::string, const Document*> by_id;
    for (const auto& d : input.documents) by_id[d.id] = &d;
    std::map<std::pair<std::string, size_t>, std::string> joined;
    for (const auto& rec : r.records) {
        auto key = std::make_pair(rec.span.doc_id, rec.span.paragraph_index);
        auto& acc = joined[key];
        if (!acc.empty()) acc += ' ';
        acc += rec.span.text;
    }
    size_t paragraphs_checked = 0;
    for (const auto& [key, text] : joined) {
        const Document* doc = by_id.at(key.first);
        CHECK(text == doc->paragraph(key.second));
        ++paragraphs_checked;
    }
    size_t total_paragraphs = 0;
    for (const auto& d : input.documents) total_paragraphs += d.paragraphs.size();
    CHECK(paragraphs_checked == total_paragraphs);
}

TEST_CASE("table backend maps each sentence and keeps structure") {
    CorpusManifest input;
    input.lang = parse_language_tag("en");
    input.stage = "test";
    input.created_at = "2024-05-01T00:00:00Z";
    input.documents.push_back(make_document(
        "ek do. teen char.\n\npanch chhe.", input.lang, "https://example.test/t/0", {}));

    TableBackend table({{"ek do.", "एक दो।"},
                        {"teen char.", "तीन चार।"},
                        {"panch chhe.", "पाँच छह।"}});
    auto tok = char_model({"ek do. teen char. panch chhe."});
    TranslateResult r = translate_corpus(input, table, descriptor("table-direct"), tok,
                                         parse_language_tag("hi"), fast_options());

    REQUIRE(r.synthetic.documents.size() == 1);
    const Document& out = r.synthetic.documents[0];
    CHECK(out.text == "एक दो। तीन चार।\n\nपाँच छह।");
    CHECK(out.paragraphs.size() == 2);
    REQUIRE(r.records.size() == 3);
    CHECK(r.records[0].output == "एक दो।");
    CHECK(r.records[1].output == "तीन चार।");
    CHECK(r.records[2].output == "पाँच छह।");
    CHECK(r.records[1].span.text == "teen char.");
    CHECK(r.records[2].span.paragraph_index == 1);
    CHECK(r.records[2].span.index == 0);
    CHECK(out.word_tokens == count_word_tokens(out.text));
}

TEST_CASE("deterministic backend gives byte-identical manifests across runs") {
    const CorpusManifest input = fixtures::make_corpus("en", 3, 55);
    std::vector<std::string> texts;
    for (const auto& d : input.documents) texts.push_back(d.text);
    auto tok = char_model(texts);
    auto run = [&] {
        IdentityBackend echo;
        return translate_corpus(input, echo, descriptor("identity", 5), tok,
                                parse_language_tag("hi"), fast_options());
    };
    TranslateResult a = run();
    TranslateResult b = run();
    REQUIRE(a.synthetic.documents.size() == b.synthetic.documents.size());
    for (size_t i = 0; i < a.synthetic.documents.size(); ++i) {
        CHECK(document_to_json_line(a.synthetic.documents[i]) ==
              document_to_json_line(b.synthetic.documents[i]));
    }
}

TEST_CASE("long sentences are chunked for the backend and reassembled") {
    // One paragraph, one sentence, far over a 16-token limit.
    const std::string sentence =
        "alpha beta gamma, delta epsilon zeta eta theta iota kappa lambda mu.";
    CorpusManifest input;
    input.lang = parse_language_tag("en");
    input.stage = "test";
    input.documents.push_back(
        make_document(sentence, input.lang, "https://example.test/long/0", {}));

    auto tok = char_model({sentence});
    RecordingBackend recorder;
    TranslateOptions opts = fast_options();
    opts.max_tokens = 16;
    TranslateResult r = translate_corpus(input, recorder, descriptor("identity", 4),
                                         tok, parse_language_tag("hi"), opts);

    CHECK(r.stats.sentences == 1);
    CHECK(r.stats.chunks > 1);
    CHECK(recorder.seen.size() == r.stats.chunks);
    for (const auto& submitted : recorder.seen) {
        CHECK(tok.token_count(submitted) <= 16);  // invariant: never over limit
    }
    for (size_t bs : recorder.batch_sizes) CHECK(bs <= 4);
    REQUIRE(r.synthetic.documents.size() == 1);
    CHECK(r.synthetic.documents[0].text == sentence);  // rejoined exactly
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].span.text == sentence);
    CHECK(r.synthetic.documents[0].paragraphs.size() == 1);
}

TEST_CASE("manifest language must match the backend source language") {
    const CorpusManifest input = fixtures::make_corpus("hi", 1, 9);
    auto tok = char_model({input.documents[0].text});
    IdentityBackend echo;
    CHECK_THROWS_WITH_AS(
        translate_corpus(input, echo, descriptor("identity"), tok,
                         parse_language_tag("hi"), fast_options()),
        doctest::Contains("does not match"), Error);
}

// ---------------------------------------------------------------------------
// Retry and failure handling
// ---------------------------------------------------------------------------

TEST_CASE("transient backend faults are retried to a complete result") {
    const CorpusManifest input = fixtures::make_corpus("en", 4, 31);
    std::vector<std::string> texts;
    for (const auto& d : input.documents) texts.push_back(d.text);
    auto tok = char_model(texts);

    FlakyBackend flaky(3);  // every third call throws
    TranslateResult r = translate_corpus(input, flaky, descriptor("flaky", 2), tok,
                                         parse_language_tag("hi"), fast_options());

    CHECK(r.failures.empty());
    CHECK(r.stats.failed_docs == 0);
    CHECK(r.stats.retries > 0);
    REQUIRE(r.synthetic.documents.size() == input.documents.size());
    for (size_t i = 0; i < input.documents.size(); ++i) {
        CHECK(r.synthetic.documents[i].text == input.documents[i].text);
    }
}

TEST_CASE("permanent backend failure records every sentence, drops no doc silently") {
    const CorpusManifest input = fixtures::make_corpus("en", 2, 13);
    std::vector<std::string> texts;
    for (const auto& d : input.documents) texts.push_back(d.text);
    auto tok = char_model(texts);

    AlwaysFailBackend down;
    TranslateOptions opts = fast_options();
    opts.retry.max_attempts = 2;
    TranslateResult r = translate_corpus(input, down, descriptor("down"), tok,
                                         parse_language_tag("hi"), opts);

    CHECK(r.synthetic.documents.empty());
    CHECK(r.stats.failed_docs == 2);
    CHECK(r.failures.size() == r.records.size());
    CHECK(r.stats.retries == r.stats.batches * (opts.retry.max_attempts - 1));
    for (const auto& rec : r.records) {
        CHECK(rec.failed);
        CHECK(rec.failure_reason == "backend is down");
        CHECK_FALSE(rec.truncated);
    }
    for (const auto& f : r.failures) {
        CHECK(f.reason == "backend is down");
        CHECK((f.doc_id == input.documents[0].id || f.doc_id == input.documents[1].id));
    }
}

TEST_CASE("a poisoned document fails alone; the rest translate in order") {
    const CorpusManifest input = fixtures::make_corpus("en", 3, 21, 1);
    std::vector<std::string> texts;
    for (const auto& d : input.documents) texts.push_back(d.text);
    auto tok = char_model(texts);

    // Poison the first sentence of the middle document. Batch size 1 keeps
    // the failure from spilling into neighbouring documents.
    const std::string poison =
        text::split_sentences(input.documents[1].paragraph(0), "en")[0];
    PoisonBackend backend(poison);
    TranslateResult r = translate_corpus(input, backend, descriptor("poison", 1), tok,
                                         parse_language_tag("hi"), fast_options());

    CHECK(r.stats.failed_docs == 1);
    REQUIRE(r.synthetic.documents.size() == 2);
    CHECK(r.synthetic.documents[0].text == input.documents[0].text);
    CHECK(r.synthetic.documents[1].text == input.documents[2].text);  // order kept
    CHECK_FALSE(r.failures.empty());
    for (const auto& f : r.failures) {
        CHECK(f.doc_id == input.documents[1].id);
        CHECK(f.reason == "poisoned sentence");
    }
    // Records partition: ok for surviving docs, failed for the poisoned one.
    size_t ok = 0, failed = 0;
    for (const auto& rec : r.records) {
        CHECK_FALSE(rec.truncated);
        if (rec.failed) {
            ++failed;
            CHECK(rec.span.doc_id == input.documents[1].id);
        } else {
            ++ok;
        }
    }
    CHECK(ok + failed == r.records.size());
    CHECK(failed > 0);
}

TEST_CASE("a backend returning the wrong count is a recorded failure") {
    const CorpusManifest input = fixtures::make_corpus("en", 1, 3, 1);
    auto tok = char_model({input.documents[0].text});
    MiscountBackend backend;
    TranslateOptions opts = fast_options();
    opts.retry.max_attempts = 1;  // no second chance: the miscount surfaces
    TranslateResult r = translate_corpus(input, backend, descriptor("miscount", 64),
                                         tok, parse_language_tag("hi"), opts);
    CHECK(r.stats.failed_docs == 1);
    REQUIRE_FALSE(r.failures.empty());
    CHECK(r.failures[0].reason.find("translations") != std::string::npos);
}

// ---------------------------------------------------------------------------
// HTTP backend against a local mock server
// ---------------------------------------------------------------------------

TEST_CASE("http backend speaks the wire protocol") {
    httplib::Server server;
    nlohmann::json last_request;
    server.Post("/translate", [&](const httplib::Request& req, httplib::Response& res) {
        last_request = nlohmann::json::parse(req.body);
        nlohmann::json reply;
        reply["translations"] = nlohmann::json::array();
        for (const auto& s : last_request["sentences"]) {
            reply["translations"].push_back("«" + s.get<std::string>() + "»");
        }
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    server.Post("/short", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"translations":["only one"]})", "application/json");
    });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "application/json");
    });
    server.Post("/missing", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"result":"nope"})", "application/json");
    });
    server.Post("/nonstring", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"translations":[1,2]})", "application/json");
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    REQUIRE(server.is_running());
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    SUBCASE("request and response fields round-trip in order") {
        auto backend = make_backend(descriptor(base + "/translate"));
        auto out = backend->translate_batch({"one.", "two.", "three."});
        CHECK(out == std::vector<std::string>{"«one.»", "«two.»", "«three.»"});
        CHECK(last_request["src"] == "en");
        CHECK(last_request["tgt"] == "hi");
        CHECK(last_request["beam"] == 5);
        REQUIRE(last_request["sentences"].size() == 3);
        CHECK(last_request["sentences"][0] == "one.");
        CHECK(last_request["sentences"][2] == "three.");
    }
    SUBCASE("non-200 status is an error") {
        HttpBackend backend(descriptor(base + "/fail"));
        CHECK_THROWS_WITH_AS(backend.translate_batch({"x"}),
                             doctest::Contains("HTTP 500"), Error);
    }
    SUBCASE("length mismatch is a protocol violation") {
        HttpBackend backend(descriptor(base + "/short"));
        CHECK_THROWS_WITH_AS(backend.translate_batch({"x", "y"}),
                             doctest::Contains("protocol violation"), Error);
    }
    SUBCASE("unparsable body is an error") {
        HttpBackend backend(descriptor(base + "/garbage"));
        CHECK_THROWS_WITH_AS(backend.translate_batch({"x"}),
                             doctest::Contains("unparsable"), Error);
    }
    SUBCASE("missing translations array is a protocol violation") {
        HttpBackend backend(descriptor(base + "/missing"));
        CHECK_THROWS_WITH_AS(backend.translate_batch({"x"}),
                             doctest::Contains("protocol violation"), Error);
    }
    SUBCASE("non-string translation entries are a protocol violation") {
        HttpBackend backend(descriptor(base + "/nonstring"));
        CHECK_THROWS_WITH_AS(backend.translate_batch({"x"}),
                             doctest::Contains("protocol violation"), Error);
    }
    SUBCASE("translate_corpus works end-to-end over HTTP") {
        CorpusManifest input;
        input.lang = parse_language_tag("en");
        input.stage = "test";
        input.documents.push_back(make_document("hello there. bye now.", input.lang,
                                                "https://example.test/http/0", {}));
        auto tok = char_model({"hello there. bye now."});
        auto backend = make_backend(descriptor(base + "/translate"));
        TranslateResult r = translate_corpus(input, *backend,
                                             descriptor(base + "/translate"), tok,
                                             parse_language_tag("hi"), fast_options());
        REQUIRE(r.synthetic.documents.size() == 1);
        CHECK(r.synthetic.documents[0].text == "«hello there.» «bye now.»");
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("unreachable endpoint reports no response") {
    // Bind a port, then shut the server down so the connection is refused.
    httplib::Server server;
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    REQUIRE(server.is_running());
    server.stop();
    t.join();

    HttpBackend backend(descriptor("http://127.0.0.1:" + std::to_string(port) + "/t"));
    CHECK_THROWS_WITH_AS(backend.translate_batch({"x"}),
                         doctest::Contains("no response"), Error);
    CHECK_THROWS_AS(HttpBackend(descriptor("127.0.0.1/nope")), Error);
}

// ---------------------------------------------------------------------------
// Truncation detection and repair
// ---------------------------------------------------------------------------

TEST_CASE("truncation = exactly at the limit and no terminal punctuation") {
    auto tok = char_model({"abcde. xyz!?।"});
    auto record = [](std::string out) {
        TranslationRecord r;
        r.output = std::move(out);
        return r;
    };
    CHECK(detect_truncation(record("abcde"), tok, 5));        // at limit, cut off
    CHECK_FALSE(detect_truncation(record("abcd."), tok, 5));  // at limit, terminal
    CHECK_FALSE(detect_truncation(record("abcd"), tok, 5));   // under the limit
    CHECK_FALSE(detect_truncation(record("abcde"), tok, 6));  // under the limit
    CHECK_FALSE(detect_truncation(record("abcd।"), tok, 5));  // danda is terminal
    CHECK(detect_truncation(record("abcdx"), tok, 5));
    CHECK_FALSE(detect_truncation(record("abcd?"), tok, 5));
}

TEST_CASE("terminal stop ids cover learned and byte-fallback punctuation") {
    auto tok = char_model({"ab. cd! ef? gh।"});
    const std::set<TokenId> stops = terminal_stop_ids(tok);
    auto id_of = [&](const std::string& piece) {
        auto id = tok.piece_id(piece);
        REQUIRE(id.has_value());
        return *id;
    };
    CHECK(stops.count(id_of(".")) == 1);
    CHECK(stops.count(id_of("!")) == 1);
    CHECK(stops.count(id_of("?")) == 1);
    CHECK(stops.count(id_of("।")) == 1);
    CHECK(stops.count(id_of("a")) == 0);
    CHECK(stops.count(id_of("<0x2E>")) == 1);  // '.' through byte fallback
    CHECK(stops.count(id_of("<0x61>")) == 0);  // 'a' through byte fallback
    CHECK(stops.count(TokenizerModel::kEos) == 0);
}

TEST_CASE("an overfit LM completes a truncated sentence exactly") {
    RepairFixture fx = overfit_fixture("abc defg hijk.");

    TranslationRecord rec;
    rec.output = "abc defg hi";  // cut mid-word
    rec.truncated = true;
    TranslationRecord repaired = repair_truncated(rec, fx.lm, fx.tok, 64);
    CHECK(repaired.repaired);
    CHECK(repaired.truncated);
    CHECK(repaired.output == "abc defg hijk.");  // memorization oracle
    CHECK(repaired.raw_output == "abc defg hi");

    SUBCASE("non-truncated records pass through unchanged") {
        TranslationRecord ok;
        ok.output = "abc defg hijk.";
        TranslationRecord same = repair_truncated(ok, fx.lm, fx.tok, 64);
        CHECK_FALSE(same.repaired);
        CHECK(same.output == ok.output);
        CHECK(same.raw_output.empty());
    }
    SUBCASE("already-repaired records are not repaired twice") {
        TranslationRecord once = repaired;
        TranslationRecord twice = repair_truncated(once, fx.lm, fx.tok, 64);
        CHECK(twice.output == repaired.output);
    }
    SUBCASE("max_new bounds the completion") {
        TranslationRecord shortstop;
        shortstop.output = "abc defg hi";
        shortstop.truncated = true;
        TranslationRecord out = repair_truncated(shortstop, fx.lm, fx.tok, 1);
        CHECK(out.repaired);
        CHECK(out.output == "abc defg hij");  // one token, no terminal reached
    }
    SUBCASE("tokenizer/LM vocab mismatch is an error") {
        auto other = char_model({"different alphabet xyzw."});
        REQUIRE(other.vocab_size() != fx.tok.vocab_size());
        TranslationRecord bad;
        bad.output = "x";
        bad.truncated = true;
        CHECK_THROWS_WITH_AS(repair_truncated(bad, fx.lm, other, 8),
                             doctest::Contains("vocab"), Error);
    }
}

TEST_CASE("translate_corpus detects and repairs truncated outputs end-to-end") {
    RepairFixture fx = overfit_fixture("abc defg hijk.");

    CorpusManifest input;
    input.lang = parse_language_tag("en");
    input.stage = "test";
    input.documents.push_back(
        make_document("ok.", input.lang, "https://example.test/repair/0", {}));

    // The backend emits a 13-token translation with no terminal punctuation:
    // exactly at the limit below, so it reads as truncated.
    TableBackend backend(std::map<std::string, std::string>{{"ok.", "abc defg hijk"}});
    auto mt_tok = char_model({"ok.", "abc defg hijk."});
    REQUIRE(mt_tok.token_count("abc defg hijk") == 13);

    TranslateOptions opts = fast_options();
    opts.max_tokens = 13;
    opts.repair_lm = &fx.lm;
    opts.repair_tokenizer = &fx.tok;
    TranslateResult r = translate_corpus(input, backend, descriptor("table-direct"),
                                         mt_tok, parse_language_tag("hi"), opts);

    CHECK(r.stats.truncated == 1);
    CHECK(r.stats.repaired == 1);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].truncated);
    CHECK(r.records[0].repaired);
    CHECK(r.records[0].raw_output == "abc defg hijk");
    CHECK(r.records[0].output == "abc defg hijk.");
    REQUIRE(r.synthetic.documents.size() == 1);
    CHECK(r.synthetic.documents[0].text == "abc defg hijk.");
    CHECK(r.synthetic.documents[0].provenance.repaired);

    SUBCASE("without a repair LM the truncation is only flagged") {
        TranslateOptions detect_only = fast_options();
        detect_only.max_tokens = 13;
        TableBackend backend2(
            std::map<std::string, std::string>{{"ok.", "abc defg hijk"}});
        TranslateResult r2 = translate_corpus(input, backend2,
                                              descriptor("table-direct"), mt_tok,
                                              parse_language_tag("hi"), detect_only);
        CHECK(r2.stats.truncated == 1);
        CHECK(r2.stats.repaired == 0);
        REQUIRE(r2.records.size() == 1);
        CHECK(r2.records[0].truncated);
        CHECK_FALSE(r2.records[0].repaired);
        CHECK(r2.records[0].output == "abc defg hijk");
        CHECK_FALSE(r2.synthetic.documents[0].provenance.repaired);
    }
}
