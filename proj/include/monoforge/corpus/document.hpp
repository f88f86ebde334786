#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace monoforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ISO 639 code plus optional ISO 15924 script, e.g. {"hi", "Deva"}.
struct LanguageTag {
    std::string code;
    std::string script;

    bool operator==(const LanguageTag&) const = default;
    std::string str() const { return script.empty() ? code : code + "-" + script; }
};

// Validates and normalizes a tag such as "en" or "hi-Deva".
LanguageTag parse_language_tag(const std::string& s);

enum class ProvenanceKind { clean, synthetic };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::clean;
    std::optional<LanguageTag> source_lang;  // required iff synthetic
    std::string mt_model_id;
    bool repaired = false;

    bool operator==(const Provenance&) const = default;
};

// Byte span [begin, end) into Document::text.
struct ParagraphSpan {
    uint64_t begin = 0;
    uint64_t end = 0;

    bool operator==(const ParagraphSpan&) const = default;
};

struct Document {
    std::string id;  // 32-hex content hash, assigned at ingest
    LanguageTag lang;
    std::string url;
    std::string text;
    std::vector<ParagraphSpan> paragraphs;
    Provenance provenance;
    uint64_t word_tokens = 0;
    std::optional<uint64_t> bpe_tokens;

    bool operator==(const Document&) const = default;

    std::string_view paragraph(size_t i) const {
        const auto& p = paragraphs.at(i);
        return std::string_view(text).substr(p.begin, p.end - p.begin);
    }
};

struct CorpusManifest {
    std::vector<Document> documents;
    LanguageTag lang;
    std::string stage;
    std::string created_at;  // ISO 8601, UTC

    uint64_t total_word_tokens() const {
        uint64_t n = 0;
        for (const auto& d : documents) n += d.word_tokens;
        return n;
    }
};

// Unicode-whitespace token count (maximal non-whitespace runs).
uint64_t count_word_tokens(std::string_view text);

// 32-hex-digit content hash used for document ids: murmur3_128 of the key
// (url when present, else text), seed 0, rendered little-end-first.
std::string content_id(std::string_view key);

// Builds a document from normalized text: paragraphs from blank-line splits,
// word count, and a content id from (url or text).
Document make_document(std::string text, LanguageTag lang, std::string url,
                       Provenance provenance);

// Throws Error naming the offending document on any invariant violation:
// span ordering/bounds, word-count mismatch, duplicate ids, language mix,
// provenance/source_lang consistency.
void validate_document(const Document& doc);
void validate_manifest(const CorpusManifest& manifest);

}  // namespace monoforge
