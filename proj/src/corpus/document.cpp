#include "monoforge/corpus/document.hpp"

#include <cctype>
#include <unordered_set>

#include "monoforge/clean/murmur3.hpp"
#include "monoforge/text/unicode.hpp"

namespace monoforge {

LanguageTag parse_language_tag(const std::string& s) {
    LanguageTag tag;
    auto dash = s.find('-');
    tag.code = s.substr(0, dash);
    if (dash != std::string::npos) tag.script = s.substr(dash + 1);
    if (tag.code.empty()) throw Error("language tag: empty code");
    for (char c : tag.code) {
        if (!std::islower(static_cast<unsigned char>(c))) {
            throw Error("language tag '" + s + "': code must be lowercase ASCII");
        }
    }
    return tag;
}

uint64_t count_word_tokens(std::string_view text) {
    return unicode::count_whitespace_tokens(text);
}

std::string content_id(std::string_view key) {
    auto h = murmur3_128(key, 0);
    static const char* hex = "0123456789abcdef";
    std::string out(32, '0');
    for (int i = 0; i < 8; ++i) {
        out[2 * i] = hex[(h.h1 >> (8 * i + 4)) & 0xF];
        out[2 * i + 1] = hex[(h.h1 >> (8 * i)) & 0xF];
        out[16 + 2 * i] = hex[(h.h2 >> (8 * i + 4)) & 0xF];
        out[16 + 2 * i + 1] = hex[(h.h2 >> (8 * i)) & 0xF];
    }
    return out;
}

Document make_document(std::string text, LanguageTag lang, std::string url,
                       Provenance provenance) {
    Document doc;
    doc.lang = std::move(lang);
    doc.url = std::move(url);
    doc.text = std::move(text);
    doc.provenance = std::move(provenance);
    doc.word_tokens = count_word_tokens(doc.text);
    doc.id = content_id(doc.url.empty() ? std::string_view(doc.text)
                                        : std::string_view(doc.url));

    // Paragraphs delimited by blank lines in normalized text.
    size_t start = 0;
    while (start < doc.text.size()) {
        size_t brk = doc.text.find("\n\n", start);
        size_t end = (brk == std::string::npos) ? doc.text.size() : brk;
        if (end > start) doc.paragraphs.push_back({start, end});
        if (brk == std::string::npos) break;
        start = brk + 2;
    }
    if (doc.paragraphs.empty() && !doc.text.empty()) {
        doc.paragraphs.push_back({0, doc.text.size()});
    }
    return doc;
}

void validate_document(const Document& doc) {
    if (doc.id.empty()) throw Error("document with empty id");
    uint64_t prev_end = 0;
    bool first = true;
    for (const auto& p : doc.paragraphs) {
        if (p.begin > p.end || p.end > doc.text.size()) {
            throw Error("doc " + doc.id + ": paragraph span out of bounds");
        }
        if (!first && p.begin < prev_end) {
            throw Error("doc " + doc.id + ": overlapping or unordered paragraph spans");
        }
        prev_end = p.end;
        first = false;
    }
    if (doc.word_tokens != count_word_tokens(doc.text)) {
        throw Error("doc " + doc.id + ": word_tokens does not match text");
    }
    if (doc.provenance.kind == ProvenanceKind::clean && doc.provenance.source_lang) {
        throw Error("doc " + doc.id + ": clean provenance must not carry source_lang");
    }
    if (doc.provenance.kind == ProvenanceKind::synthetic && !doc.provenance.source_lang) {
        throw Error("doc " + doc.id + ": synthetic provenance requires source_lang");
    }
}

void validate_manifest(const CorpusManifest& manifest) {
    std::unordered_set<std::string> ids;
    ids.reserve(manifest.documents.size());
    for (const auto& doc : manifest.documents) {
        validate_document(doc);
        if (doc.lang != manifest.lang) {
            throw Error("doc " + doc.id + ": language " + doc.lang.str() +
                        " differs from manifest language " + manifest.lang.str());
        }
        if (!ids.insert(doc.id).second) {
            throw Error("duplicate document id " + doc.id);
        }
    }
}

}  // namespace monoforge
