#pragma once

#include <string>
#include <string_view>

#include "monoforge/corpus/document.hpp"

namespace monoforge {

struct NormalizeStats {
    size_t utf8_replacements = 0;
    size_t tags_removed = 0;
    size_t symbols_removed = 0;
};

// HTML tags out, emoticon/control codepoints stripped, NFC, whitespace runs
// collapsed to single spaces, paragraph breaks (>= 2 newlines) kept as one
// blank line. Invalid UTF-8 becomes U+FFFD and is counted. Idempotent.
std::string normalize_text(std::string_view raw, NormalizeStats* stats = nullptr);

// Rebuilds a document from raw text: normalize, paragraph spans, token count,
// content id from (url or normalized text).
Document ingest_document(std::string_view raw_text, const LanguageTag& lang,
                         std::string url, Provenance provenance,
                         NormalizeStats* stats = nullptr);

}  // namespace monoforge
