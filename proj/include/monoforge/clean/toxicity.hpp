#pragma once

#include <filesystem>
#include <string>
#include <unordered_set>

#include "monoforge/corpus/document.hpp"
#include "monoforge/corpus/manifest_io.hpp"

namespace monoforge {

// Lowercased surface forms (original + romanized). Entries carry no embedded
// whitespace.
struct ToxicWordList {
    LanguageTag lang;
    std::unordered_set<std::string> words;

    // UTF-8, one entry per line, '#' comments, blank lines ignored.
    static ToxicWordList load(const std::filesystem::path& path, const LanguageTag& lang);
    static ToxicWordList from_words(const LanguageTag& lang,
                                    const std::vector<std::string>& words);
};

struct ToxicityResult {
    CorpusManifest kept;
    std::vector<DroppedDocument> dropped;  // drop_reason = toxicity, detail = matched word
};

// Drops a document iff a whole-word, case-folded match of a list entry occurs
// in its text. When match_ratio > 0, drops instead when matches/words exceed
// the ratio.
ToxicityResult toxicity_filter(const CorpusManifest& manifest, const ToxicWordList& list,
                               double match_ratio = 0.0);

}  // namespace monoforge
