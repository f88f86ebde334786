#pragma once

// Deterministic synthetic-corpus helpers shared by the test binaries.
// Two "languages" with disjoint scripts: pseudo-English (Latin syllables)
// and pseudo-Hindi (Devanagari syllables), so LID fixtures are
// well-separated by construction.

#include <set>
#include <string>
#include <vector>

#include "monoforge/bpe/tokenizer.hpp"
#include "monoforge/clean/normalize.hpp"
#include "monoforge/corpus/document.hpp"
#include "monoforge/text/unicode.hpp"
#include "monoforge/util/rng.hpp"

namespace fixtures {

// Character-level tokenizer: vocab fixed at the base symbol count so no
// merges are learned and token_count == codepoints (spaces become single
// marker tokens). Makes token arithmetic in tests exact.
inline monoforge::TokenizerModel char_model(const std::vector<std::string>& texts) {
    std::set<char32_t> chars;
    for (const auto& t : texts) {
        for (char32_t cp : monoforge::unicode::decode_utf8_string(t)) {
            if (cp != U' ') chars.insert(cp);
        }
    }
    // Base inventory: specials, byte pieces, the distinct characters, and
    // the word marker (always present in the trainer's inventory).
    const size_t base = monoforge::TokenizerModel::kSpecialCount + 256 +
                        chars.size() + 1;
    return monoforge::TokenizerModel::train(texts, base, true);
}

inline std::string latin_word(monoforge::Rng& rng) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                   "p", "r", "s", "t", "v", "st", "tr", "pl"};
    static const char* nuclei[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    static const char* codas[] = {"", "n", "r", "s", "t", "nd", "st"};
    std::string w;
    const size_t syllables = 1 + rng.next_below(3);
    for (size_t s = 0; s < syllables; ++s) {
        w += onsets[rng.next_below(16)];
        w += nuclei[rng.next_below(7)];
    }
    w += codas[rng.next_below(7)];
    return w;
}

inline std::string devanagari_word(monoforge::Rng& rng) {
    // Consonants U+0915..U+0939, matras U+093E..U+0942.
    std::string w;
    const size_t syllables = 1 + rng.next_below(3);
    for (size_t s = 0; s < syllables; ++s) {
        monoforge::unicode::append_utf8(w, static_cast<char32_t>(0x0915 + rng.next_below(0x39 - 0x15 + 1)));
        if (rng.next_below(2)) {
            monoforge::unicode::append_utf8(w, static_cast<char32_t>(0x093E + rng.next_below(5)));
        }
    }
    return w;
}

inline std::string make_sentence(monoforge::Rng& rng, bool devanagari, size_t words) {
    std::string s;
    for (size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += devanagari ? devanagari_word(rng) : latin_word(rng);
    }
    s += devanagari ? "।" : ".";
    return s;
}

inline std::string make_paragraph(monoforge::Rng& rng, bool devanagari,
                                  size_t sentences = 3) {
    std::string p;
    for (size_t i = 0; i < sentences; ++i) {
        if (i) p += ' ';
        p += make_sentence(rng, devanagari, 4 + rng.next_below(6));
    }
    return p;
}

inline std::string make_text(monoforge::Rng& rng, bool devanagari,
                             size_t paragraphs = 3) {
    std::string t;
    for (size_t i = 0; i < paragraphs; ++i) {
        if (i) t += "\n\n";
        t += make_paragraph(rng, devanagari);
    }
    return t;
}

inline monoforge::CorpusManifest make_corpus(const std::string& lang, size_t n_docs,
                                             uint64_t seed, size_t paragraphs = 3) {
    monoforge::Rng rng(seed);
    const bool devanagari = lang != "en";
    monoforge::CorpusManifest corpus;
    corpus.lang = monoforge::parse_language_tag(lang);
    corpus.stage = "test";
    for (size_t d = 0; d < n_docs; ++d) {
        corpus.documents.push_back(monoforge::make_document(
            make_text(rng, devanagari, paragraphs), corpus.lang,
            "https://example.test/" + lang + "/" + std::to_string(seed) + "/" +
                std::to_string(d),
            {}));
    }
    return corpus;
}

}  // namespace fixtures
