#include "monoforge/clean/toxicity.hpp"

#include <fstream>

#include "monoforge/text/unicode.hpp"

namespace monoforge {

namespace {

std::string_view trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Words are maximal runs of letters, marks, and digits; everything else is a
// boundary. Marks must count as word characters or Indic matras would split
// words apart.
void for_each_word(std::string_view text, auto&& fn) {
    auto cps = unicode::decode_utf8_string(text);
    std::string word;
    for (char32_t cp : cps) {
        if (unicode::is_word_char(cp)) {
            unicode::append_utf8(word, unicode::to_lower(cp));
        } else if (!word.empty()) {
            fn(word);
            word.clear();
        }
    }
    if (!word.empty()) fn(word);
}

}  // namespace

ToxicWordList ToxicWordList::load(const std::filesystem::path& path, const LanguageTag& lang) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open toxic word list " + path.string());
    ToxicWordList list;
    list.lang = lang;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        auto entry = trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        if (entry.find(' ') != std::string_view::npos ||
            entry.find('\t') != std::string_view::npos) {
            throw Error("toxic word list " + path.string() + ": line " +
                        std::to_string(line_number) + " has embedded whitespace");
        }
        list.words.insert(unicode::lowercase_utf8(entry));
    }
    return list;
}

ToxicWordList ToxicWordList::from_words(const LanguageTag& lang,
                                        const std::vector<std::string>& words) {
    ToxicWordList list;
    list.lang = lang;
    for (const auto& w : words) {
        if (w.empty()) throw Error("toxic word list: empty entry");
        list.words.insert(unicode::lowercase_utf8(w));
    }
    return list;
}

ToxicityResult toxicity_filter(const CorpusManifest& manifest, const ToxicWordList& list,
                               double match_ratio) {
    if (list.lang != manifest.lang) {
        throw Error("toxicity_filter: list language " + list.lang.str() +
                    " does not match manifest language " + manifest.lang.str());
    }
    ToxicityResult result;
    result.kept.lang = manifest.lang;
    result.kept.stage = "toxicity";
    result.kept.created_at = manifest.created_at;
    for (const auto& doc : manifest.documents) {
        uint64_t matches = 0;
        uint64_t words = 0;
        std::string first_match;
        for_each_word(doc.text, [&](const std::string& word) {
            ++words;
            if (list.words.contains(word)) {
                if (matches == 0) first_match = word;
                ++matches;
            }
        });
        const bool drop = match_ratio > 0.0
            ? (words > 0 && static_cast<double>(matches) / static_cast<double>(words) > match_ratio)
            : matches > 0;
        if (drop) {
            result.dropped.push_back({doc, "toxicity", first_match});
        } else {
            result.kept.documents.push_back(doc);
        }
    }
    return result;
}

}  // namespace monoforge
