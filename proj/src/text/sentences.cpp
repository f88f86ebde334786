#include "monoforge/text/sentences.hpp"

#include "monoforge/text/unicode.hpp"

namespace monoforge::text {

namespace {

bool is_terminal(char32_t cp) {
    return cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x0964 || cp == 0x0965;
}

// Quotes and brackets that may trail the terminal mark and still belong to
// the sentence.
bool is_closer(char32_t cp) {
    switch (cp) {
        case U'"': case U'\'': case U')': case U']': case U'}':
        case 0x2019: case 0x201D: case 0x00BB:
            return true;
        default:
            return false;
    }
}

}  // namespace

const std::set<std::string>& nonbreaking_prefixes(const std::string& lang) {
    static const std::set<std::string> en = {
        "Adj", "Adm", "Adv", "Asst", "Bart", "Bldg", "Brig", "Bros", "Capt",
        "Cmdr", "Col", "Comdr", "Con", "Corp", "Cpl", "DR", "Dr", "Drs",
        "Ens", "Gen", "Gov", "Hon", "Hr", "Hosp", "Insp", "Lt", "MM", "MR",
        "MRS", "MS", "Maj", "Messrs", "Mlle", "Mme", "Mr", "Mrs", "Ms",
        "Msgr", "Op", "Ord", "Pfc", "Ph", "Prof", "Pvt", "Rep", "Reps",
        "Res", "Rev", "Rt", "Sen", "Sens", "Sfc", "Sgt", "Sr", "St", "Supt",
        "Surg", "etc", "v", "vs", "i.e", "e.g", "No", "Nos", "Art", "Nr",
        "pp", "Vol", "Fig", "approx",
    };
    static const std::set<std::string> none;
    if (lang == "en") return en;
    return none;
}

std::vector<std::string> split_sentences(std::string_view text,
                                         const std::set<std::string>& prefixes) {
    auto cps = unicode::decode_utf8_string(text);
    std::vector<std::string> out;

    std::u32string current;
    std::u32string last_word;  // word-char run immediately before the cursor
    auto flush = [&] {
        // Trim and emit.
        size_t b = 0, e = current.size();
        while (b < e && unicode::is_whitespace(current[b])) ++b;
        while (e > b && unicode::is_whitespace(current[e - 1])) --e;
        if (e > b) {
            std::string s;
            for (size_t i = b; i < e; ++i) unicode::append_utf8(s, current[i]);
            out.push_back(std::move(s));
        }
        current.clear();
    };

    size_t i = 0;
    while (i < cps.size()) {
        char32_t cp = cps[i];
        if (unicode::is_word_char(cp)) {
            last_word.push_back(cp);
        } else if (!is_terminal(cp)) {
            last_word.clear();
        }
        if (!is_terminal(cp)) {
            current.push_back(cp);
            ++i;
            continue;
        }

        // Consume the terminal run plus trailing closers into the sentence.
        current.push_back(cp);
        size_t j = i + 1;
        while (j < cps.size() && (is_terminal(cps[j]) || is_closer(cps[j]))) {
            current.push_back(cps[j]);
            ++j;
        }

        bool boundary = j >= cps.size() || unicode::is_whitespace(cps[j]);
        if (boundary && cp == U'.' && !last_word.empty()) {
            std::string word;
            for (char32_t w : last_word) unicode::append_utf8(word, w);
            if (last_word.size() == 1 || prefixes.count(word)) boundary = false;
        }
        last_word.clear();
        if (boundary) flush();
        i = j;
    }
    flush();
    return out;
}

std::vector<std::string> split_sentences(std::string_view text, const std::string& lang) {
    return split_sentences(text, nonbreaking_prefixes(lang));
}

bool ends_with_terminal_punct(std::string_view text) {
    std::vector<char32_t> cps = unicode::decode_utf8_string(text);
    size_t i = cps.size();
    while (i > 0 && (unicode::is_whitespace(cps[i - 1]) || is_closer(cps[i - 1]))) --i;
    return i > 0 && is_terminal(cps[i - 1]);
}

}  // namespace monoforge::text
