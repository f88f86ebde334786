#include "monoforge/clean/normalize.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "monoforge/text/unicode.hpp"

namespace monoforge {

namespace {

using unicode::is_whitespace;

bool is_emoticon_or_symbol(char32_t cp) {
    // Emoticons, Miscellaneous Symbols (+ Pictographs), Transport and Map
    // Symbols, and the emoji modifier/variation machinery that rides along.
    return (cp >= 0x1F600 && cp <= 0x1F64F) ||
           (cp >= 0x2600 && cp <= 0x26FF) ||
           (cp >= 0x1F300 && cp <= 0x1F5FF) ||
           (cp >= 0x1F680 && cp <= 0x1F6FF) ||
           (cp >= 0x1F3FB && cp <= 0x1F3FF) ||
           cp == 0xFE0E || cp == 0xFE0F;
}

bool is_stripped_control(char32_t cp) {
    if (cp == U'\n' || cp == U'\t') return false;
    if (cp < 0x20 || (cp >= 0x7F && cp <= 0x9F)) return true;
    switch (cp) {
        case 0x00AD:  // soft hyphen
        case 0x200B:  // zero width space
        case 0x200E: case 0x200F:  // directional marks
        case 0x202A: case 0x202B: case 0x202C: case 0x202D: case 0x202E:
        case 0xFEFF:  // BOM / zero width no-break space
            return true;
        default:
            return false;
    }
    // ZWNJ/ZWJ (200C/200D) are meaningful in Indic scripts and stay.
}

bool tag_name_is_block(std::string_view name) {
    static constexpr std::array<std::string_view, 16> kBlock = {
        "p", "div", "br", "li", "ul", "ol", "tr", "table", "blockquote",
        "section", "article", "header", "footer", "h1", "h2", "h3",
    };
    return std::find(kBlock.begin(), kBlock.end(), name) != kBlock.end() ||
           (name.size() == 2 && name[0] == 'h' && std::isdigit(static_cast<unsigned char>(name[1])));
}

// Removes <...> markup. Block-level tags become paragraph breaks, everything
// else a space, so adjacent words never fuse.
std::string strip_tags(std::string_view in, size_t* removed) {
    std::string out;
    out.reserve(in.size());
    size_t i = 0;
    while (i < in.size()) {
        char c = in[i];
        if (c != '<') {
            out.push_back(c);
            ++i;
            continue;
        }
        // Comments: <!-- ... -->
        if (in.substr(i, 4) == "<!--") {
            size_t close = in.find("-->", i + 4);
            if (close == std::string_view::npos) {
                out.push_back(c);
                ++i;
                continue;
            }
            i = close + 3;
            if (removed) ++*removed;
            out.push_back(' ');
            continue;
        }
        size_t j = i + 1;
        if (j < in.size() && in[j] == '/') ++j;
        size_t name_start = j;
        while (j < in.size() && (std::isalnum(static_cast<unsigned char>(in[j])) || in[j] == '!')) ++j;
        if (j == name_start) {  // '<' not starting a tag, keep literal
            out.push_back(c);
            ++i;
            continue;
        }
        std::string name;
        for (size_t k = name_start; k < j; ++k) {
            name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(in[k]))));
        }
        size_t close = in.find('>', j);
        if (close == std::string_view::npos) {
            out.push_back(c);
            ++i;
            continue;
        }
        out.append(tag_name_is_block(name) ? "\n\n" : " ");
        if (removed) ++*removed;
        i = close + 1;
    }
    return out;
}

}  // namespace

std::string normalize_text(std::string_view raw, NormalizeStats* stats) {
    NormalizeStats local;
    std::string untagged = strip_tags(raw, &local.tags_removed);

    auto cps = unicode::decode_utf8_string(untagged, &local.utf8_replacements);

    std::vector<char32_t> filtered;
    filtered.reserve(cps.size());
    for (size_t i = 0; i < cps.size(); ++i) {
        char32_t cp = cps[i];
        if (cp == U'\r') {  // \r\n and bare \r both mean newline
            if (i + 1 < cps.size() && cps[i + 1] == U'\n') continue;
            filtered.push_back(U'\n');
            continue;
        }
        if (is_stripped_control(cp)) continue;
        if (is_emoticon_or_symbol(cp)) {
            ++local.symbols_removed;
            continue;
        }
        filtered.push_back(cp);
    }

    auto composed = unicode::nfc(filtered);

    // Whitespace: a run with >= 2 newlines is a paragraph break, any other
    // run is a single space. Edges trimmed.
    std::vector<char32_t> out;
    out.reserve(composed.size());
    size_t i = 0;
    while (i < composed.size()) {
        if (!is_whitespace(composed[i])) {
            out.push_back(composed[i]);
            ++i;
            continue;
        }
        int newlines = 0;
        while (i < composed.size() && is_whitespace(composed[i])) {
            if (composed[i] == U'\n') ++newlines;
            ++i;
        }
        if (out.empty() || i >= composed.size()) continue;  // trim edges
        if (newlines >= 2) {
            out.push_back(U'\n');
            out.push_back(U'\n');
        } else {
            out.push_back(U' ');
        }
    }

    if (stats) {
        stats->utf8_replacements += local.utf8_replacements;
        stats->tags_removed += local.tags_removed;
        stats->symbols_removed += local.symbols_removed;
    }
    return unicode::encode_utf8(out);
}

Document ingest_document(std::string_view raw_text, const LanguageTag& lang,
                         std::string url, Provenance provenance,
                         NormalizeStats* stats) {
    std::string cleaned = normalize_text(raw_text, stats);
    return make_document(std::move(cleaned), lang, std::move(url), std::move(provenance));
}

}  // namespace monoforge
