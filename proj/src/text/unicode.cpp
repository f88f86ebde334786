#include "monoforge/text/unicode.hpp"

#include <algorithm>

#include "monoforge/text/unicode_tables.hpp"

namespace monoforge::unicode {

namespace {

constexpr char32_t kHangulSBase = 0xAC00;
constexpr char32_t kHangulLBase = 0x1100;
constexpr char32_t kHangulVBase = 0x1161;
constexpr char32_t kHangulTBase = 0x11A7;
constexpr int kHangulLCount = 19;
constexpr int kHangulVCount = 21;
constexpr int kHangulTCount = 28;
constexpr int kHangulNCount = kHangulVCount * kHangulTCount;
constexpr int kHangulSCount = kHangulLCount * kHangulNCount;

const unicode_tables::DecompEntry* find_decomp(char32_t cp) {
    const auto* begin = std::begin(unicode_tables::kDecomp);
    const auto* end = std::end(unicode_tables::kDecomp);
    const auto* it = std::lower_bound(begin, end, cp,
        [](const unicode_tables::DecompEntry& e, char32_t c) { return e.cp < c; });
    return (it != end && it->cp == cp) ? it : nullptr;
}

void decompose_cp(char32_t cp, std::vector<char32_t>& out) {
    if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
        char32_t sindex = cp - kHangulSBase;
        out.push_back(kHangulLBase + sindex / kHangulNCount);
        out.push_back(kHangulVBase + (sindex % kHangulNCount) / kHangulTCount);
        char32_t t = sindex % kHangulTCount;
        if (t != 0) out.push_back(kHangulTBase + t);
        return;
    }
    if (const auto* e = find_decomp(cp)) {
        for (uint32_t i = 0; i < e->len; ++i) {
            out.push_back(unicode_tables::kDecompPool[e->offset + i]);
        }
        return;
    }
    out.push_back(cp);
}

char32_t compose_pair(char32_t a, char32_t b) {
    // Hangul LV / LVT composition.
    if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount &&
        b >= kHangulVBase && b < kHangulVBase + kHangulVCount) {
        return kHangulSBase + ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) * kHangulTCount;
    }
    if (a >= kHangulSBase && a < kHangulSBase + kHangulSCount &&
        (a - kHangulSBase) % kHangulTCount == 0 &&
        b > kHangulTBase && b < kHangulTBase + kHangulTCount) {
        return a + (b - kHangulTBase);
    }
    const auto* begin = std::begin(unicode_tables::kCompose);
    const auto* end = std::end(unicode_tables::kCompose);
    const auto* it = std::lower_bound(begin, end, a,
        [](const unicode_tables::ComposeEntry& e, char32_t c) { return e.first < c; });
    for (; it != end && it->first == a; ++it) {
        if (it->second == b) return it->composite;
    }
    return 0;
}

}  // namespace

Decoded decode_utf8(std::string_view s, size_t& pos) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(s.data());
    unsigned char b0 = bytes[pos];
    if (b0 < 0x80) {
        ++pos;
        return {b0, true};
    }
    int len;
    char32_t cp;
    char32_t min;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2; cp = b0 & 0x1F; min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3; cp = b0 & 0x0F; min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4; cp = b0 & 0x07; min = 0x10000;
    } else {
        ++pos;
        return {kReplacementChar, false};
    }
    if (pos + len > s.size()) {
        ++pos;
        return {kReplacementChar, false};
    }
    for (int i = 1; i < len; ++i) {
        unsigned char b = bytes[pos + i];
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return {kReplacementChar, false};
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    // Overlong forms, surrogates, and out-of-range values are malformed.
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return {kReplacementChar, false};
    }
    pos += len;
    return {cp, true};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

std::vector<char32_t> decode_utf8_string(std::string_view s, size_t* replacements) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t bad = 0;
    size_t pos = 0;
    while (pos < s.size()) {
        Decoded d = decode_utf8(s, pos);
        if (!d.valid) ++bad;
        out.push_back(d.cp);
    }
    if (replacements) *replacements = bad;
    return out;
}

uint8_t combining_class(char32_t cp) {
    const auto* begin = std::begin(unicode_tables::kCombiningClass);
    const auto* end = std::end(unicode_tables::kCombiningClass);
    const auto* it = std::lower_bound(begin, end, cp,
        [](const unicode_tables::CccEntry& e, char32_t c) { return e.cp < c; });
    return (it != end && it->cp == cp) ? it->ccc : 0;
}

std::vector<char32_t> nfc(const std::vector<char32_t>& input) {
    // 1. Full canonical decomposition.
    std::vector<char32_t> d;
    d.reserve(input.size() + input.size() / 2);
    for (char32_t cp : input) decompose_cp(cp, d);

    // 2. Canonical ordering: stable bubble of combining marks.
    for (size_t i = 1; i < d.size(); ++i) {
        uint8_t cc = combining_class(d[i]);
        if (cc == 0) continue;
        size_t j = i;
        while (j > 0) {
            uint8_t prev = combining_class(d[j - 1]);
            if (prev == 0 || prev <= cc) break;
            std::swap(d[j - 1], d[j]);
            --j;
        }
    }

    // 3. Canonical composition.
    if (d.empty()) return d;
    std::vector<char32_t> out;
    out.reserve(d.size());
    size_t starter = std::string::npos;  // index in `out` of last starter
    int last_cc = -1;
    for (char32_t cp : d) {
        uint8_t cc = combining_class(cp);
        if (starter != std::string::npos && (last_cc < static_cast<int>(cc) || last_cc == -1)) {
            if (char32_t comp = compose_pair(out[starter], cp); comp != 0) {
                out[starter] = comp;
                continue;
            }
        }
        if (cc == 0) {
            starter = out.size();
            last_cc = -1;
        } else {
            last_cc = cc;
        }
        out.push_back(cp);
    }
    return out;
}

std::string nfc_utf8(std::string_view s, size_t* replacements) {
    return encode_utf8(nfc(decode_utf8_string(s, replacements)));
}

bool is_whitespace(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_word_char(char32_t cp) {
    const auto* begin = std::begin(unicode_tables::kWordChar);
    const auto* end = std::end(unicode_tables::kWordChar);
    const auto* it = std::upper_bound(begin, end, cp,
        [](char32_t c, const unicode_tables::Range& r) { return c < r.lo; });
    return it != begin && cp <= (it - 1)->hi;
}

char32_t to_lower(char32_t cp) {
    const auto* begin = std::begin(unicode_tables::kToLower);
    const auto* end = std::end(unicode_tables::kToLower);
    const auto* it = std::lower_bound(begin, end, cp,
        [](const unicode_tables::LowerEntry& e, char32_t c) { return e.cp < c; });
    return (it != end && it->cp == cp) ? it->lower : cp;
}

std::string lowercase_utf8(std::string_view s) {
    auto cps = decode_utf8_string(s);
    for (auto& cp : cps) cp = to_lower(cp);
    return encode_utf8(cps);
}

size_t count_whitespace_tokens(std::string_view s) {
    size_t count = 0;
    bool in_token = false;
    size_t pos = 0;
    while (pos < s.size()) {
        Decoded d = decode_utf8(s, pos);
        bool ws = d.valid && is_whitespace(d.cp);
        if (!ws && !in_token) {
            ++count;
            in_token = true;
        } else if (ws) {
            in_token = false;
        }
    }
    return count;
}

}  // namespace monoforge::unicode
