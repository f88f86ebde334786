#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace monoforge::unicode {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// Decodes one UTF-8 sequence starting at `pos`. Advances `pos` past the
// sequence (or past one byte on malformed input) and reports malformed
// sequences as U+FFFD with `valid=false`.
struct Decoded {
    char32_t cp;
    bool valid;
};
Decoded decode_utf8(std::string_view s, size_t& pos);

void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

// Full decode; malformed bytes become U+FFFD. `replacements`, when given,
// receives the number of substitutions made.
std::vector<char32_t> decode_utf8_string(std::string_view s, size_t* replacements = nullptr);

// Canonical composition (NFC) over codepoints: canonical decomposition,
// canonical reordering, then primary-composite recombination. Hangul is
// handled algorithmically.
std::vector<char32_t> nfc(const std::vector<char32_t>& input);
std::string nfc_utf8(std::string_view s, size_t* replacements = nullptr);

bool is_whitespace(char32_t cp);   // Unicode White_Space
bool is_word_char(char32_t cp);    // categories L*, M*, N*
uint8_t combining_class(char32_t cp);
char32_t to_lower(char32_t cp);

std::string lowercase_utf8(std::string_view s);

// Number of maximal non-whitespace runs under Unicode whitespace splitting.
size_t count_whitespace_tokens(std::string_view s);

}  // namespace monoforge::unicode
