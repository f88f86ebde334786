#include "monoforge/translate/chunk.hpp"

#include "monoforge/text/unicode.hpp"

namespace monoforge {

namespace {

bool is_clause_punct(char32_t cp) { return cp == U',' || cp == U';' || cp == U':'; }

// True when the string does not end in the middle of a UTF-8 sequence
// (hard cuts through byte-fallback tokens can land mid-codepoint).
bool utf8_complete_tail(std::string_view s) {
    if (s.empty()) return true;
    size_t back = 0;
    for (size_t i = s.size(); i > 0 && back < 4;) {
        --i;
        ++back;
        const unsigned char b = static_cast<unsigned char>(s[i]);
        if ((b & 0x80) == 0) return back == 1;  // ASCII only valid as the last byte
        if ((b & 0xC0) == 0xC0) {
            const size_t need = (b & 0xE0) == 0xC0   ? 2
                                : (b & 0xF0) == 0xE0 ? 3
                                : (b & 0xF8) == 0xF0 ? 4
                                                     : 1;
            return back == need;
        }
        // Continuation byte: keep walking back to the lead.
    }
    return false;
}

// Longest prefix of `text` that ends right after clause punctuation, is
// followed by whitespace, and fits max_tokens. Returns the byte length of
// the prefix and of the whitespace run after it (0, 0 when none fits).
std::pair<size_t, size_t> clause_split(const std::string& text,
                                       const TokenizerModel& tok, size_t max_tokens) {
    size_t best_len = 0, best_ws = 0;
    size_t i = 0;
    while (i < text.size()) {
        size_t next = i;
        const char32_t cp = unicode::decode_utf8(text, next).cp;
        if (is_clause_punct(cp) && next < text.size()) {
            size_t ws_end = next;
            size_t probe = next;
            while (probe < text.size()) {
                size_t after = probe;
                if (!unicode::is_whitespace(unicode::decode_utf8(text, after).cp)) break;
                probe = after;
                ws_end = after;
            }
            if (ws_end > next && ws_end < text.size()) {
                const std::string prefix = text.substr(0, next);
                if (tok.token_count(prefix) <= max_tokens) {
                    best_len = next;
                    best_ws = ws_end - next;
                } else {
                    break;  // longer prefixes only grow past the limit
                }
            }
        }
        i = next;
    }
    return {best_len, best_ws};
}

// Hard cut: decode of the first k tokens is a byte prefix of the text, so
// shrink k until the prefix is complete UTF-8 and re-encodes within the
// limit.
size_t hard_split(const std::string& text, const TokenizerModel& tok,
                  size_t max_tokens) {
    const std::vector<TokenId> ids = tok.encode(text);
    size_t k = std::min(max_tokens, ids.size() - 1);
    while (k > 0) {
        const std::vector<TokenId> head(ids.begin(), ids.begin() + k);
        const std::string piece = tok.decode(head);
        // decode() of a token prefix is normally a byte prefix of the text;
        // the compare guards the unk case where decode drops characters.
        if (!piece.empty() && piece.size() < text.size() &&
            text.compare(0, piece.size(), piece) == 0 && utf8_complete_tail(piece) &&
            tok.token_count(piece) <= max_tokens) {
            return piece.size();
        }
        --k;
    }
    throw Error("check_chunk: cannot split sentence within token limit");
}

}  // namespace

ChunkSet check_chunk(const std::string& sentence, const TokenizerModel& mt_tokenizer,
                     size_t max_tokens) {
    if (max_tokens == 0) throw Error("check_chunk: max_tokens must be positive");
    ChunkSet result;
    if (mt_tokenizer.token_count(sentence) <= max_tokens) {
        result.pieces.push_back(sentence);
        return result;
    }
    result.over_limit = true;
    std::string rest = sentence;
    while (mt_tokenizer.token_count(rest) > max_tokens) {
        auto [punct_len, ws_len] = clause_split(rest, mt_tokenizer, max_tokens);
        if (punct_len > 0) {
            result.pieces.push_back(rest.substr(0, punct_len));
            result.joiners.push_back(rest.substr(punct_len, ws_len));
            rest = rest.substr(punct_len + ws_len);
        } else {
            const size_t cut = hard_split(rest, mt_tokenizer, max_tokens);
            result.pieces.push_back(rest.substr(0, cut));
            result.joiners.push_back("");
            rest = rest.substr(cut);
        }
    }
    result.pieces.push_back(rest);
    return result;
}

std::string rejoin_chunks(const std::vector<std::string>& pieces,
                          const std::vector<std::string>& joiners) {
    if (pieces.empty()) return "";
    if (joiners.size() + 1 != pieces.size()) {
        throw Error("rejoin_chunks: " + std::to_string(pieces.size()) + " pieces need " +
                    std::to_string(pieces.size() - 1) + " joiners, got " +
                    std::to_string(joiners.size()));
    }
    std::string out = pieces[0];
    for (size_t i = 1; i < pieces.size(); ++i) {
        out += joiners[i - 1];
        out += pieces[i];
    }
    return out;
}

}  // namespace monoforge
