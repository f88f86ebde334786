#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "monoforge/bpe/token_id.hpp"
#include "monoforge/corpus/document.hpp"

namespace monoforge {

// Shared multilingual BPE subword model. Whitespace is marked with a
// meta symbol (U+2581) replacing each space, so decoding is lossless; a
// literal U+2581 in the input is never a learnable symbol and always takes
// the byte-fallback route, which keeps the two unambiguous.
class TokenizerModel {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kBos = 2;
    static constexpr TokenId kEos = 3;
    static constexpr TokenId kSep = 4;
    static constexpr TokenId kSpecialCount = 5;
    static constexpr char32_t kWordMarker = 0x2581;  // '▁'

    struct EncodeStats {
        size_t unk_emitted = 0;
        size_t byte_fallbacks = 0;
    };

    size_t vocab_size() const { return pieces_.size(); }
    bool byte_fallback() const { return byte_fallback_; }
    size_t merge_count() const { return merges_.size(); }
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

    const std::string& piece(TokenId id) const;
    std::optional<TokenId> piece_id(const std::string& piece) const;
    static bool is_special(TokenId id) { return id >= 0 && id < kSpecialCount; }
    bool is_byte(TokenId id) const {
        return byte_fallback_ && id >= kSpecialCount && id < kSpecialCount + 256;
    }

    std::vector<TokenId> encode(std::string_view text, EncodeStats* stats = nullptr) const;
    std::string decode(const std::vector<TokenId>& ids) const;
    size_t token_count(std::string_view text) const { return encode(text).size(); }

    void save(const std::filesystem::path& path) const;
    static TokenizerModel load(const std::filesystem::path& path);

    // Greedy highest-frequency pair merging until |vocab| == vocab_size.
    // Frequency ties break to the lexicographically smaller (left, right)
    // pair. Deterministic given the sentence order.
    static TokenizerModel train(const std::vector<std::string>& sentences,
                                size_t vocab_size, bool byte_fallback);

private:
    friend class BpeTrainer;

    void finalize_tables();

    std::vector<std::string> pieces_;  // id -> piece string
    std::vector<std::pair<std::string, std::string>> merges_;
    bool byte_fallback_ = true;

    // Derived, rebuilt by finalize_tables().
    std::unordered_map<std::string, TokenId> piece_to_id_;
    std::unordered_map<char32_t, TokenId> char_to_id_;
    struct PairHash {
        size_t operator()(const std::pair<TokenId, TokenId>& p) const {
            return std::hash<uint64_t>()((uint64_t(uint32_t(p.first)) << 32) | uint32_t(p.second));
        }
    };
    std::unordered_map<std::pair<TokenId, TokenId>, std::pair<int, TokenId>, PairHash>
        merge_rank_;  // (left,right) -> (rank, merged id)
};

// Accepted-config validation for training presets (e.g. the 56000-subword
// production vocabulary); throws on out-of-range values.
struct TokenizerConfig {
    size_t vocab_size = 56000;
    bool byte_fallback = true;

    void validate() const;
};

}  // namespace monoforge
