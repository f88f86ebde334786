#pragma once

#include <string>
#include <vector>

#include "monoforge/bpe/tokenizer.hpp"

namespace monoforge {

// A sentence partitioned into backend-sized pieces. Concatenating
// pieces[i] + joiners[i] ... + pieces.back() reproduces the sentence byte
// for byte; joiners hold whatever separator the splitter consumed (a space
// after clause punctuation, empty for hard token-boundary cuts).
struct ChunkSet {
    bool over_limit = false;
    std::vector<std::string> pieces;
    std::vector<std::string> joiners;  // size() == pieces.size() - 1
};

// Ensures no piece exceeds max_tokens under the MT tokenizer. Over-limit
// sentences are split greedily: the longest prefix ending after clause
// punctuation (, ; :) that fits, else a hard cut at the token boundary.
// Every emitted piece is re-checked against the tokenizer, so the limit
// holds for the strings actually sent, not just for token slices.
ChunkSet check_chunk(const std::string& sentence, const TokenizerModel& mt_tokenizer,
                     size_t max_tokens = 256);

// Inverse of the split: interleaves translated pieces with the recorded
// joiners. With the identity backend this reproduces the source sentence
// exactly.
std::string rejoin_chunks(const std::vector<std::string>& pieces,
                          const std::vector<std::string>& joiners);

}  // namespace monoforge
