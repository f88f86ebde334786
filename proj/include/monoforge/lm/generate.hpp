#pragma once

#include <set>

#include "monoforge/lm/forward.hpp"

namespace monoforge {

// Greedy continuation: repeatedly appends the argmax next token (ties break
// toward the lowest id) until max_new tokens were added or a stop id was
// produced. The stop token, when hit, is included in the returned ids.
// When the sequence outgrows the context window, the visible window slides
// to the last context_len tokens.
template <typename S>
std::vector<TokenId> generate(const TinyLMParams<S>& params,
                              std::span<const TokenId> prefix, size_t max_new,
                              const std::set<TokenId>& stop_ids = {}) {
    if (prefix.empty()) throw Error("generate: empty prefix");
    if (prefix.size() > params.config.context_len) {
        throw Error("generate: prefix longer than context window");
    }
    std::vector<TokenId> ids(prefix.begin(), prefix.end());
    for (size_t n = 0; n < max_new; ++n) {
        const size_t start =
            ids.size() > params.config.context_len ? ids.size() - params.config.context_len : 0;
        std::span<const TokenId> window(ids.data() + start, ids.size() - start);
        LmMat<S> logits = forward(params, window);
        const Eigen::Index last = logits.rows() - 1;
        TokenId best = 0;
        S best_val = logits(last, 0);
        for (Eigen::Index c = 1; c < logits.cols(); ++c) {
            if (logits(last, c) > best_val) {
                best_val = logits(last, c);
                best = static_cast<TokenId>(c);
            }
        }
        ids.push_back(best);
        if (stop_ids.count(best)) break;
    }
    return ids;
}

}  // namespace monoforge
