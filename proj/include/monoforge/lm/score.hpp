#pragma once

#include "monoforge/lm/forward.hpp"

namespace monoforge {

// Scoring window: skip the first `start` tokens (their predictions are
// conditioned on too little context to be meaningful), stop at token
// `end`. Defaults follow the scoring recipe used throughout the pipeline.
struct ScoreWindow {
    size_t start = 10;
    size_t end = 1024;
};

struct WindowPerplexity {
    double ppl = 0.0;
    size_t tokens_scored = 0;
    bool scorable = false;
};

// Per-position NLL trace: entry t is the negative log-likelihood of token
// ids[t + 1] given ids[0..t]. Length is ids.size() - 1. The whole sequence
// must fit the context window.
template <typename S>
std::vector<double> token_nll_trace(const TinyLMParams<S>& params,
                                    std::span<const TokenId> ids) {
    if (ids.size() < 2) throw Error("token_nll_trace: need at least 2 tokens");
    if (ids.size() > params.config.context_len) {
        throw Error("token_nll_trace: sequence exceeds context window");
    }
    LmMat<S> logits = forward(params, ids);
    std::vector<double> trace(ids.size() - 1);
    for (size_t t = 0; t + 1 < ids.size(); ++t) {
        const auto row = logits.row(static_cast<Eigen::Index>(t));
        const double row_max = static_cast<double>(row.maxCoeff());
        double denom = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            denom += std::exp(static_cast<double>(row(c)) - row_max);
        }
        trace[t] = std::log(denom) - (static_cast<double>(row(ids[t + 1])) - row_max);
    }
    return trace;
}

// Windowed document perplexity. With N tokens, window (s, e):
//   - scorable iff N >= s + 2 (at least one prediction inside the window);
//   - the model reads tokens 0..L-1 where L = min(N, e);
//   - NLL is averaged over predictions of tokens s+1 .. L (1-based),
//     i.e. trace positions s-1 .. L-2, so tokens_scored = L - s.
// Unscorable documents return {0, 0, false} rather than throwing: short
// docs are an expected, countable case for callers.
template <typename S>
WindowPerplexity perplexity_window(const TinyLMParams<S>& params,
                                   std::span<const TokenId> ids,
                                   ScoreWindow window = {}) {
    const size_t n = ids.size();
    if (window.start < 1 || window.end <= window.start) {
        throw Error("perplexity_window: invalid window");
    }
    if (n < window.start + 2) return {};
    const size_t limit = std::min(n, window.end);
    if (limit > params.config.context_len) {
        throw Error("perplexity_window: window exceeds context length");
    }
    std::span<const TokenId> visible(ids.data(), limit);
    LmMat<S> logits = forward(params, visible);
    double total = 0.0;
    size_t counted = 0;
    for (size_t t = window.start - 1; t + 1 < limit; ++t) {
        const auto row = logits.row(static_cast<Eigen::Index>(t));
        const double row_max = static_cast<double>(row.maxCoeff());
        double denom = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            denom += std::exp(static_cast<double>(row(c)) - row_max);
        }
        total += std::log(denom) - (static_cast<double>(row(visible[t + 1])) - row_max);
        ++counted;
    }
    WindowPerplexity result;
    result.ppl = std::exp(total / static_cast<double>(counted));
    result.tokens_scored = counted;
    result.scorable = true;
    return result;
}

}  // namespace monoforge
