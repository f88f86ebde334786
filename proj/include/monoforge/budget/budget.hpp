#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "monoforge/corpus/document.hpp"

namespace monoforge {

// Compute-optimal token budget: tokens-per-parameter ratio applied to the
// non-embedding parameter count, optionally capped by a hard limit that
// overrides the product outright.
struct BudgetSpec {
    uint64_t non_embedding_params = 0;
    double tokens_per_param = 20.0;  // Chinchilla-style default
    std::optional<uint64_t> hard_limit;

    void validate() const;
};

// hard_limit when present, else round(params * ratio).
uint64_t token_budget(const BudgetSpec& spec);

// Named presets for the two trainable model sizes plus the per-language
// production target (2.4B words, an effective ratio of ~28 tokens/param).
// Names: "mini-1k", "base-1k", "paper-base".
BudgetSpec budget_preset(const std::string& name);

struct BudgetFeasibility {
    bool feasible = false;
    uint64_t budget = 0;
    uint64_t corpus_tokens = 0;
    uint64_t shortfall = 0;  // budget - corpus_tokens when short, else 0
};

// Compares the corpus word-token total against the spec's budget.
BudgetFeasibility budget_feasible(const CorpusManifest& manifest,
                                  const BudgetSpec& spec);

}  // namespace monoforge
