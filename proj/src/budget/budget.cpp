#include "monoforge/budget/budget.hpp"

#include <cmath>

#include "monoforge/lm/config.hpp"

namespace monoforge {

void BudgetSpec::validate() const {
    if (tokens_per_param <= 0.0) {
        throw Error("budget spec: tokens_per_param must be positive");
    }
    if (hard_limit.has_value() && *hard_limit == 0) {
        throw Error("budget spec: hard_limit must be positive when set");
    }
    if (!hard_limit.has_value() && non_embedding_params == 0) {
        throw Error("budget spec: need a parameter count or a hard limit");
    }
}

uint64_t token_budget(const BudgetSpec& spec) {
    spec.validate();
    if (spec.hard_limit.has_value()) return *spec.hard_limit;
    return static_cast<uint64_t>(std::llround(
        static_cast<double>(spec.non_embedding_params) * spec.tokens_per_param));
}

BudgetSpec budget_preset(const std::string& name) {
    BudgetSpec spec;
    if (name == "mini-1k") {
        spec.non_embedding_params = non_embedding_params(TinyLMConfig::mini_1k());
        spec.hard_limit = 1000000000ull;  // 1B tokens
    } else if (name == "base-1k") {
        spec.non_embedding_params = non_embedding_params(TinyLMConfig::base_1k());
        spec.hard_limit = 2380000000ull;  // 2.38B tokens
    } else if (name == "paper-base") {
        // Per-language production target: 2.4B words over the base model's
        // non-embedding parameters, an effective ratio of ~28 tokens/param.
        spec.non_embedding_params = non_embedding_params(TinyLMConfig::base_1k());
        spec.tokens_per_param = 2.4e9 / static_cast<double>(spec.non_embedding_params);
        spec.hard_limit = 2400000000ull;
    } else {
        throw Error("budget preset: unknown name \"" + name +
                    "\" (expected mini-1k, base-1k, or paper-base)");
    }
    return spec;
}

BudgetFeasibility budget_feasible(const CorpusManifest& manifest,
                                  const BudgetSpec& spec) {
    BudgetFeasibility result;
    result.budget = token_budget(spec);
    result.corpus_tokens = manifest.total_word_tokens();
    result.feasible = result.corpus_tokens >= result.budget;
    result.shortfall = result.feasible ? 0 : result.budget - result.corpus_tokens;
    return result;
}

}  // namespace monoforge
