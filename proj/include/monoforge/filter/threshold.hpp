#pragma once

#include <vector>

#include "monoforge/corpus/manifest_io.hpp"
#include "monoforge/filter/score_ledger.hpp"

namespace monoforge {

// What the budget counts. Word tokens match the corpus-level budget
// definition; the BPE mode exists for tokenizer-denominated budgets.
enum class BudgetUnit { word_tokens, bpe_tokens };

// The admission decision: documents sorted by ascending perplexity (doc id
// breaks ties) are admitted until the budget is met. The admitted id set is
// normative — equal-perplexity documents beyond the budget stay out.
struct FilterThreshold {
    double value = 0.0;        // ppl of the last admitted document
    uint64_t budget = 0;
    uint64_t kept_tokens = 0;  // in the chosen budget unit
    size_t kept_docs = 0;
    bool shortfall = false;    // whole scorable corpus admitted, still < budget
    BudgetUnit unit = BudgetUnit::word_tokens;
    std::vector<std::string> kept_ids;  // admission (ascending-ppl) order
};

// Ascending-perplexity prefix admission against a token budget. Requires a
// ledger with at least one scorable entry and a positive budget; token
// counts must be attached (score_corpus does; after load_ledger call
// attach_token_counts).
FilterThreshold select_threshold(const ScoreLedger& ledger, uint64_t budget,
                                 BudgetUnit unit = BudgetUnit::word_tokens);

struct FilterOutcome {
    CorpusManifest kept;
    std::vector<DroppedDocument> dropped;
};

// Partitions the manifest by the threshold's admitted set, in manifest
// order. Unscorable documents are dropped (reason "unscorable") unless
// passthrough_unscorable keeps them; scorable rejects carry their
// perplexity (reason "ppl_threshold"). A document missing from the ledger
// is an error.
FilterOutcome apply_filter(const CorpusManifest& manifest, const ScoreLedger& ledger,
                           const FilterThreshold& threshold,
                           bool passthrough_unscorable = false);

// JSON round trip, so threshold selection and application can run as
// separate invocations. The kept id set travels with the threshold value.
void save_threshold(const FilterThreshold& threshold, const std::filesystem::path& path);
FilterThreshold load_threshold(const std::filesystem::path& path);

}  // namespace monoforge
