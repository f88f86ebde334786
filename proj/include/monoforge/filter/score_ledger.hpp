#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "monoforge/bpe/tokenizer.hpp"
#include "monoforge/corpus/document.hpp"
#include "monoforge/lm/model.hpp"
#include "monoforge/lm/score.hpp"

namespace monoforge {

// One document's perplexity score. Token counts are carried in memory for
// budget arithmetic but are not part of the serialized record — they are
// re-joined from the manifest on load.
struct DocScore {
    std::string doc_id;
    double ppl = 0.0;
    size_t tokens_scored = 0;
    bool scorable = false;
    uint64_t word_tokens = 0;
    uint64_t bpe_tokens = 0;
};

// Scores for a whole corpus, in manifest order, under one scorer and one
// scoring window. The scorer checkpoint id is recorded so any threshold
// decision can be traced back to the exact model that produced it.
struct ScoreLedger {
    std::vector<DocScore> entries;  // manifest order, scorable or not
    std::string scorer_id;
    ScoreWindow window;

    size_t scorable_count() const;
    size_t unscorable_count() const { return entries.size() - scorable_count(); }
};

// Windowed perplexity for every document. Preconditions: the tokenizer and
// scorer agree on vocabulary, and the scorer's context covers window.end.
ScoreLedger score_corpus(const CorpusManifest& manifest,
                         const TinyLMParams<double>& scorer,
                         const TokenizerModel& tokenizer, ScoreWindow window,
                         const std::string& scorer_id);

// Line-delimited JSON: a header {scorer_id, s, e} followed by one record
// {doc_id, ppl, tokens_scored, s, e, scorable} per document. Identical
// ledgers serialize to identical bytes.
void save_ledger(const ScoreLedger& ledger, const std::filesystem::path& path);
ScoreLedger load_ledger(const std::filesystem::path& path);

// Fills word/BPE token counts on a loaded ledger from the manifest (BPE
// counts only where the manifest carries them). Errors when the ledger
// references a document the manifest does not contain.
void attach_token_counts(ScoreLedger& ledger, const CorpusManifest& manifest);

}  // namespace monoforge
