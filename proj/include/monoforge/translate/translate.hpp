#pragma once

#include <set>

#include "monoforge/lm/model.hpp"
#include "monoforge/translate/backend.hpp"
#include "monoforge/translate/chunk.hpp"

namespace monoforge {

// One source sentence located inside its document.
struct SentenceSpan {
    std::string doc_id;
    size_t paragraph_index = 0;
    size_t index = 0;  // sentence position within the paragraph
    std::string text;
};

// The translation of one sentence. raw_output preserves the backend's
// answer when a repair rewrites output; repaired implies truncated.
struct TranslationRecord {
    SentenceSpan span;
    std::string output;
    std::string raw_output;
    bool truncated = false;
    bool repaired = false;
    bool failed = false;
    std::string failure_reason;
};

struct TranslationFailure {
    std::string doc_id;
    size_t paragraph_index = 0;
    size_t sentence_index = 0;
    std::string reason;
};

struct RetryPolicy {
    size_t max_attempts = 3;
    size_t initial_delay_ms = 100;
    double multiplier = 2.0;
    bool sleep = true;  // tests turn the actual waiting off
};

struct TranslateOptions {
    size_t max_tokens = 256;
    RetryPolicy retry;
    // When set, truncated outputs are completed by greedy LM generation.
    const TinyLMParams<double>* repair_lm = nullptr;
    const TokenizerModel* repair_tokenizer = nullptr;
    size_t repair_max_new = 64;
};

struct TranslateStats {
    uint64_t sentences = 0;
    uint64_t chunks = 0;
    uint64_t batches = 0;
    uint64_t retries = 0;
    uint64_t truncated = 0;
    uint64_t repaired = 0;
    uint64_t failed_docs = 0;
};

struct TranslateResult {
    CorpusManifest synthetic;
    std::vector<TranslationRecord> records;  // one per source sentence
    std::vector<TranslationFailure> failures;
    TranslateStats stats;
};

// Splits every document into sentences, enforces the per-chunk token limit,
// translates in batches (with retry), reassembles documents preserving the
// paragraph/sentence structure, and stamps synthetic provenance. Documents
// touched by a permanently failed batch are excluded from the output
// manifest and itemized in `failures` — never silently dropped. Output
// order follows input order whatever the batch completion order.
TranslateResult translate_corpus(const CorpusManifest& manifest, MtBackend& backend,
                                 const MtBackendDescriptor& descriptor,
                                 const TokenizerModel& mt_tokenizer,
                                 const LanguageTag& tgt,
                                 const TranslateOptions& opts = {});

// True iff the output rides exactly at the token limit and lacks terminal
// punctuation — the signature of a translation cut off by the MT model.
bool detect_truncation(const TranslationRecord& record,
                       const TokenizerModel& mt_tokenizer, size_t max_tokens = 256);

// Token ids whose piece ends a sentence (terminal punctuation, closers
// allowed); greedy repair stops at any of them.
std::set<TokenId> terminal_stop_ids(const TokenizerModel& tokenizer);

// Completes a truncated translation with greedy LM generation until
// terminal punctuation or max_new tokens. Non-truncated records pass
// through unchanged; the pre-repair text is kept in raw_output.
TranslationRecord repair_truncated(TranslationRecord record,
                                   const TinyLMParams<double>& lm,
                                   const TokenizerModel& lm_tokenizer,
                                   size_t max_new = 64);

}  // namespace monoforge
