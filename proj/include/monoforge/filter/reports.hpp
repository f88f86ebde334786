#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "monoforge/corpus/manifest_io.hpp"
#include "monoforge/filter/score_ledger.hpp"

namespace monoforge {

// Mean/variance of per-position next-token NLL, aggregated over documents.
// Position t is the index into each document's NLL trace (the prediction of
// token t+1); buckets cover [bucket_start, bucket_start + bucket_size).
struct BucketStat {
    size_t bucket_start = 0;
    double mean_nll = 0.0;
    double var_nll = 0.0;  // population variance
    uint64_t n = 0;
};

// Aggregates token_nll_trace across the corpus. Documents shorter than two
// tokens contribute nothing; longer-than-context documents contribute their
// first context window. Buckets are returned in ascending order.
std::vector<BucketStat> position_stats(const CorpusManifest& manifest,
                                       const TinyLMParams<double>& scorer,
                                       const TokenizerModel& tokenizer,
                                       size_t bucket_size);

// CSV rows "bucket_start,mean_nll,var_nll,n".
void save_position_stats(const std::vector<BucketStat>& stats,
                         const std::filesystem::path& path);

// Length distribution of one partition: histogram over word-token counts
// plus nearest-rank quantiles. An empty partition has count 0 and no
// histogram rows.
struct LengthSummary {
    uint64_t count = 0;
    uint64_t p10 = 0;
    uint64_t p50 = 0;
    uint64_t p90 = 0;
    std::vector<std::pair<uint64_t, uint64_t>> histogram;  // (bucket_start, count)
};

struct LengthReport {
    LengthSummary kept;
    LengthSummary dropped;
    uint64_t bucket_width = 0;
};

LengthSummary summarize_lengths(std::vector<uint64_t> lengths, uint64_t bucket_width);

LengthReport length_report(const CorpusManifest& kept,
                           const std::vector<DroppedDocument>& dropped,
                           uint64_t bucket_width = 64);

// CSV rows "partition,row_type,key,value": per partition a count row, the
// three quantile rows, then histogram rows in ascending bucket order.
void save_length_report(const LengthReport& report, const std::filesystem::path& path);

}  // namespace monoforge
