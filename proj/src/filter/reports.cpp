#include "monoforge/filter/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace monoforge {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// Nearest-rank quantile on a sorted sample: the smallest value whose rank
// covers fraction p of the sample.
uint64_t nearest_rank(const std::vector<uint64_t>& sorted, double p) {
    const size_t n = sorted.size();
    size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

}  // namespace

std::vector<BucketStat> position_stats(const CorpusManifest& manifest,
                                       const TinyLMParams<double>& scorer,
                                       const TokenizerModel& tokenizer,
                                       size_t bucket_size) {
    if (bucket_size < 1) throw Error("position_stats: bucket_size must be >= 1");
    if (scorer.config.vocab_size != tokenizer.vocab_size()) {
        throw Error("position_stats: scorer vocab " +
                    std::to_string(scorer.config.vocab_size) + " != tokenizer vocab " +
                    std::to_string(tokenizer.vocab_size()));
    }
    // Welford accumulators keyed by bucket start.
    struct Acc {
        uint64_t n = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::map<size_t, Acc> buckets;
    for (const Document& doc : manifest.documents) {
        std::vector<TokenId> ids = tokenizer.encode(doc.text);
        if (ids.size() < 2) continue;
        if (ids.size() > scorer.config.context_len) {
            ids.resize(scorer.config.context_len);
        }
        const std::vector<double> trace = token_nll_trace(scorer, ids);
        for (size_t t = 0; t < trace.size(); ++t) {
            Acc& acc = buckets[(t / bucket_size) * bucket_size];
            ++acc.n;
            const double delta = trace[t] - acc.mean;
            acc.mean += delta / static_cast<double>(acc.n);
            acc.m2 += delta * (trace[t] - acc.mean);
        }
    }
    std::vector<BucketStat> stats;
    stats.reserve(buckets.size());
    for (const auto& [start, acc] : buckets) {
        BucketStat stat;
        stat.bucket_start = start;
        stat.mean_nll = acc.mean;
        stat.var_nll = acc.n > 0 ? acc.m2 / static_cast<double>(acc.n) : 0.0;
        stat.n = acc.n;
        stats.push_back(stat);
    }
    return stats;
}

void save_position_stats(const std::vector<BucketStat>& stats,
                         const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_position_stats: cannot open " + path.string());
    out << "bucket_start,mean_nll,var_nll,n\n";
    for (const BucketStat& stat : stats) {
        out << stat.bucket_start << ',' << format_double(stat.mean_nll) << ','
            << format_double(stat.var_nll) << ',' << stat.n << '\n';
    }
    if (!out) throw Error("save_position_stats: write failed for " + path.string());
}

LengthSummary summarize_lengths(std::vector<uint64_t> lengths, uint64_t bucket_width) {
    if (bucket_width < 1) throw Error("summarize_lengths: bucket_width must be >= 1");
    LengthSummary summary;
    summary.count = lengths.size();
    if (lengths.empty()) return summary;
    std::sort(lengths.begin(), lengths.end());
    summary.p10 = nearest_rank(lengths, 0.10);
    summary.p50 = nearest_rank(lengths, 0.50);
    summary.p90 = nearest_rank(lengths, 0.90);
    std::map<uint64_t, uint64_t> hist;
    for (uint64_t len : lengths) ++hist[(len / bucket_width) * bucket_width];
    summary.histogram.assign(hist.begin(), hist.end());
    return summary;
}

LengthReport length_report(const CorpusManifest& kept,
                           const std::vector<DroppedDocument>& dropped,
                           uint64_t bucket_width) {
    std::vector<uint64_t> kept_lengths;
    kept_lengths.reserve(kept.documents.size());
    for (const Document& doc : kept.documents) kept_lengths.push_back(doc.word_tokens);
    std::vector<uint64_t> dropped_lengths;
    dropped_lengths.reserve(dropped.size());
    for (const DroppedDocument& dd : dropped) {
        dropped_lengths.push_back(dd.doc.word_tokens);
    }
    LengthReport report;
    report.bucket_width = bucket_width;
    report.kept = summarize_lengths(std::move(kept_lengths), bucket_width);
    report.dropped = summarize_lengths(std::move(dropped_lengths), bucket_width);
    return report;
}

void save_length_report(const LengthReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_length_report: cannot open " + path.string());
    out << "partition,row_type,key,value\n";
    auto emit = [&out](const char* partition, const LengthSummary& summary) {
        out << partition << ",count,," << summary.count << '\n';
        if (summary.count == 0) return;
        out << partition << ",quantile,p10," << summary.p10 << '\n';
        out << partition << ",quantile,p50," << summary.p50 << '\n';
        out << partition << ",quantile,p90," << summary.p90 << '\n';
        for (const auto& [start, n] : summary.histogram) {
            out << partition << ",hist," << start << ',' << n << '\n';
        }
    };
    emit("kept", report.kept);
    emit("dropped", report.dropped);
    if (!out) throw Error("save_length_report: write failed for " + path.string());
}

}  // namespace monoforge
