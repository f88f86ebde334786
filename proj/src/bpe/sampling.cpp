#include "monoforge/bpe/sampling.hpp"

#include <cmath>
#include <numeric>

#include "monoforge/clean/murmur3.hpp"
#include "monoforge/text/sentences.hpp"
#include "monoforge/util/rng.hpp"

namespace monoforge {

void SamplingPlan::validate() const {
    for (const auto& [lang, quota] : per_lang) {
        if (!(quota.weight > 0.0)) {
            throw Error("sampling plan: weight for '" + lang + "' must be > 0");
        }
    }
}

std::vector<std::string> sample_sentences(
    const std::map<std::string, const CorpusManifest*>& manifests,
    const SamplingPlan& plan, uint64_t seed) {
    plan.validate();
    std::vector<std::string> stream;

    for (const auto& [lang, quota] : plan.per_lang) {
        const size_t want =
            static_cast<size_t>(std::llround(static_cast<double>(quota.count) * quota.weight));
        if (want == 0) continue;

        auto mi = manifests.find(lang);
        if (mi == manifests.end() || mi->second == nullptr) {
            throw Error("sample_sentences: no corpus provided for language '" + lang + "'");
        }
        std::vector<std::string> pool;
        for (const auto& doc : mi->second->documents) {
            for (size_t p = 0; p < doc.paragraphs.size(); ++p) {
                for (auto& s : text::split_sentences(doc.paragraph(p), lang)) {
                    pool.push_back(std::move(s));
                }
            }
        }
        if (pool.empty()) {
            throw Error("sample_sentences: corpus for language '" + lang +
                        "' has no sentences");
        }

        // Independent per-language stream so adding a language never
        // perturbs the draws of the others.
        Rng rng(seed ^ murmur3_128(lang, 0).h1);
        if (want <= pool.size()) {
            // Partial Fisher-Yates: the first `want` slots end up a uniform
            // sample without replacement.
            std::vector<size_t> idx(pool.size());
            std::iota(idx.begin(), idx.end(), size_t{0});
            for (size_t i = 0; i < want; ++i) {
                size_t j = i + rng.next_below(idx.size() - i);
                std::swap(idx[i], idx[j]);
                stream.push_back(pool[idx[i]]);
            }
        } else {
            for (size_t i = 0; i < want; ++i) {
                stream.push_back(pool[rng.next_below(pool.size())]);
            }
        }
    }
    return stream;
}

}  // namespace monoforge
