#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "monoforge/corpus/document.hpp"

namespace monoforge {

// Per-language sentence quota for tokenizer training. `weight` scales the
// requested count (effective draw = round(count * weight)), covering
// upsampling factors beyond the implicit with-replacement path.
struct SamplingPlan {
    struct Quota {
        size_t count = 0;
        double weight = 1.0;
    };
    std::map<std::string, Quota> per_lang;

    void validate() const;
};

// Draws the training sentence stream for bpe_train: documents are split
// into sentences, then each language is sampled to its quota — without
// replacement when the pool suffices, with replacement (upsampling)
// otherwise. Deterministic given the seed; languages contribute in
// lexicographic language-code order.
std::vector<std::string> sample_sentences(
    const std::map<std::string, const CorpusManifest*>& manifests,
    const SamplingPlan& plan, uint64_t seed);

}  // namespace monoforge
