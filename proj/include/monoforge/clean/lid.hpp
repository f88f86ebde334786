#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "monoforge/corpus/document.hpp"
#include "monoforge/corpus/manifest_io.hpp"

namespace monoforge {

// Character n-gram (1..4) multinomial log-likelihood classifier with add-alpha
// smoothing. Profiles are stored as raw n-gram counts; log-probabilities are
// derived against the union vocabulary at classification time.
class LidModel {
public:
    static constexpr int kMaxOrder = 4;
    static constexpr double kAlpha = 0.5;
    static constexpr size_t kMinTrainingChars = 200;

    struct Prediction {
        LanguageTag lang;
        double posterior = 0.0;  // softmax over per-language log-likelihoods
    };

    // One or more samples per language, each language >= 200 chars total.
    static LidModel train(const std::map<std::string, std::vector<std::string>>& samples_by_lang);

    Prediction classify(std::string_view text) const;
    bool covers(const LanguageTag& lang) const;
    std::vector<LanguageTag> languages() const;

    void save(const std::filesystem::path& path) const;
    static LidModel load(const std::filesystem::path& path);

private:
    struct Profile {
        LanguageTag lang;
        std::unordered_map<std::string, uint64_t> gram_counts;
        uint64_t total = 0;
    };
    std::vector<Profile> profiles_;  // sorted by language code
    uint64_t vocab_size_ = 0;        // distinct grams across all profiles
};

struct LidFilterResult {
    CorpusManifest kept;
    std::vector<DroppedDocument> dropped;  // drop_reason = lid, detail = predicted lang
};

// Keeps a document iff argmax language == target and posterior >= min_conf.
LidFilterResult lid_filter(const CorpusManifest& manifest, const LidModel& model,
                           const LanguageTag& target, double min_conf);

}  // namespace monoforge
