#include "monoforge/clean/lid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "monoforge/text/unicode.hpp"

namespace monoforge {

namespace {

// All n-grams for n in 1..4 over codepoints, re-encoded as UTF-8 keys.
void for_each_gram(std::string_view text, auto&& fn) {
    auto cps = unicode::decode_utf8_string(text);
    for (size_t i = 0; i < cps.size(); ++i) {
        std::string gram;
        for (int n = 0; n < LidModel::kMaxOrder && i + n < cps.size(); ++n) {
            unicode::append_utf8(gram, cps[i + n]);
            fn(gram);
        }
    }
}

}  // namespace

LidModel LidModel::train(const std::map<std::string, std::vector<std::string>>& samples_by_lang) {
    if (samples_by_lang.empty()) throw Error("lid_train: no languages given");
    LidModel model;
    std::unordered_set<std::string> vocab;
    for (const auto& [lang, samples] : samples_by_lang) {
        Profile profile;
        profile.lang = parse_language_tag(lang);
        size_t chars = 0;
        for (const auto& s : samples) {
            chars += unicode::decode_utf8_string(s).size();
            for_each_gram(s, [&](const std::string& gram) {
                ++profile.gram_counts[gram];
                ++profile.total;
            });
        }
        if (samples.empty() || chars < kMinTrainingChars) {
            throw Error("lid_train: language '" + lang + "' has " + std::to_string(chars) +
                        " training chars, need >= " + std::to_string(kMinTrainingChars));
        }
        for (const auto& [gram, _] : profile.gram_counts) vocab.insert(gram);
        model.profiles_.push_back(std::move(profile));
    }
    model.vocab_size_ = vocab.size();
    return model;
}

LidModel::Prediction LidModel::classify(std::string_view text) const {
    if (profiles_.empty()) throw Error("lid: empty model");
    if (unicode::count_whitespace_tokens(text) == 0) {
        throw Error("lid: cannot classify empty text");
    }
    std::vector<double> ll(profiles_.size(), 0.0);
    const double v = static_cast<double>(vocab_size_) + 1.0;
    for_each_gram(text, [&](const std::string& gram) {
        for (size_t i = 0; i < profiles_.size(); ++i) {
            const auto& p = profiles_[i];
            auto it = p.gram_counts.find(gram);
            double count = it == p.gram_counts.end() ? 0.0 : static_cast<double>(it->second);
            ll[i] += std::log((count + kAlpha) / (static_cast<double>(p.total) + kAlpha * v));
        }
    });
    size_t best = 0;
    for (size_t i = 1; i < ll.size(); ++i) {
        if (ll[i] > ll[best]) best = i;
    }
    // Posterior via log-sum-exp against the best score.
    double denom = 0.0;
    for (double l : ll) denom += std::exp(l - ll[best]);
    return {profiles_[best].lang, 1.0 / denom};
}

bool LidModel::covers(const LanguageTag& lang) const {
    return std::any_of(profiles_.begin(), profiles_.end(),
                       [&](const Profile& p) { return p.lang == lang; });
}

std::vector<LanguageTag> LidModel::languages() const {
    std::vector<LanguageTag> out;
    out.reserve(profiles_.size());
    for (const auto& p : profiles_) out.push_back(p.lang);
    return out;
}

void LidModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["format"] = "monoforge-lid";
    j["version"] = 1;
    j["vocab_size"] = vocab_size_;
    auto& langs = j["profiles"] = nlohmann::json::array();
    for (const auto& p : profiles_) {
        nlohmann::json pj;
        pj["lang"] = p.lang.str();
        pj["total"] = p.total;
        pj["grams"] = p.gram_counts;
        langs.push_back(std::move(pj));
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write LID model " + path.string());
    out << j.dump();
}

LidModel LidModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open LID model " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, true);
    if (j.value("format", "") != "monoforge-lid" || j.value("version", 0) != 1) {
        throw Error("unrecognized LID model format in " + path.string());
    }
    LidModel model;
    model.vocab_size_ = j.at("vocab_size").get<uint64_t>();
    for (const auto& pj : j.at("profiles")) {
        Profile p;
        p.lang = parse_language_tag(pj.at("lang").get<std::string>());
        p.total = pj.at("total").get<uint64_t>();
        p.gram_counts = pj.at("grams").get<std::unordered_map<std::string, uint64_t>>();
        model.profiles_.push_back(std::move(p));
    }
    return model;
}

LidFilterResult lid_filter(const CorpusManifest& manifest, const LidModel& model,
                           const LanguageTag& target, double min_conf) {
    if (!model.covers(target)) {
        throw Error("lid_filter: model does not cover language " + target.str());
    }
    LidFilterResult result;
    result.kept.lang = manifest.lang;
    result.kept.stage = "lid";
    result.kept.created_at = manifest.created_at;
    for (const auto& doc : manifest.documents) {
        auto pred = model.classify(doc.text);
        if (pred.lang == target && pred.posterior >= min_conf) {
            result.kept.documents.push_back(doc);
        } else {
            result.dropped.push_back({doc, "lid", pred.lang.str()});
        }
    }
    return result;
}

}  // namespace monoforge
