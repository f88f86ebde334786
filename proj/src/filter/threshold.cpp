#include "monoforge/filter/threshold.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace monoforge {

namespace {

uint64_t tokens_of(const DocScore& score, BudgetUnit unit) {
    return unit == BudgetUnit::word_tokens ? score.word_tokens : score.bpe_tokens;
}

std::string format_ppl(double ppl) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", ppl);
    return buf;
}

}  // namespace

FilterThreshold select_threshold(const ScoreLedger& ledger, uint64_t budget,
                                 BudgetUnit unit) {
    if (budget == 0) throw Error("select_threshold: budget must be positive");
    std::vector<const DocScore*> scorable;
    scorable.reserve(ledger.entries.size());
    for (const DocScore& score : ledger.entries) {
        if (score.scorable) scorable.push_back(&score);
    }
    if (scorable.empty()) {
        throw Error("select_threshold: ledger has no scorable documents");
    }
    std::sort(scorable.begin(), scorable.end(),
              [](const DocScore* a, const DocScore* b) {
                  if (a->ppl != b->ppl) return a->ppl < b->ppl;
                  return a->doc_id < b->doc_id;
              });

    FilterThreshold threshold;
    threshold.budget = budget;
    threshold.unit = unit;
    for (const DocScore* score : scorable) {
        threshold.kept_ids.push_back(score->doc_id);
        threshold.kept_tokens += tokens_of(*score, unit);
        threshold.value = score->ppl;
        ++threshold.kept_docs;
        if (threshold.kept_tokens >= budget) break;
    }
    threshold.shortfall = threshold.kept_tokens < budget;
    return threshold;
}

FilterOutcome apply_filter(const CorpusManifest& manifest, const ScoreLedger& ledger,
                           const FilterThreshold& threshold,
                           bool passthrough_unscorable) {
    std::unordered_map<std::string, const DocScore*> scores;
    scores.reserve(ledger.entries.size());
    for (const DocScore& score : ledger.entries) scores.emplace(score.doc_id, &score);
    const std::unordered_set<std::string> admitted(threshold.kept_ids.begin(),
                                                   threshold.kept_ids.end());

    FilterOutcome outcome;
    outcome.kept.lang = manifest.lang;
    outcome.kept.stage = "filter";
    outcome.kept.created_at = manifest.created_at;
    for (const Document& doc : manifest.documents) {
        auto it = scores.find(doc.id);
        if (it == scores.end()) {
            throw Error("apply_filter: no score for document " + doc.id);
        }
        const DocScore& score = *it->second;
        if (!score.scorable) {
            if (passthrough_unscorable) {
                outcome.kept.documents.push_back(doc);
            } else {
                outcome.dropped.push_back({doc, "unscorable",
                                           "fewer than s+2 tokens in window"});
            }
            continue;
        }
        if (admitted.count(doc.id)) {
            outcome.kept.documents.push_back(doc);
        } else {
            outcome.dropped.push_back({doc, "ppl_threshold",
                                       "ppl=" + format_ppl(score.ppl) + " above " +
                                           format_ppl(threshold.value)});
        }
    }
    return outcome;
}

void save_threshold(const FilterThreshold& threshold, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("save_threshold: cannot open " + path.string());
    nlohmann::json j;
    j["value"] = threshold.value;
    j["budget"] = threshold.budget;
    j["kept_tokens"] = threshold.kept_tokens;
    j["kept_docs"] = threshold.kept_docs;
    j["shortfall"] = threshold.shortfall;
    j["unit"] = threshold.unit == BudgetUnit::word_tokens ? "word" : "bpe";
    j["kept_ids"] = threshold.kept_ids;
    out << j.dump() << "\n";
    if (!out) throw Error("save_threshold: write failed for " + path.string());
}

FilterThreshold load_threshold(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_threshold: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("load_threshold: " + std::string(e.what()));
    }
    FilterThreshold threshold;
    try {
        threshold.value = j.at("value").get<double>();
        threshold.budget = j.at("budget").get<uint64_t>();
        threshold.kept_tokens = j.at("kept_tokens").get<uint64_t>();
        threshold.kept_docs = j.at("kept_docs").get<size_t>();
        threshold.shortfall = j.at("shortfall").get<bool>();
        const std::string unit = j.at("unit").get<std::string>();
        if (unit != "word" && unit != "bpe") {
            throw Error("load_threshold: unknown unit '" + unit + "'");
        }
        threshold.unit = unit == "word" ? BudgetUnit::word_tokens : BudgetUnit::bpe_tokens;
        threshold.kept_ids = j.at("kept_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("load_threshold: " + std::string(e.what()));
    }
    return threshold;
}

}  // namespace monoforge
