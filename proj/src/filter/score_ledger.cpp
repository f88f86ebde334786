#include "monoforge/filter/score_ledger.hpp"

#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace monoforge {

using nlohmann::json;

size_t ScoreLedger::scorable_count() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.scorable ? 1 : 0;
    return n;
}

ScoreLedger score_corpus(const CorpusManifest& manifest,
                         const TinyLMParams<double>& scorer,
                         const TokenizerModel& tokenizer, ScoreWindow window,
                         const std::string& scorer_id) {
    if (window.start < 1 || window.end <= window.start) {
        throw Error("score_corpus: invalid window [" + std::to_string(window.start) +
                    ", " + std::to_string(window.end) + "]");
    }
    if (scorer.config.vocab_size != tokenizer.vocab_size()) {
        throw Error("score_corpus: scorer vocab " +
                    std::to_string(scorer.config.vocab_size) + " != tokenizer vocab " +
                    std::to_string(tokenizer.vocab_size()));
    }
    if (scorer.config.context_len < window.end) {
        throw Error("score_corpus: scorer context " +
                    std::to_string(scorer.config.context_len) +
                    " shorter than window end " + std::to_string(window.end));
    }

    ScoreLedger ledger;
    ledger.scorer_id = scorer_id;
    ledger.window = window;
    ledger.entries.reserve(manifest.documents.size());
    for (const Document& doc : manifest.documents) {
        const std::vector<TokenId> ids = tokenizer.encode(doc.text);
        const WindowPerplexity wp = perplexity_window(scorer, ids, window);
        DocScore score;
        score.doc_id = doc.id;
        score.ppl = wp.ppl;
        score.tokens_scored = wp.tokens_scored;
        score.scorable = wp.scorable;
        score.word_tokens = doc.word_tokens;
        score.bpe_tokens = ids.size();
        ledger.entries.push_back(std::move(score));
    }
    return ledger;
}

void save_ledger(const ScoreLedger& ledger, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_ledger: cannot open " + path.string());
    json header;
    header["scorer_id"] = ledger.scorer_id;
    header["s"] = ledger.window.start;
    header["e"] = ledger.window.end;
    out << header.dump() << '\n';
    for (const DocScore& score : ledger.entries) {
        json rec;
        rec["doc_id"] = score.doc_id;
        rec["ppl"] = score.ppl;
        rec["tokens_scored"] = score.tokens_scored;
        rec["s"] = ledger.window.start;
        rec["e"] = ledger.window.end;
        rec["scorable"] = score.scorable;
        out << rec.dump() << '\n';
    }
    if (!out) throw Error("save_ledger: write failed for " + path.string());
}

ScoreLedger load_ledger(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_ledger: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error("load_ledger: empty file " + path.string());

    ScoreLedger ledger;
    try {
        const json header = json::parse(line);
        ledger.scorer_id = header.at("scorer_id").get<std::string>();
        ledger.window.start = header.at("s").get<size_t>();
        ledger.window.end = header.at("e").get<size_t>();
    } catch (const json::exception& e) {
        throw Error(std::string("load_ledger: bad header: ") + e.what());
    }
    size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        DocScore score;
        try {
            const json rec = json::parse(line);
            score.doc_id = rec.at("doc_id").get<std::string>();
            score.ppl = rec.at("ppl").get<double>();
            score.tokens_scored = rec.at("tokens_scored").get<size_t>();
            score.scorable = rec.at("scorable").get<bool>();
            if (rec.at("s").get<size_t>() != ledger.window.start ||
                rec.at("e").get<size_t>() != ledger.window.end) {
                throw Error("load_ledger: window mismatch at line " +
                            std::to_string(line_number));
            }
        } catch (const json::exception& e) {
            throw Error("load_ledger: line " + std::to_string(line_number) + ": " +
                        e.what());
        }
        ledger.entries.push_back(std::move(score));
    }
    return ledger;
}

void attach_token_counts(ScoreLedger& ledger, const CorpusManifest& manifest) {
    std::unordered_map<std::string, const Document*> by_id;
    by_id.reserve(manifest.documents.size());
    for (const Document& doc : manifest.documents) by_id.emplace(doc.id, &doc);
    for (DocScore& score : ledger.entries) {
        auto it = by_id.find(score.doc_id);
        if (it == by_id.end()) {
            throw Error("attach_token_counts: document " + score.doc_id +
                        " not in manifest");
        }
        score.word_tokens = it->second->word_tokens;
        score.bpe_tokens = it->second->bpe_tokens.value_or(0);
    }
}

}  // namespace monoforge
