#include "monoforge/translate/translate.hpp"

#include <chrono>
#include <thread>

#include "monoforge/lm/generate.hpp"
#include "monoforge/text/sentences.hpp"

namespace monoforge {

namespace {

// One sentence's translation work: where it lives and how it was chunked.
struct SentenceWork {
    size_t doc = 0;
    size_t paragraph = 0;
    size_t sentence = 0;
    ChunkSet chunks;
    std::vector<std::string> translated;  // filled per chunk
};

std::vector<std::string> call_with_retry(MtBackend& backend,
                                         const std::vector<std::string>& batch,
                                         const RetryPolicy& policy, uint64_t* retries,
                                         std::string* final_error) {
    double delay = static_cast<double>(policy.initial_delay_ms);
    for (size_t attempt = 1;; ++attempt) {
        try {
            return backend.translate_batch(batch);
        } catch (const std::exception& e) {
            if (attempt >= policy.max_attempts) {
                *final_error = e.what();
                return {};
            }
            ++*retries;
            if (policy.sleep) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(static_cast<int64_t>(delay)));
            }
            delay *= policy.multiplier;
        }
    }
}

}  // namespace

bool detect_truncation(const TranslationRecord& record,
                       const TokenizerModel& mt_tokenizer, size_t max_tokens) {
    return mt_tokenizer.token_count(record.output) == max_tokens &&
           !text::ends_with_terminal_punct(record.output);
}

std::set<TokenId> terminal_stop_ids(const TokenizerModel& tokenizer) {
    std::set<TokenId> stops;
    for (size_t id = 0; id < tokenizer.vocab_size(); ++id) {
        const TokenId tid = static_cast<TokenId>(id);
        if (TokenizerModel::is_special(tid)) continue;
        std::string piece = tokenizer.piece(tid);
        if (tokenizer.is_byte(tid)) {
            // Byte pieces print as <0xNN>; map back to the raw character.
            const int b = std::stoi(piece.substr(3, 2), nullptr, 16);
            piece = std::string(1, static_cast<char>(b));
        }
        if (text::ends_with_terminal_punct(piece)) stops.insert(tid);
    }
    return stops;
}

TranslationRecord repair_truncated(TranslationRecord record,
                                   const TinyLMParams<double>& lm,
                                   const TokenizerModel& lm_tokenizer, size_t max_new) {
    if (!record.truncated || record.repaired) return record;
    if (lm.config.vocab_size != lm_tokenizer.vocab_size()) {
        throw Error("repair_truncated: LM vocab " +
                    std::to_string(lm.config.vocab_size) + " != tokenizer vocab " +
                    std::to_string(lm_tokenizer.vocab_size()));
    }
    std::vector<TokenId> ids = lm_tokenizer.encode(record.output);
    if (ids.empty()) return record;
    // The LM sees at most its context window of trailing tokens.
    const size_t ctx = lm.config.context_len;
    const size_t start = ids.size() > ctx ? ids.size() - ctx : 0;
    std::vector<TokenId> prefix(ids.begin() + start, ids.end());
    std::vector<TokenId> extended =
        generate(lm, prefix, max_new, terminal_stop_ids(lm_tokenizer));
    std::vector<TokenId> added(extended.begin() + prefix.size(), extended.end());
    if (record.raw_output.empty()) record.raw_output = record.output;
    record.output += lm_tokenizer.decode(added);
    record.repaired = true;
    return record;
}

TranslateResult translate_corpus(const CorpusManifest& manifest, MtBackend& backend,
                                 const MtBackendDescriptor& descriptor,
                                 const TokenizerModel& mt_tokenizer,
                                 const LanguageTag& tgt,
                                 const TranslateOptions& opts) {
    descriptor.validate();
    if (manifest.lang != descriptor.src) {
        throw Error("translate_corpus: manifest language " + manifest.lang.str() +
                    " does not match backend source " + descriptor.src.str());
    }

    TranslateResult result;
    result.synthetic.lang = tgt;
    result.synthetic.stage = "translate";
    result.synthetic.created_at = manifest.created_at;

    // Pass 1: segment and chunk everything up front, in input order.
    std::vector<SentenceWork> work;
    // Per document: sentence counts per paragraph, to rebuild the structure.
    std::vector<std::vector<size_t>> doc_shape(manifest.documents.size());
    for (size_t di = 0; di < manifest.documents.size(); ++di) {
        const Document& doc = manifest.documents[di];
        doc_shape[di].resize(doc.paragraphs.size());
        for (size_t pi = 0; pi < doc.paragraphs.size(); ++pi) {
            const std::vector<std::string> sentences =
                text::split_sentences(doc.paragraph(pi), manifest.lang.code);
            doc_shape[di][pi] = sentences.size();
            for (size_t si = 0; si < sentences.size(); ++si) {
                SentenceWork sw;
                sw.doc = di;
                sw.paragraph = pi;
                sw.sentence = si;
                sw.chunks = check_chunk(sentences[si], mt_tokenizer, opts.max_tokens);
                sw.translated.resize(sw.chunks.pieces.size());
                result.stats.chunks += sw.chunks.pieces.size();
                work.push_back(std::move(sw));
                ++result.stats.sentences;
            }
        }
    }

    // Pass 2: batched backend calls over the flat chunk stream.
    struct ChunkRef {
        size_t work_index;
        size_t chunk_index;
    };
    std::vector<ChunkRef> flat;
    for (size_t wi = 0; wi < work.size(); ++wi) {
        for (size_t ci = 0; ci < work[wi].chunks.pieces.size(); ++ci) {
            flat.push_back({wi, ci});
        }
    }
    std::vector<bool> doc_failed(manifest.documents.size(), false);
    std::vector<std::string> doc_failure_reason(manifest.documents.size());
    for (size_t off = 0; off < flat.size(); off += descriptor.batch_size) {
        const size_t end = std::min(off + descriptor.batch_size, flat.size());
        std::vector<std::string> batch;
        batch.reserve(end - off);
        for (size_t i = off; i < end; ++i) {
            batch.push_back(work[flat[i].work_index].chunks.pieces[flat[i].chunk_index]);
        }
        ++result.stats.batches;
        std::string error;
        std::vector<std::string> translations =
            call_with_retry(backend, batch, opts.retry, &result.stats.retries, &error);
        if (error.empty() && translations.size() != batch.size()) {
            error = "backend returned " + std::to_string(translations.size()) +
                    " translations for " + std::to_string(batch.size()) + " sentences";
        }
        if (!error.empty()) {
            for (size_t i = off; i < end; ++i) {
                SentenceWork& sw = work[flat[i].work_index];
                if (!doc_failed[sw.doc]) {
                    doc_failed[sw.doc] = true;
                    doc_failure_reason[sw.doc] = error;
                }
            }
            continue;
        }
        for (size_t i = off; i < end; ++i) {
            work[flat[i].work_index].translated[flat[i].chunk_index] =
                std::move(translations[i - off]);
        }
    }

    // Pass 3: per-sentence records with truncation detection and repair.
    result.records.reserve(work.size());
    std::vector<bool> doc_repaired(manifest.documents.size(), false);
    for (SentenceWork& sw : work) {
        const Document& doc = manifest.documents[sw.doc];
        TranslationRecord rec;
        rec.span = {doc.id, sw.paragraph, sw.sentence,
                    rejoin_chunks(sw.chunks.pieces, sw.chunks.joiners)};
        if (doc_failed[sw.doc]) {
            rec.failed = true;
            rec.failure_reason = doc_failure_reason[sw.doc];
            result.failures.push_back(
                {doc.id, sw.paragraph, sw.sentence, rec.failure_reason});
            result.records.push_back(std::move(rec));
            continue;
        }
        rec.output = rejoin_chunks(sw.translated, sw.chunks.joiners);
        rec.raw_output = rec.output;
        rec.truncated = detect_truncation(rec, mt_tokenizer, opts.max_tokens);
        if (rec.truncated) {
            ++result.stats.truncated;
            if (opts.repair_lm != nullptr && opts.repair_tokenizer != nullptr) {
                rec = repair_truncated(std::move(rec), *opts.repair_lm,
                                       *opts.repair_tokenizer, opts.repair_max_new);
                if (rec.repaired) {
                    ++result.stats.repaired;
                    doc_repaired[sw.doc] = true;
                }
            }
        }
        result.records.push_back(std::move(rec));
    }

    // Pass 4: reassemble documents in input order, skipping failed ones.
    size_t cursor = 0;
    for (size_t di = 0; di < manifest.documents.size(); ++di) {
        const Document& src_doc = manifest.documents[di];
        size_t n_sentences = 0;
        for (size_t count : doc_shape[di]) n_sentences += count;
        const size_t doc_begin = cursor;
        cursor += n_sentences;
        if (doc_failed[di]) {
            ++result.stats.failed_docs;
            continue;
        }
        std::string doc_text;
        size_t record_index = doc_begin;
        for (size_t pi = 0; pi < doc_shape[di].size(); ++pi) {
            if (pi > 0) doc_text += "\n\n";
            for (size_t si = 0; si < doc_shape[di][pi]; ++si) {
                if (si > 0) doc_text += ' ';
                doc_text += result.records[record_index].output;
                ++record_index;
            }
        }
        Provenance prov;
        prov.kind = ProvenanceKind::synthetic;
        prov.source_lang = descriptor.src;
        prov.mt_model_id = descriptor.model_id;
        prov.repaired = doc_repaired[di];
        result.synthetic.documents.push_back(
            make_document(std::move(doc_text), tgt, src_doc.url, std::move(prov)));
    }
    return result;
}

}  // namespace monoforge
