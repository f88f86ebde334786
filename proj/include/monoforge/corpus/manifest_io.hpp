#pragma once

#include <filesystem>
#include <string>

#include "monoforge/corpus/document.hpp"

namespace monoforge {

// One JSON object per line:
// {id, lang, url?, text, paragraphs:[[start,end],...],
//  provenance:{kind, source_lang?, mt_model_id?, repaired},
//  word_tokens, bpe_tokens?, drop_reason?}
// Header line (first line, object with "manifest" key) carries lang/stage/created_at.

std::string document_to_json_line(const Document& doc);
Document document_from_json_line(const std::string& line, size_t line_number);

CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

// Dropped-document sidecar: same format, each document annotated with a
// drop_reason in {lid, toxicity, dedup_empty, unscorable, ppl_threshold}.
struct DroppedDocument {
    Document doc;
    std::string drop_reason;
    std::string detail;  // e.g. predicted language or ppl value
};

void save_dropped(const std::vector<DroppedDocument>& dropped, const LanguageTag& lang,
                  const std::string& stage, const std::filesystem::path& path);
std::vector<DroppedDocument> load_dropped(const std::filesystem::path& path);

}  // namespace monoforge
