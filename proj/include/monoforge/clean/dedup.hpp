#pragma once

#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "monoforge/clean/murmur3.hpp"
#include "monoforge/corpus/document.hpp"
#include "monoforge/corpus/manifest_io.hpp"

namespace monoforge {

// Paragraph hashes already admitted. Persistable so dedup state can carry
// across pipeline runs when the operator asks for it.
class DedupLedger {
public:
    // Returns true when the hash was new (paragraph kept).
    bool admit(const Hash128& h) {
        if (seen_.insert(h).second) {
            ++kept_;
            return true;
        }
        ++dropped_;
        return false;
    }

    bool contains(const Hash128& h) const { return seen_.contains(h); }
    size_t size() const { return seen_.size(); }
    uint64_t kept() const { return kept_; }
    uint64_t dropped() const { return dropped_; }

    void save(const std::filesystem::path& path) const;
    static DedupLedger load(const std::filesystem::path& path);

private:
    struct HashOf {
        size_t operator()(const Hash128& h) const { return h.h1 ^ (h.h2 * 0x9e3779b97f4a7c15ULL); }
    };
    std::unordered_set<Hash128, HashOf> seen_;
    uint64_t kept_ = 0;
    uint64_t dropped_ = 0;
};

// Hash of a paragraph for dedup purposes: murmur3_128 of the UTF-8 bytes
// after trimming leading/trailing whitespace, seed 0.
Hash128 paragraph_hash(std::string_view paragraph);

struct DedupResult {
    CorpusManifest kept;
    std::vector<DroppedDocument> dropped;  // drop_reason = dedup_empty
    uint64_t paragraphs_removed = 0;
};

// First occurrence (in manifest order, then paragraph order) wins, both
// within the corpus and against prior ledger state. Documents left without
// paragraphs are dropped. Idempotent.
DedupResult dedup_paragraphs(const CorpusManifest& manifest, DedupLedger& ledger);

// First occurrence kept in order; comparison on the normalized URL
// (lowercased scheme and host, trailing slash stripped).
std::vector<std::string> dedup_urls(const std::vector<std::string>& urls);
std::string normalize_url(std::string_view url);

// Concatenation in argument order followed by paragraph dedup with a fresh
// ledger. Inputs must share a language. Documents whose id was already seen
// are skipped (ids are content hashes, so an equal id is the same content).
DedupResult merge_corpora(const std::vector<CorpusManifest>& manifests);

}  // namespace monoforge
