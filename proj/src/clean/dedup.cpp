#include "monoforge/clean/dedup.hpp"

#include <cctype>
#include <fstream>
#include <unordered_set>

#include "monoforge/text/unicode.hpp"

namespace monoforge {

namespace {

std::string_view trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Rebuilds document text from the kept paragraphs, re-deriving spans and the
// token count. The id is not recomputed; it was fixed at ingest.
Document rebuild_document(const Document& doc, const std::vector<std::string_view>& paragraphs) {
    Document out = doc;
    out.text.clear();
    out.paragraphs.clear();
    out.bpe_tokens.reset();
    for (const auto& p : paragraphs) {
        if (!out.text.empty()) out.text += "\n\n";
        uint64_t begin = out.text.size();
        out.text.append(p);
        out.paragraphs.push_back({begin, out.text.size()});
    }
    out.word_tokens = count_word_tokens(out.text);
    return out;
}

}  // namespace

void DedupLedger::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write ledger " + path.string());
    out << "monoforge-dedup-ledger v1 " << seen_.size() << " " << kept_ << " " << dropped_ << "\n";
    for (const auto& h : seen_) {
        out.write(reinterpret_cast<const char*>(&h.h1), 8);
        out.write(reinterpret_cast<const char*>(&h.h2), 8);
    }
}

DedupLedger DedupLedger::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open ledger " + path.string());
    std::string magic, version;
    size_t n = 0;
    uint64_t kept = 0, dropped = 0;
    in >> magic >> version >> n >> kept >> dropped;
    if (magic != "monoforge-dedup-ledger" || version != "v1") {
        throw Error("unrecognized ledger format in " + path.string());
    }
    in.ignore(1);  // newline
    DedupLedger ledger;
    for (size_t i = 0; i < n; ++i) {
        Hash128 h;
        in.read(reinterpret_cast<char*>(&h.h1), 8);
        in.read(reinterpret_cast<char*>(&h.h2), 8);
        if (!in) throw Error("truncated ledger " + path.string());
        ledger.seen_.insert(h);
    }
    ledger.kept_ = kept;
    ledger.dropped_ = dropped;
    return ledger;
}

Hash128 paragraph_hash(std::string_view paragraph) {
    return murmur3_128(trim(paragraph), 0);
}

DedupResult dedup_paragraphs(const CorpusManifest& manifest, DedupLedger& ledger) {
    DedupResult result;
    result.kept.lang = manifest.lang;
    result.kept.stage = "dedup";
    result.kept.created_at = manifest.created_at;

    for (const auto& doc : manifest.documents) {
        std::vector<std::string_view> kept_paragraphs;
        kept_paragraphs.reserve(doc.paragraphs.size());
        for (size_t i = 0; i < doc.paragraphs.size(); ++i) {
            std::string_view p = doc.paragraph(i);
            if (ledger.admit(paragraph_hash(p))) {
                kept_paragraphs.push_back(p);
            } else {
                ++result.paragraphs_removed;
            }
        }
        if (kept_paragraphs.empty()) {
            result.dropped.push_back({doc, "dedup_empty", ""});
        } else if (kept_paragraphs.size() == doc.paragraphs.size()) {
            result.kept.documents.push_back(doc);
        } else {
            result.kept.documents.push_back(rebuild_document(doc, kept_paragraphs));
        }
    }
    return result;
}

std::string normalize_url(std::string_view url) {
    std::string out(trim(url));
    size_t scheme_end = out.find("://");
    size_t host_start = 0;
    if (scheme_end != std::string::npos) {
        for (size_t i = 0; i < scheme_end; ++i) {
            out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
        }
        host_start = scheme_end + 3;
    }
    size_t host_end = out.find_first_of("/?#", host_start);
    if (host_end == std::string::npos) host_end = out.size();
    for (size_t i = host_start; i < host_end; ++i) {
        out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
    }
    if (out.size() > host_start && out.back() == '/') out.pop_back();
    return out;
}

std::vector<std::string> dedup_urls(const std::vector<std::string>& urls) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    out.reserve(urls.size());
    for (const auto& url : urls) {
        if (seen.insert(normalize_url(url)).second) out.push_back(url);
    }
    return out;
}

DedupResult merge_corpora(const std::vector<CorpusManifest>& manifests) {
    CorpusManifest merged;
    if (manifests.empty()) {
        merged.lang = {"und", ""};
        DedupLedger ledger;
        return dedup_paragraphs(merged, ledger);
    }
    merged.lang = manifests.front().lang;
    merged.stage = "merge";
    std::unordered_set<std::string> ids;
    for (const auto& m : manifests) {
        if (m.lang != merged.lang) {
            throw Error("merge_corpora: mixed languages " + merged.lang.str() +
                        " and " + m.lang.str());
        }
        for (const auto& doc : m.documents) {
            if (ids.insert(doc.id).second) merged.documents.push_back(doc);
        }
    }
    DedupLedger ledger;
    auto result = dedup_paragraphs(merged, ledger);
    result.kept.stage = "merge";
    return result;
}

}  // namespace monoforge
