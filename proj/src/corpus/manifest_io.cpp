#include "monoforge/corpus/manifest_io.hpp"

#include <fstream>

#include <json.hpp>

namespace monoforge {

using nlohmann::json;

namespace {

json provenance_to_json(const Provenance& p) {
    json j;
    j["kind"] = p.kind == ProvenanceKind::clean ? "clean" : "synthetic";
    if (p.source_lang) j["source_lang"] = p.source_lang->str();
    if (!p.mt_model_id.empty()) j["mt_model_id"] = p.mt_model_id;
    j["repaired"] = p.repaired;
    return j;
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "clean") {
        p.kind = ProvenanceKind::clean;
    } else if (kind == "synthetic") {
        p.kind = ProvenanceKind::synthetic;
    } else {
        throw Error("unknown provenance kind '" + kind + "'");
    }
    if (j.contains("source_lang")) {
        p.source_lang = parse_language_tag(j.at("source_lang").get<std::string>());
    }
    if (j.contains("mt_model_id")) p.mt_model_id = j.at("mt_model_id").get<std::string>();
    p.repaired = j.value("repaired", false);
    return p;
}

json document_to_json(const Document& doc) {
    json j;
    j["id"] = doc.id;
    j["lang"] = doc.lang.str();
    if (!doc.url.empty()) j["url"] = doc.url;
    j["text"] = doc.text;
    auto& spans = j["paragraphs"] = json::array();
    for (const auto& p : doc.paragraphs) spans.push_back({p.begin, p.end});
    j["provenance"] = provenance_to_json(doc.provenance);
    j["word_tokens"] = doc.word_tokens;
    if (doc.bpe_tokens) j["bpe_tokens"] = *doc.bpe_tokens;
    return j;
}

Document document_from_json(const json& j) {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.lang = parse_language_tag(j.at("lang").get<std::string>());
    doc.url = j.value("url", "");
    doc.text = j.at("text").get<std::string>();
    for (const auto& span : j.at("paragraphs")) {
        doc.paragraphs.push_back({span.at(0).get<uint64_t>(), span.at(1).get<uint64_t>()});
    }
    doc.provenance = provenance_from_json(j.at("provenance"));
    doc.word_tokens = j.at("word_tokens").get<uint64_t>();
    if (j.contains("bpe_tokens")) doc.bpe_tokens = j.at("bpe_tokens").get<uint64_t>();
    return doc;
}

}  // namespace

std::string document_to_json_line(const Document& doc) {
    return document_to_json(doc).dump();
}

Document document_from_json_line(const std::string& line, size_t line_number) {
    json j;
    try {
        j = json::parse(line);
        return document_from_json(j);
    } catch (const json::exception& e) {
        throw Error("line " + std::to_string(line_number) + ": " + e.what());
    }
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open manifest " + path.string());

    CorpusManifest manifest;
    std::string line;
    size_t line_number = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw Error("line 1: " + std::string(e.what()));
            }
            if (j.contains("manifest")) {
                const auto& h = j.at("manifest");
                manifest.lang = parse_language_tag(h.at("lang").get<std::string>());
                manifest.stage = h.value("stage", "");
                manifest.created_at = h.value("created_at", "");
                continue;
            }
            // Headerless file: first line is a document.
        }
        manifest.documents.push_back(document_from_json_line(line, line_number));
    }
    if (manifest.lang.code.empty() && !manifest.documents.empty()) {
        manifest.lang = manifest.documents.front().lang;
    }
    if (manifest.lang.code.empty()) manifest.lang = {"und", ""};
    validate_manifest(manifest);
    return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
    validate_manifest(manifest);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest " + path.string());
    json header;
    header["manifest"]["lang"] = manifest.lang.str();
    header["manifest"]["stage"] = manifest.stage;
    header["manifest"]["created_at"] = manifest.created_at;
    out << header.dump() << "\n";
    for (const auto& doc : manifest.documents) {
        out << document_to_json_line(doc) << "\n";
    }
    if (!out) throw Error("write failed for manifest " + path.string());
}

void save_dropped(const std::vector<DroppedDocument>& dropped, const LanguageTag& lang,
                  const std::string& stage, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write dropped manifest " + path.string());
    json header;
    header["manifest"]["lang"] = lang.str();
    header["manifest"]["stage"] = stage;
    header["manifest"]["created_at"] = "";
    out << header.dump() << "\n";
    for (const auto& d : dropped) {
        json j = json::parse(document_to_json_line(d.doc));
        j["drop_reason"] = d.drop_reason;
        if (!d.detail.empty()) j["drop_detail"] = d.detail;
        out << j.dump() << "\n";
    }
}

std::vector<DroppedDocument> load_dropped(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dropped manifest " + path.string());
    std::vector<DroppedDocument> dropped;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        if (line_number == 1) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw Error("line 1: " + std::string(e.what()));
            }
            if (j.contains("manifest")) continue;  // header
        }
        DroppedDocument d;
        d.doc = document_from_json_line(line, line_number);
        const json j = json::parse(line);
        d.drop_reason = j.value("drop_reason", "");
        d.detail = j.value("drop_detail", "");
        dropped.push_back(std::move(d));
    }
    return dropped;
}

}  // namespace monoforge
