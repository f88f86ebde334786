#include "monoforge/bpe/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "monoforge/text/unicode.hpp"

namespace monoforge {

namespace {

constexpr const char* kMarkerUtf8 = "\xE2\x96\x81";

std::string byte_piece(unsigned b) {
    static const char* hex = "0123456789ABCDEF";
    std::string s = "<0x00>";
    s[3] = hex[b >> 4];
    s[4] = hex[b & 0xF];
    return s;
}

// One atom of a pre-tokenized unit: either a vocab symbol or a raw codepoint
// that must go through byte fallback (unknown char, or a literal U+2581).
struct Atom {
    TokenId sym = -1;   // -1 when raw
    char32_t raw = 0;
};

}  // namespace

void TokenizerModel::finalize_tables() {
    piece_to_id_.clear();
    char_to_id_.clear();
    merge_rank_.clear();
    for (TokenId id = 0; id < static_cast<TokenId>(pieces_.size()); ++id) {
        piece_to_id_.emplace(pieces_[id], id);
    }
    const TokenId char_base = kSpecialCount + (byte_fallback_ ? 256 : 0);
    for (TokenId id = char_base; id < static_cast<TokenId>(pieces_.size()); ++id) {
        auto cps = unicode::decode_utf8_string(pieces_[id]);
        if (cps.size() == 1) char_to_id_.emplace(cps[0], id);
    }
    int rank = 0;
    for (const auto& [left, right] : merges_) {
        auto li = piece_to_id_.find(left);
        auto ri = piece_to_id_.find(right);
        auto mi = piece_to_id_.find(left + right);
        if (li == piece_to_id_.end() || ri == piece_to_id_.end() || mi == piece_to_id_.end()) {
            throw Error("tokenizer model: merge references unknown piece '" + left + right + "'");
        }
        merge_rank_.emplace(std::make_pair(li->second, ri->second),
                            std::make_pair(rank, mi->second));
        ++rank;
    }
}

const std::string& TokenizerModel::piece(TokenId id) const {
    if (id < 0 || id >= static_cast<TokenId>(pieces_.size())) {
        throw Error("tokenizer: id " + std::to_string(id) + " out of range");
    }
    return pieces_[id];
}

std::optional<TokenId> TokenizerModel::piece_id(const std::string& piece) const {
    auto it = piece_to_id_.find(piece);
    if (it == piece_to_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<TokenId> TokenizerModel::encode(std::string_view text, EncodeStats* stats) const {
    std::vector<TokenId> out;
    if (text.empty()) return out;

    auto cps = unicode::decode_utf8_string(text);

    // Space -> word marker; literal U+2581 stays raw. Units split before each
    // marker so merges never cross word boundaries.
    std::vector<std::vector<Atom>> units;
    auto start_unit_if_needed = [&] {
        if (units.empty()) units.emplace_back();
    };
    for (char32_t cp : cps) {
        if (cp == U' ') {
            units.emplace_back();
            auto it = char_to_id_.find(kWordMarker);
            units.back().push_back(it == char_to_id_.end() ? Atom{-1, kWordMarker}
                                                           : Atom{it->second, 0});
            continue;
        }
        start_unit_if_needed();
        if (cp == kWordMarker) {
            units.back().push_back({-1, cp});
            continue;
        }
        auto it = char_to_id_.find(cp);
        units.back().push_back(it == char_to_id_.end() ? Atom{-1, cp} : Atom{it->second, 0});
    }

    for (auto& unit : units) {
        // Apply merges: repeatedly contract the lowest-rank adjacent pair.
        while (unit.size() > 1) {
            int best_rank = -1;
            for (size_t i = 0; i + 1 < unit.size(); ++i) {
                if (unit[i].sym < 0 || unit[i + 1].sym < 0) continue;
                auto it = merge_rank_.find({unit[i].sym, unit[i + 1].sym});
                if (it == merge_rank_.end()) continue;
                if (best_rank < 0 || it->second.first < best_rank) {
                    best_rank = it->second.first;
                }
            }
            if (best_rank < 0) break;
            std::vector<Atom> next;
            next.reserve(unit.size());
            for (size_t i = 0; i < unit.size(); ++i) {
                if (i + 1 < unit.size() && unit[i].sym >= 0 && unit[i + 1].sym >= 0) {
                    auto it = merge_rank_.find({unit[i].sym, unit[i + 1].sym});
                    if (it != merge_rank_.end() && it->second.first == best_rank) {
                        next.push_back({it->second.second, 0});
                        ++i;
                        continue;
                    }
                }
                next.push_back(unit[i]);
            }
            unit = std::move(next);
        }

        for (const auto& atom : unit) {
            if (atom.sym >= 0) {
                out.push_back(atom.sym);
                continue;
            }
            if (byte_fallback_) {
                std::string utf8;
                unicode::append_utf8(utf8, atom.raw);
                for (unsigned char b : utf8) {
                    out.push_back(kSpecialCount + static_cast<TokenId>(b));
                }
                if (stats) ++stats->byte_fallbacks;
            } else {
                out.push_back(kUnk);
                if (stats) ++stats->unk_emitted;
            }
        }
    }
    return out;
}

std::string TokenizerModel::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || id >= static_cast<TokenId>(pieces_.size())) {
            throw Error("decode: id " + std::to_string(id) + " out of range");
        }
        if (is_special(id)) continue;
        if (is_byte(id)) {
            out.push_back(static_cast<char>(id - kSpecialCount));
            continue;
        }
        // Word markers in vocab pieces map back to spaces.
        std::string_view piece = pieces_[id];
        size_t pos = 0;
        while (pos < piece.size()) {
            size_t marker = piece.find(kMarkerUtf8, pos);
            if (marker == std::string_view::npos) {
                out.append(piece.substr(pos));
                break;
            }
            out.append(piece.substr(pos, marker - pos));
            out.push_back(' ');
            pos = marker + 3;
        }
    }
    return out;
}

void TokenizerModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["format"] = "monoforge-bpe";
    j["version"] = 1;
    j["byte_fallback"] = byte_fallback_;
    j["specials"] = {{"pad", kPad}, {"unk", kUnk}, {"bos", kBos}, {"eos", kEos}, {"sep", kSep}};
    j["pieces"] = pieces_;
    auto& merges = j["merges"] = nlohmann::json::array();
    for (const auto& [l, r] : merges_) merges.push_back({l, r});
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write tokenizer model " + path.string());
    out << j.dump();
}

TokenizerModel TokenizerModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open tokenizer model " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "monoforge-bpe" || j.value("version", 0) != 1) {
        throw Error("unrecognized tokenizer model format in " + path.string());
    }
    TokenizerModel model;
    model.byte_fallback_ = j.at("byte_fallback").get<bool>();
    model.pieces_ = j.at("pieces").get<std::vector<std::string>>();
    for (const auto& m : j.at("merges")) {
        model.merges_.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
    }
    model.finalize_tables();
    return model;
}

void TokenizerConfig::validate() const {
    if (vocab_size < TokenizerModel::kSpecialCount + (byte_fallback ? 256u : 0u) + 1) {
        throw Error("tokenizer config: vocab_size " + std::to_string(vocab_size) +
                    " leaves no room for characters");
    }
    if (vocab_size > 1000000) {
        throw Error("tokenizer config: vocab_size " + std::to_string(vocab_size) +
                    " is out of range");
    }
}

// ---------------------------------------------------------------------------
// Training

class BpeTrainer {
public:
    BpeTrainer(const std::vector<std::string>& sentences, size_t vocab_size, bool byte_fallback)
        : vocab_size_(vocab_size), byte_fallback_(byte_fallback) {
        build_units(sentences);
    }

    TokenizerModel run() {
        TokenizerModel model;
        model.byte_fallback_ = byte_fallback_;
        model.pieces_ = {"<pad>", "<unk>", "<s>", "</s>", "<sep>"};
        if (byte_fallback_) {
            for (unsigned b = 0; b < 256; ++b) model.pieces_.push_back(byte_piece(b));
        }

        // Character inventory, sorted for stable ids. The word marker is
        // always present; a literal U+2581 is excluded (byte fallback).
        std::map<std::string, TokenId> sym_ids;
        for (const auto& s : char_strings_) {
            sym_ids.emplace(s, 0);
        }
        sym_ids.emplace(kMarkerUtf8, 0);
        if (model.pieces_.size() + sym_ids.size() > vocab_size_) {
            throw Error("bpe_train: vocab_size " + std::to_string(vocab_size_) + " below base symbol count " +
                        std::to_string(model.pieces_.size() + sym_ids.size()));
        }
        std::vector<std::string> sym_strings;
        for (auto& [s, id] : sym_ids) {
            id = static_cast<TokenId>(model.pieces_.size() + sym_strings.size());
            sym_strings.push_back(s);
        }
        // Re-key units from char strings to dense symbol indices.
        for (auto& unit : units_) {
            for (auto& sym : unit.syms) {
                sym = sym_ids.at(char_strings_vec_[sym]) - static_cast<TokenId>(model.pieces_.size());
            }
        }

        count_all_pairs();

        while (model.pieces_.size() + sym_strings.size() < vocab_size_) {
            auto best = select_best_pair(sym_strings);
            if (!best) {
                throw Error("bpe_train: ran out of mergeable pairs at vocab size " +
                            std::to_string(model.pieces_.size() + sym_strings.size()) +
                            ", requested " + std::to_string(vocab_size_));
            }
            auto [a, b] = *best;
            TokenId merged = static_cast<TokenId>(sym_strings.size());
            sym_strings.push_back(sym_strings[a] + sym_strings[b]);
            model.merges_.emplace_back(sym_strings[a], sym_strings[b]);
            apply_merge(a, b, merged);
        }

        model.pieces_.insert(model.pieces_.end(), sym_strings.begin(), sym_strings.end());
        model.finalize_tables();
        return model;
    }

private:
    using Pair = std::pair<TokenId, TokenId>;
    struct PairHash {
        size_t operator()(const Pair& p) const {
            return std::hash<uint64_t>()((uint64_t(uint32_t(p.first)) << 32) | uint32_t(p.second));
        }
    };

    struct Unit {
        std::vector<TokenId> syms;
        uint64_t freq = 0;
    };

    void build_units(const std::vector<std::string>& sentences) {
        std::unordered_map<std::string, size_t> unit_index;
        std::map<std::string, TokenId> char_intern;
        auto intern_char = [&](char32_t cp) {
            std::string s;
            unicode::append_utf8(s, cp);
            auto [it, inserted] = char_intern.emplace(s, 0);
            if (inserted) {
                it->second = static_cast<TokenId>(char_strings_vec_.size());
                char_strings_vec_.push_back(s);
                char_strings_.insert(s);
            }
            return it->second;
        };

        for (const auto& sentence : sentences) {
            auto cps = unicode::decode_utf8_string(sentence);
            std::vector<std::u32string> unit_texts;
            for (char32_t cp : cps) {
                if (cp == U' ') {
                    unit_texts.emplace_back(1, kWordMarkerCp);
                    continue;
                }
                if (unit_texts.empty()) unit_texts.emplace_back();
                if (cp == kWordMarkerCp) continue;  // literal marker: byte-fallback territory
                unit_texts.back().push_back(cp);
            }
            for (const auto& ut : unit_texts) {
                if (ut.empty()) continue;
                std::string key;
                for (char32_t cp : ut) unicode::append_utf8(key, cp);
                auto [it, inserted] = unit_index.emplace(key, units_.size());
                if (inserted) {
                    Unit u;
                    u.freq = 1;
                    for (char32_t cp : ut) u.syms.push_back(intern_char(cp));
                    units_.push_back(std::move(u));
                } else {
                    ++units_[it->second].freq;
                }
            }
        }
        if (units_.empty()) throw Error("bpe_train: empty training stream");
    }

    void count_all_pairs() {
        pair_counts_.clear();
        pair_units_.clear();
        for (size_t u = 0; u < units_.size(); ++u) {
            const auto& unit = units_[u];
            for (size_t i = 0; i + 1 < unit.syms.size(); ++i) {
                Pair p{unit.syms[i], unit.syms[i + 1]};
                pair_counts_[p] += unit.freq;
                pair_units_[p].insert(u);
            }
        }
    }

    std::optional<Pair> select_best_pair(const std::vector<std::string>& sym_strings) const {
        std::optional<Pair> best;
        uint64_t best_count = 0;
        for (const auto& [pair, count] : pair_counts_) {
            if (count == 0) continue;
            if (!best || count > best_count) {
                best = pair;
                best_count = count;
                continue;
            }
            if (count == best_count) {
                const auto& [ba, bb] = *best;
                const auto& [pa, pb] = pair;
                if (std::tie(sym_strings[pa], sym_strings[pb]) <
                    std::tie(sym_strings[ba], sym_strings[bb])) {
                    best = pair;
                }
            }
        }
        return best;
    }

    void adjust(const Pair& p, int64_t delta, size_t unit_idx) {
        auto& count = pair_counts_[p];
        count = static_cast<uint64_t>(static_cast<int64_t>(count) + delta);
        if (delta > 0) pair_units_[p].insert(unit_idx);
    }

    void apply_merge(TokenId a, TokenId b, TokenId merged) {
        const Pair target{a, b};
        auto hit = pair_units_.find(target);
        if (hit == pair_units_.end()) return;
        auto affected = std::move(hit->second);
        pair_units_.erase(hit);
        pair_counts_.erase(target);

        // Removals of the target pair itself are covered by the wholesale
        // erase above; adjusting it again would resurrect the entry.
        auto remove = [&](Pair p, uint64_t f, size_t u) {
            if (p != target) adjust(p, -static_cast<int64_t>(f), u);
        };

        for (size_t u : affected) {
            auto& unit = units_[u];
            const uint64_t f = unit.freq;
            std::vector<TokenId> next;
            next.reserve(unit.syms.size());
            for (size_t i = 0; i < unit.syms.size(); ++i) {
                if (i + 1 < unit.syms.size() && unit.syms[i] == a && unit.syms[i + 1] == b) {
                    if (!next.empty()) {
                        remove({next.back(), a}, f, u);
                        adjust({next.back(), merged}, static_cast<int64_t>(f), u);
                    }
                    if (i + 2 < unit.syms.size()) {
                        remove({b, unit.syms[i + 2]}, f, u);
                        adjust({merged, unit.syms[i + 2]}, static_cast<int64_t>(f), u);
                    }
                    next.push_back(merged);
                    ++i;
                } else {
                    next.push_back(unit.syms[i]);
                }
            }
            unit.syms = std::move(next);
        }
    }

    static constexpr char32_t kWordMarkerCp = TokenizerModel::kWordMarker;

    size_t vocab_size_;
    bool byte_fallback_;
    std::vector<Unit> units_;
    std::set<std::string> char_strings_;
    std::vector<std::string> char_strings_vec_;
    std::unordered_map<Pair, uint64_t, PairHash> pair_counts_;
    std::unordered_map<Pair, std::set<size_t>, PairHash> pair_units_;
};

TokenizerModel TokenizerModel::train(const std::vector<std::string>& sentences,
                                     size_t vocab_size, bool byte_fallback) {
    return BpeTrainer(sentences, vocab_size, byte_fallback).run();
}

}  // namespace monoforge
