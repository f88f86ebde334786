#include "monoforge/pipeline/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "monoforge/bpe/sampling.hpp"
#include "monoforge/bpe/tokenizer.hpp"
#include "monoforge/clean/dedup.hpp"
#include "monoforge/clean/lid.hpp"
#include "monoforge/clean/murmur3.hpp"
#include "monoforge/clean/normalize.hpp"
#include "monoforge/clean/toxicity.hpp"
#include "monoforge/corpus/manifest_io.hpp"
#include "monoforge/filter/reports.hpp"
#include "monoforge/filter/score_ledger.hpp"
#include "monoforge/filter/threshold.hpp"
#include "monoforge/lm/checkpoint.hpp"
#include "monoforge/lm/train.hpp"
#include "monoforge/translate/translate.hpp"
#include "monoforge/util/rng.hpp"

#include <json.hpp>

namespace monoforge {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

json counters_to_json(const StageCounters& c) {
    json j;
    j["stage"] = c.stage;
    j["docs_in"] = c.docs_in;
    j["docs_out"] = c.docs_out;
    j["tokens_in"] = c.tokens_in;
    j["tokens_out"] = c.tokens_out;
    j["drops"] = json::object();
    for (const auto& [reason, count] : c.drops) j["drops"][reason] = count;
    j["repairs"] = c.repairs;
    j["retries"] = c.retries;
    j["wall_seconds"] = c.wall_seconds;
    j["extras"] = json::object();
    for (const auto& [key, value] : c.extras) j["extras"][key] = value;
    return j;
}

StageCounters counters_from_json(const json& j) {
    StageCounters c;
    c.stage = j.at("stage").get<std::string>();
    c.docs_in = j.at("docs_in").get<uint64_t>();
    c.docs_out = j.at("docs_out").get<uint64_t>();
    c.tokens_in = j.at("tokens_in").get<uint64_t>();
    c.tokens_out = j.at("tokens_out").get<uint64_t>();
    for (const auto& [reason, count] : j.at("drops").items()) {
        c.drops[reason] = count.get<uint64_t>();
    }
    c.repairs = j.at("repairs").get<uint64_t>();
    c.retries = j.at("retries").get<uint64_t>();
    c.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& [key, value] : j.at("extras").items()) {
        c.extras[key] = value.get<double>();
    }
    return c;
}

json split_to_json(const SplitResult& s) {
    json j;
    j["name"] = s.target.name;
    j["kind"] = s.target.kind;
    j["token_target"] = s.target.token_target;
    j["pool_tokens"] = s.target.pool_tokens;
    j["feasible"] = s.target.feasible;
    j["shortfall"] = s.target.shortfall;
    j["actual_tokens"] = s.actual_tokens;
    j["docs"] = s.docs;
    j["file"] = s.file;
    return j;
}

SplitResult split_from_json(const json& j) {
    SplitResult s;
    s.target.name = j.at("name").get<std::string>();
    s.target.kind = j.at("kind").get<std::string>();
    s.target.token_target = j.at("token_target").get<uint64_t>();
    s.target.pool_tokens = j.at("pool_tokens").get<uint64_t>();
    s.target.feasible = j.at("feasible").get<bool>();
    s.target.shortfall = j.at("shortfall").get<uint64_t>();
    s.actual_tokens = j.at("actual_tokens").get<uint64_t>();
    s.docs = j.at("docs").get<uint64_t>();
    s.file = j.at("file").get<std::string>();
    return s;
}

struct RunState {
    std::string config_hash;
    std::vector<StageCounters> completed;
    std::vector<SplitResult> splits;
};

std::optional<RunState> load_state(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    try {
        const json j = json::parse(slurp_file(path));
        RunState st;
        st.config_hash = j.at("config_hash").get<std::string>();
        for (const auto& c : j.at("completed")) st.completed.push_back(counters_from_json(c));
        for (const auto& s : j.at("splits")) st.splits.push_back(split_from_json(s));
        return st;
    } catch (const std::exception&) {
        return std::nullopt;  // torn or stale state: start fresh
    }
}

void save_state(const RunState& st, const fs::path& path) {
    json j;
    j["version"] = 1;
    j["config_hash"] = st.config_hash;
    j["completed"] = json::array();
    for (const auto& c : st.completed) j["completed"].push_back(counters_to_json(c));
    j["splits"] = json::array();
    for (const auto& s : st.splits) j["splits"].push_back(split_to_json(s));

    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write state file " + tmp.string());
        out << j.dump(2) << "\n";
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);  // atomic replace, so a kill never tears the state
}

uint64_t split_seed(uint64_t base_seed, const std::string& name) {
    return murmur3_128(name, static_cast<uint32_t>(base_seed)).h1;
}

// Seeded uniform subsample: documents are admitted in shuffled order until
// the token target is met (inclusive overshoot, like the filter threshold);
// the result keeps the pool's manifest order.
CorpusManifest sample_to_budget(const CorpusManifest& pool, uint64_t target,
                                uint64_t seed,
                                const std::unordered_set<std::string>* exclude) {
    CorpusManifest out;
    out.lang = pool.lang;
    out.stage = "split";
    out.created_at = pool.created_at;
    if (target == 0) return out;

    std::vector<size_t> order;
    for (size_t i = 0; i < pool.documents.size(); ++i) {
        if (exclude == nullptr || exclude->count(pool.documents[i].id) == 0) {
            order.push_back(i);
        }
    }
    Rng rng(seed);
    rng.shuffle(order);

    std::set<size_t> chosen;
    uint64_t total = 0;
    for (size_t i : order) {
        chosen.insert(i);
        total += pool.documents[i].word_tokens;
        if (total >= target) break;
    }
    for (size_t i : chosen) out.documents.push_back(pool.documents[i]);
    return out;
}

class PipelineRun {
public:
    PipelineRun(const PipelineConfig& config, const RunOptions& options)
        : config_(config), options_(options), dir_(config.output_dir) {}

    RunReport execute();

private:
    LanguageTag tag_for(const std::string& code) const {
        return code == config_.src.code ? config_.src : config_.tgt;
    }
    fs::path part_path(const std::string& stage, const std::string& lang, size_t i) const {
        return dir_ / (stage + "." + lang + "." + std::to_string(i) + ".jsonl");
    }
    fs::path dropped_path(const std::string& stage, const std::string& lang) const {
        return dir_ / (stage + ".dropped." + lang + ".jsonl");
    }

    const CorpusManifest& current_single(const std::string& lang) const {
        const auto merged = merged_.find(lang);
        if (merged != merged_.end()) return merged->second;
        const auto it = parts_.find(lang);
        if (it == parts_.end() || it->second.size() != 1) {
            throw Error("no single manifest for language '" + lang +
                        "' (multiple inputs need the merge stage)");
        }
        return it->second.front();
    }

    void count_in(StageCounters& c, const CorpusManifest& m) const {
        c.docs_in += m.documents.size();
        c.tokens_in += m.total_word_tokens();
    }
    void count_out(StageCounters& c, const CorpusManifest& m) const {
        c.docs_out += m.documents.size();
        c.tokens_out += m.total_word_tokens();
    }

    void run_stage(const std::string& name, StageCounters& c);
    void load_stage(const std::string& name);

    void stage_clean(StageCounters& c);
    void stage_lid(StageCounters& c);
    void stage_toxicity(StageCounters& c);
    void stage_dedup(StageCounters& c);
    void stage_merge(StageCounters& c);
    void stage_tokenize(StageCounters& c);
    void stage_lm_train(StageCounters& c);
    void stage_translate(StageCounters& c);
    void stage_score(StageCounters& c);
    void stage_filter(StageCounters& c);
    void stage_report(StageCounters& c);
    void stage_split(StageCounters& c);

    void load_parts(const std::string& stage);

    const PipelineConfig& config_;
    const RunOptions& options_;
    fs::path dir_;

    std::map<std::string, std::vector<CorpusManifest>> parts_;
    std::map<std::string, CorpusManifest> merged_;
    std::optional<TokenizerModel> tokenizer_;
    std::optional<TinyLMParams<double>> scorer_;
    CorpusManifest synthetic_;
    bool have_synthetic_ = false;
    ScoreLedger ledger_;
    FilterThreshold threshold_;
    FilterOutcome outcome_;
    std::vector<SplitResult> splits_;
};

void PipelineRun::stage_clean(StageCounters& c) {
    NormalizeStats norm_totals;
    for (const auto& [lang_code, files] : config_.inputs) {
        const LanguageTag lang = tag_for(lang_code);
        std::unordered_set<std::string> seen_urls;
        std::vector<DroppedDocument> dropped;
        std::vector<CorpusManifest> list;
        for (size_t i = 0; i < files.size(); ++i) {
            CorpusManifest m;
            m.lang = lang;
            m.stage = "clean";
            m.created_at = config_.created_at;
            std::unordered_set<std::string> ids;

            std::ifstream in(files[i], std::ios::binary);
            if (!in) throw Error("cannot open input file " + files[i].string());
            std::string line;
            size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                std::string url, text;
                try {
                    const json j = json::parse(line);
                    url = j.value("url", "");
                    text = j.at("text").get<std::string>();
                } catch (const json::exception& e) {
                    throw Error(files[i].string() + ":" + std::to_string(line_no) + ": " +
                                e.what());
                }
                ++c.docs_in;
                c.tokens_in += count_word_tokens(text);

                NormalizeStats stats;
                Document doc = ingest_document(text, lang, url, {}, &stats);
                norm_totals.utf8_replacements += stats.utf8_replacements;
                norm_totals.tags_removed += stats.tags_removed;
                norm_totals.symbols_removed += stats.symbols_removed;

                if (doc.text.empty()) {
                    dropped.push_back({std::move(doc), "clean_empty", "normalized to empty"});
                    continue;
                }
                if (config_.url_dedup && !doc.url.empty()) {
                    const std::string norm_url = normalize_url(doc.url);
                    if (!seen_urls.insert(norm_url).second) {
                        dropped.push_back({std::move(doc), "url_dup", norm_url});
                        continue;
                    }
                }
                if (!ids.insert(doc.id).second) {
                    dropped.push_back(
                        {std::move(doc), "duplicate", "content id already present"});
                    continue;
                }
                m.documents.push_back(std::move(doc));
            }
            count_out(c, m);
            save_manifest(m, part_path("clean", lang_code, i));
            list.push_back(std::move(m));
        }
        for (const auto& d : dropped) ++c.drops[d.drop_reason];
        save_dropped(dropped, lang, "clean", dropped_path("clean", lang_code));
        parts_[lang_code] = std::move(list);
    }
    c.extras["utf8_replacements"] = static_cast<double>(norm_totals.utf8_replacements);
    c.extras["tags_removed"] = static_cast<double>(norm_totals.tags_removed);
    c.extras["symbols_removed"] = static_cast<double>(norm_totals.symbols_removed);
}

void PipelineRun::stage_lid(StageCounters& c) {
    std::map<std::string, std::vector<std::string>> samples;
    for (const auto& [lang, files] : config_.lid_samples) {
        for (const auto& f : files) samples[lang].push_back(slurp_file(f));
    }
    const LidModel model = LidModel::train(samples);
    model.save(dir_ / "lid.model");

    for (auto& [lang_code, list] : parts_) {
        const LanguageTag target = tag_for(lang_code);
        std::vector<DroppedDocument> dropped;
        for (size_t i = 0; i < list.size(); ++i) {
            count_in(c, list[i]);
            LidFilterResult r = lid_filter(list[i], model, target, config_.lid_min_conf);
            r.kept.created_at = config_.created_at;
            count_out(c, r.kept);
            c.drops["lid"] += r.dropped.size();
            for (auto& d : r.dropped) dropped.push_back(std::move(d));
            save_manifest(r.kept, part_path("lid", lang_code, i));
            list[i] = std::move(r.kept);
        }
        save_dropped(dropped, target, "lid", dropped_path("lid", lang_code));
    }
}

void PipelineRun::stage_toxicity(StageCounters& c) {
    for (auto& [lang_code, list] : parts_) {
        const LanguageTag lang = tag_for(lang_code);
        std::optional<ToxicWordList> words;
        const auto it = config_.toxic_lists.find(lang_code);
        if (it != config_.toxic_lists.end()) {
            words = ToxicWordList::load(it->second, lang);
        }
        std::vector<DroppedDocument> dropped;
        for (size_t i = 0; i < list.size(); ++i) {
            count_in(c, list[i]);
            if (words) {
                ToxicityResult r =
                    toxicity_filter(list[i], *words, config_.toxicity_match_ratio);
                r.kept.created_at = config_.created_at;
                count_out(c, r.kept);
                c.drops["toxicity"] += r.dropped.size();
                for (auto& d : r.dropped) dropped.push_back(std::move(d));
                list[i] = std::move(r.kept);
            } else {
                list[i].stage = "toxicity";  // pass-through: no list for this language
                count_out(c, list[i]);
            }
            save_manifest(list[i], part_path("toxicity", lang_code, i));
        }
        save_dropped(dropped, lang, "toxicity", dropped_path("toxicity", lang_code));
    }
}

void PipelineRun::stage_dedup(StageCounters& c) {
    for (auto& [lang_code, list] : parts_) {
        const LanguageTag lang = tag_for(lang_code);
        std::vector<DroppedDocument> dropped;
        for (size_t i = 0; i < list.size(); ++i) {
            count_in(c, list[i]);
            DedupLedger ledger;  // fresh per monolingual split
            DedupResult r = dedup_paragraphs(list[i], ledger);
            r.kept.created_at = config_.created_at;
            count_out(c, r.kept);
            c.drops["dedup_empty"] += r.dropped.size();
            c.extras["paragraphs_removed"] += static_cast<double>(r.paragraphs_removed);
            for (auto& d : r.dropped) dropped.push_back(std::move(d));
            save_manifest(r.kept, part_path("dedup", lang_code, i));
            list[i] = std::move(r.kept);
        }
        save_dropped(dropped, lang, "dedup", dropped_path("dedup", lang_code));
    }
}

void PipelineRun::stage_merge(StageCounters& c) {
    for (auto& [lang_code, list] : parts_) {
        const LanguageTag lang = tag_for(lang_code);
        std::vector<DroppedDocument> dropped;
        std::unordered_set<std::string> ids;
        for (const auto& m : list) {
            count_in(c, m);
            for (const auto& doc : m.documents) {
                if (!ids.insert(doc.id).second) {
                    dropped.push_back({doc, "duplicate", "content id repeated across inputs"});
                }
            }
        }
        c.drops["duplicate"] += dropped.size();

        DedupResult r = merge_corpora(list);
        r.kept.created_at = config_.created_at;
        count_out(c, r.kept);
        c.drops["dedup_empty"] += r.dropped.size();
        c.extras["paragraphs_removed"] += static_cast<double>(r.paragraphs_removed);
        for (auto& d : r.dropped) dropped.push_back(std::move(d));

        save_manifest(r.kept, dir_ / ("merge." + lang_code + ".jsonl"));
        save_dropped(dropped, lang, "merge", dropped_path("merge", lang_code));
        merged_[lang_code] = std::move(r.kept);
    }
}

void PipelineRun::stage_tokenize(StageCounters& c) {
    SamplingPlan plan;
    std::map<std::string, const CorpusManifest*> manifests;
    for (const auto& [lang_code, files] : config_.inputs) {
        (void)files;
        plan.per_lang[lang_code] = {config_.tokenizer_sample_count, 1.0};
        manifests[lang_code] = &current_single(lang_code);
    }
    const std::vector<std::string> sentences =
        sample_sentences(manifests, plan, config_.tokenizer_seed);
    tokenizer_ = TokenizerModel::train(sentences, config_.vocab_size, config_.byte_fallback);
    tokenizer_->save(dir_ / "tokenizer.model");
    c.extras["sentences_sampled"] = static_cast<double>(sentences.size());
    c.extras["vocab_size"] = static_cast<double>(tokenizer_->vocab_size());
}

void PipelineRun::stage_lm_train(StageCounters& c) {
    TinyLMConfig cfg = config_.scorer;
    cfg.vocab_size = tokenizer_->vocab_size();
    cfg.validate();

    const CorpusManifest& corpus = current_single(config_.tgt.code);
    std::vector<std::vector<TokenId>> encoded;
    encoded.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents) encoded.push_back(tokenizer_->encode(doc.text));
    const auto windows =
        make_training_windows(encoded, cfg.context_len, TokenizerModel::kEos);

    TinyLMParams<double> params = init_params<double>(cfg, config_.train.seed);
    const TrainResult result = train_lm(params, windows, config_.train);

    CheckpointMeta meta;
    meta.config = cfg;
    meta.seed = config_.train.seed;
    meta.step = result.steps;
    meta.tokens_seen = result.tokens_seen;
    save_checkpoint((dir_ / "scorer.ckpt").string(), params, meta);
    save_loss_curve(result.curve, (dir_ / "loss_curve.csv").string());
    scorer_ = std::move(params);

    c.extras["steps"] = static_cast<double>(result.steps);
    c.extras["tokens_seen"] = static_cast<double>(result.tokens_seen);
    c.extras["final_loss"] = result.curve.empty() ? 0.0 : result.curve.back().loss;
}

void PipelineRun::stage_translate(StageCounters& c) {
    const auto backend = make_backend(config_.backend);
    TranslateOptions opts;
    opts.max_tokens = config_.mt_max_tokens;
    if (config_.repair) {
        opts.repair_lm = &*scorer_;
        opts.repair_tokenizer = &*tokenizer_;
    }
    const CorpusManifest& source = current_single(config_.src.code);
    count_in(c, source);

    TranslateResult r =
        translate_corpus(source, *backend, config_.backend, *tokenizer_, config_.tgt, opts);
    synthetic_ = std::move(r.synthetic);
    have_synthetic_ = true;
    count_out(c, synthetic_);
    c.drops["translate_failed"] = r.stats.failed_docs;
    c.repairs = r.stats.repaired;
    c.retries = r.stats.retries;
    c.extras["sentences"] = static_cast<double>(r.stats.sentences);
    c.extras["chunks"] = static_cast<double>(r.stats.chunks);
    c.extras["batches"] = static_cast<double>(r.stats.batches);
    c.extras["truncated"] = static_cast<double>(r.stats.truncated);

    save_manifest(synthetic_, dir_ / "synthetic.jsonl");
    {
        std::ofstream out(dir_ / "translate_failures.jsonl",
                          std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write translate_failures.jsonl");
        for (const auto& f : r.failures) {
            json j;
            j["doc_id"] = f.doc_id;
            j["paragraph_index"] = f.paragraph_index;
            j["sentence_index"] = f.sentence_index;
            j["reason"] = f.reason;
            out << j.dump() << "\n";
        }
    }
    std::unordered_map<std::string, std::string> failed;  // doc id -> first reason
    for (const auto& f : r.failures) failed.emplace(f.doc_id, f.reason);
    std::vector<DroppedDocument> dropped;
    for (const auto& doc : source.documents) {
        const auto it = failed.find(doc.id);
        if (it != failed.end()) dropped.push_back({doc, "translate_failed", it->second});
    }
    save_dropped(dropped, config_.src, "translate", dir_ / "translate.dropped.jsonl");
}

void PipelineRun::stage_score(StageCounters& c) {
    ledger_ = score_corpus(synthetic_, *scorer_, *tokenizer_, config_.window,
                           config_.scorer_id);
    save_ledger(ledger_, dir_ / "score_ledger.jsonl");
    count_in(c, synthetic_);
    count_out(c, synthetic_);  // scoring annotates, never drops
    c.extras["scorable"] = static_cast<double>(ledger_.scorable_count());
    c.extras["unscorable"] = static_cast<double>(ledger_.unscorable_count());
}

void PipelineRun::stage_filter(StageCounters& c) {
    const uint64_t budget = token_budget(config_.budget);
    threshold_ = select_threshold(ledger_, budget, config_.unit);
    outcome_ = apply_filter(synthetic_, ledger_, threshold_, config_.passthrough_unscorable);
    count_in(c, synthetic_);
    count_out(c, outcome_.kept);
    for (const auto& d : outcome_.dropped) ++c.drops[d.drop_reason];
    c.extras["budget"] = static_cast<double>(budget);
    c.extras["threshold_ppl"] = threshold_.value;
    c.extras["kept_tokens"] = static_cast<double>(threshold_.kept_tokens);
    c.extras["shortfall"] = threshold_.shortfall ? 1.0 : 0.0;

    save_manifest(outcome_.kept, dir_ / "filtered.jsonl");
    save_dropped(outcome_.dropped, config_.tgt, "filter", dir_ / "filter.dropped.jsonl");
    save_threshold(threshold_, dir_ / "threshold.json");
}

void PipelineRun::stage_report(StageCounters& c) {
    const auto stats =
        position_stats(outcome_.kept, *scorer_, *tokenizer_, config_.position_bucket);
    save_position_stats(stats, dir_ / "position_stats.csv");
    const LengthReport lengths =
        length_report(outcome_.kept, outcome_.dropped, config_.length_bucket);
    save_length_report(lengths, dir_ / "length_report.csv");
    c.extras["position_buckets"] = static_cast<double>(stats.size());
    c.extras["kept_docs"] = static_cast<double>(lengths.kept.count);
    c.extras["dropped_docs"] = static_cast<double>(lengths.dropped.count);
}

void PipelineRun::stage_split(StageCounters& c) {
    const bool wants_clean_pool =
        std::any_of(config_.splits.kinds.begin(), config_.splits.kinds.end(),
                    [](const std::string& k) { return k == "clean" || k == "plus10"; });
    const CorpusManifest* clean_pool =
        wants_clean_pool ? &current_single(config_.tgt.code) : nullptr;
    const uint64_t clean_tokens = clean_pool ? clean_pool->total_word_tokens() : 0;
    const uint64_t syn_tokens = have_synthetic_ ? synthetic_.total_word_tokens() : 0;

    std::vector<SplitTarget> targets = plan_splits(config_, clean_tokens, syn_tokens);
    std::unordered_set<std::string> clean_ids;
    splits_.clear();
    for (const SplitTarget& target : targets) {
        CorpusManifest split;
        if (target.kind == "clean") {
            split = sample_to_budget(*clean_pool, target.token_target,
                                     split_seed(config_.seed, target.name), nullptr);
            for (const auto& doc : split.documents) clean_ids.insert(doc.id);
        } else if (target.kind == "plus10") {
            split = sample_to_budget(*clean_pool, target.token_target,
                                     split_seed(config_.seed, target.name), &clean_ids);
        } else if (target.kind == "syn-unfiltered") {
            split = sample_to_budget(synthetic_, target.token_target,
                                     split_seed(config_.seed, target.name), nullptr);
        } else {  // syn-filtered: the filter stage's admitted corpus verbatim
            split = outcome_.kept;
        }
        split.stage = "split";
        split.created_at = config_.created_at;
        const std::string file = target.name + ".jsonl";
        save_manifest(split, dir_ / file);

        SplitResult result;
        result.target = target;
        result.actual_tokens = split.total_word_tokens();
        result.docs = split.documents.size();
        result.file = file;
        splits_.push_back(std::move(result));
        c.extras[target.name + "_tokens"] =
            static_cast<double>(splits_.back().actual_tokens);
    }
    json j = json::array();
    for (const auto& s : splits_) j.push_back(split_to_json(s));
    std::ofstream out(dir_ / "splits.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write splits.json");
    out << j.dump(2) << "\n";
}

void PipelineRun::load_parts(const std::string& stage) {
    for (const auto& [lang_code, files] : config_.inputs) {
        std::vector<CorpusManifest> list;
        for (size_t i = 0; i < files.size(); ++i) {
            list.push_back(load_manifest(part_path(stage, lang_code, i)));
        }
        parts_[lang_code] = std::move(list);
    }
}

void PipelineRun::run_stage(const std::string& name, StageCounters& c) {
    if (name == "clean") stage_clean(c);
    else if (name == "lid") stage_lid(c);
    else if (name == "toxicity") stage_toxicity(c);
    else if (name == "dedup") stage_dedup(c);
    else if (name == "merge") stage_merge(c);
    else if (name == "tokenize") stage_tokenize(c);
    else if (name == "lm_train") stage_lm_train(c);
    else if (name == "translate") stage_translate(c);
    else if (name == "score") stage_score(c);
    else if (name == "filter") stage_filter(c);
    else if (name == "report") stage_report(c);
    else if (name == "split") stage_split(c);
    else throw Error("unknown stage '" + name + "'");
}

void PipelineRun::load_stage(const std::string& name) {
    if (name == "clean" || name == "lid" || name == "toxicity" || name == "dedup") {
        load_parts(name);
    } else if (name == "merge") {
        for (const auto& [lang_code, files] : config_.inputs) {
            (void)files;
            merged_[lang_code] = load_manifest(dir_ / ("merge." + lang_code + ".jsonl"));
        }
    } else if (name == "tokenize") {
        tokenizer_ = TokenizerModel::load(dir_ / "tokenizer.model");
    } else if (name == "lm_train") {
        TinyLMParams<double> params;
        load_checkpoint((dir_ / "scorer.ckpt").string(), params);
        scorer_ = std::move(params);
    } else if (name == "translate") {
        synthetic_ = load_manifest(dir_ / "synthetic.jsonl");
        have_synthetic_ = true;
    } else if (name == "score") {
        ledger_ = load_ledger(dir_ / "score_ledger.jsonl");
        if (config_.unit == BudgetUnit::bpe_tokens) {
            // Subword counts are not persisted; re-derive them the way the
            // scorer did so a resumed run selects the same threshold.
            for (auto& doc : synthetic_.documents) {
                doc.bpe_tokens = tokenizer_->encode(doc.text).size();
            }
        }
        attach_token_counts(ledger_, synthetic_);
    } else if (name == "filter") {
        threshold_ = load_threshold(dir_ / "threshold.json");
        outcome_.kept = load_manifest(dir_ / "filtered.jsonl");
        outcome_.dropped = load_dropped(dir_ / "filter.dropped.jsonl");
    } else if (name == "report" || name == "split") {
        // Nothing downstream consumes these in memory.
    } else {
        throw Error("unknown stage '" + name + "'");
    }
}

RunReport PipelineRun::execute() {
    const auto t0 = Clock::now();
    RunReport report;
    report.config_hash = config_.hash();

    if (options_.dry_run) {
        if (std::find(config_.stages.begin(), config_.stages.end(), "split") !=
            config_.stages.end()) {
            for (const SplitTarget& t : plan_splits(config_)) {
                SplitResult r;
                r.target = t;
                report.splits.push_back(std::move(r));
            }
        }
        report.wall_seconds = seconds_since(t0);
        return report;
    }

    fs::create_directories(dir_);
    RunState state;
    state.config_hash = report.config_hash;
    std::map<std::string, StageCounters> prior;
    if (const auto loaded = load_state(dir_ / "state.json");
        loaded && loaded->config_hash == report.config_hash) {
        state = *loaded;
        for (const auto& c : state.completed) prior[c.stage] = c;
        report.resumed = !state.completed.empty();
    }

    for (const std::string& stage : config_.stages) {
        const auto done = prior.find(stage);
        if (done != prior.end()) {
            try {
                load_stage(stage);
            } catch (const std::exception& e) {
                report.failed_stage = stage;
                report.error = std::string("resume: ") + e.what();
                report.wall_seconds = seconds_since(t0);
                save_report(report, dir_ / "report.json");
                return report;
            }
            report.stages.push_back(done->second);
            report.stages_skipped.push_back(stage);
            if (stage == "split") report.splits = state.splits;
            continue;
        }

        StageCounters counters;
        counters.stage = stage;
        const auto s0 = Clock::now();
        try {
            run_stage(stage, counters);
            std::erase_if(counters.drops, [](const auto& kv) { return kv.second == 0; });
            counters.wall_seconds = seconds_since(s0);
            if (!counters.conserved()) {
                throw Error("conservation violated: " + std::to_string(counters.docs_in) +
                            " in != " + std::to_string(counters.docs_out) + " out + " +
                            std::to_string(counters.dropped_total()) + " dropped");
            }
        } catch (const std::exception& e) {
            report.failed_stage = stage;
            report.error = e.what();
            report.wall_seconds = seconds_since(t0);
            save_report(report, dir_ / "report.json");
            return report;
        }

        report.stages.push_back(counters);
        report.stages_run.push_back(stage);
        state.completed.push_back(counters);
        if (stage == "split") {
            state.splits = splits_;
            report.splits = splits_;
        }
        save_state(state, dir_ / "state.json");

        if (options_.halt_after && *options_.halt_after == stage) {
            report.halted = true;
            break;
        }
    }

    report.wall_seconds = seconds_since(t0);
    save_report(report, dir_ / "report.json");
    return report;
}

}  // namespace

std::vector<SplitTarget> plan_splits(const PipelineConfig& config) {
    const uint64_t budget = token_budget(config.budget);
    const auto wants = [&](const std::string& kind) {
        return std::find(config.splits.kinds.begin(), config.splits.kinds.end(), kind) !=
               config.splits.kinds.end();
    };
    const std::string syn_stem = "syn-" + config.tgt.code + "_" + config.src.code;
    std::vector<SplitTarget> out;
    if (wants("clean")) {
        out.push_back({config.tgt.code + "-clean", "clean", budget, 0, true, 0});
    }
    if (wants("syn-unfiltered")) {
        out.push_back({syn_stem + "-unfiltered", "syn-unfiltered", budget, 0, true, 0});
    }
    if (wants("syn-filtered")) {
        out.push_back({syn_stem + "-filtered", "syn-filtered", budget, 0, true, 0});
    }
    if (wants("plus10")) {
        const auto extension = static_cast<uint64_t>(
            std::llround(config.splits.plus10_fraction * static_cast<double>(budget)));
        out.push_back({config.tgt.code + "-clean-plus10", "plus10", extension, 0, true, 0});
    }
    return out;
}

std::vector<SplitTarget> plan_splits(const PipelineConfig& config,
                                     uint64_t clean_pool_tokens,
                                     uint64_t synthetic_pool_tokens) {
    std::vector<SplitTarget> out = plan_splits(config);
    const uint64_t budget = token_budget(config.budget);
    for (SplitTarget& t : out) {
        if (t.kind == "clean") {
            t.pool_tokens = clean_pool_tokens;
        } else if (t.kind == "plus10") {
            // Only what the base clean split leaves behind is drawable.
            t.pool_tokens =
                clean_pool_tokens > budget ? clean_pool_tokens - budget : 0;
        } else {
            t.pool_tokens = synthetic_pool_tokens;
        }
        t.feasible = t.pool_tokens >= t.token_target;
        t.shortfall = t.feasible ? 0 : t.token_target - t.pool_tokens;
    }
    return out;
}

void save_report(const RunReport& report, const std::filesystem::path& path) {
    json j;
    j["config_hash"] = report.config_hash;
    j["ok"] = report.ok();
    j["resumed"] = report.resumed;
    j["halted"] = report.halted;
    if (report.failed_stage) {
        j["failed_stage"] = *report.failed_stage;
        j["error"] = report.error;
    }
    j["wall_seconds"] = report.wall_seconds;
    j["stages_run"] = report.stages_run;
    j["stages_skipped"] = report.stages_skipped;
    j["stages"] = json::array();
    for (const auto& c : report.stages) j["stages"].push_back(counters_to_json(c));
    j["splits"] = json::array();
    for (const auto& s : report.splits) j["splits"].push_back(split_to_json(s));

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write report " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw Error("write failed for " + path.string());
}

RunReport run_pipeline(const PipelineConfig& config, const RunOptions& options) {
    if (options.halt_after) {
        if (std::find(config.stages.begin(), config.stages.end(), *options.halt_after) ==
            config.stages.end()) {
            throw ConfigError("halt_after names unknown stage '" + *options.halt_after +
                              "'");
        }
    }
    PipelineRun run(config, options);
    return run.execute();
}

}  // namespace monoforge
