// monoforge command-line interface.
//
// Either drive a whole configured pipeline (`monoforge run config.toml`) or
// invoke a single stage against explicit files (`monoforge clean ...`,
// `monoforge filter score ...`). Exit codes: 0 success, 2 configuration
// error, 3 stage failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "monoforge/bpe/sampling.hpp"
#include "monoforge/bpe/tokenizer.hpp"
#include "monoforge/budget/budget.hpp"
#include "monoforge/clean/dedup.hpp"
#include "monoforge/clean/lid.hpp"
#include "monoforge/clean/normalize.hpp"
#include "monoforge/clean/toxicity.hpp"
#include "monoforge/corpus/manifest_io.hpp"
#include "monoforge/filter/reports.hpp"
#include "monoforge/filter/score_ledger.hpp"
#include "monoforge/filter/threshold.hpp"
#include "monoforge/lm/checkpoint.hpp"
#include "monoforge/lm/train.hpp"
#include "monoforge/pipeline/config.hpp"
#include "monoforge/pipeline/run.hpp"
#include "monoforge/translate/translate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace monoforge;
using nlohmann::json;

namespace {

constexpr const char* kEpoch = "1970-01-01T00:00:00Z";

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& line : lines) out << line << "\n";
}

// Reads raw {"url","text"} JSON lines and runs the ingest normalization over
// them, producing one manifest. Mirrors the pipeline's clean stage but flat.
struct CleanArgs {
    std::string lang;
    std::vector<std::string> inputs;
    std::string out;
    std::string dropped;
    bool no_url_dedup = false;
    std::string created_at = kEpoch;
};

void cmd_clean(const CleanArgs& a) {
    const LanguageTag lang = parse_language_tag(a.lang);
    CorpusManifest m;
    m.lang = lang;
    m.stage = "clean";
    m.created_at = a.created_at;
    std::vector<DroppedDocument> dropped;
    std::unordered_set<std::string> seen_urls;
    std::unordered_set<std::string> ids;
    for (const auto& file : a.inputs) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error("cannot open input file " + file);
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
                throw Error(file + ":" + std::to_string(line_no) + ": " + e.what());
            }
            Document doc = ingest_document(text, lang, url, {});
            if (doc.text.empty()) {
                dropped.push_back({std::move(doc), "clean_empty", "normalized to empty"});
                continue;
            }
            if (!a.no_url_dedup && !doc.url.empty()) {
                const std::string norm = normalize_url(doc.url);
                if (!seen_urls.insert(norm).second) {
                    dropped.push_back({std::move(doc), "url_dup", norm});
                    continue;
                }
            }
            if (!ids.insert(doc.id).second) {
                dropped.push_back({std::move(doc), "duplicate", "content id already present"});
                continue;
            }
            m.documents.push_back(std::move(doc));
        }
    }
    save_manifest(m, a.out);
    if (!a.dropped.empty()) save_dropped(dropped, lang, "clean", a.dropped);
    std::cout << "clean: kept " << m.documents.size() << " docs ("
              << m.total_word_tokens() << " word tokens), dropped " << dropped.size()
              << "\n";
}

std::map<std::string, std::vector<std::string>> parse_lang_paths(
    const std::vector<std::string>& pairs, const std::string& flag) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& pair : pairs) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == pair.size()) {
            throw ConfigError(flag + " expects LANG=PATH, got '" + pair + "'");
        }
        out[pair.substr(0, eq)].push_back(pair.substr(eq + 1));
    }
    return out;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

void print_report(const RunReport& r) {
    std::cout << "config " << r.config_hash << (r.resumed ? " (resumed)" : "") << "\n";
    std::unordered_set<std::string> skipped(r.stages_skipped.begin(),
                                            r.stages_skipped.end());
    for (const auto& c : r.stages) {
        std::cout << "  " << c.stage << ": " << c.docs_in << " -> " << c.docs_out
                  << " docs";
        if (!c.drops.empty()) {
            std::cout << " (";
            bool first = true;
            for (const auto& [reason, count] : c.drops) {
                if (!first) std::cout << ", ";
                std::cout << reason << "=" << count;
                first = false;
            }
            std::cout << ")";
        }
        if (c.repairs) std::cout << ", repairs=" << c.repairs;
        if (c.retries) std::cout << ", retries=" << c.retries;
        if (skipped.count(c.stage)) {
            std::cout << " [cached]";
        } else {
            std::ostringstream secs;
            secs.precision(2);
            secs << std::fixed << c.wall_seconds;
            std::cout << " [" << secs.str() << "s]";
        }
        std::cout << "\n";
    }
    for (const auto& s : r.splits) {
        std::cout << "  split " << s.target.name << ": " << s.actual_tokens << " / "
                  << s.target.token_target << " tokens, " << s.docs << " docs";
        if (!s.target.feasible) std::cout << " (pool short by " << s.target.shortfall << ")";
        std::cout << "\n";
    }
    if (r.halted) std::cout << "halted (checkpoint saved)\n";
}

void print_plan(const PipelineConfig& config, const RunReport& r) {
    std::cout << "config " << r.config_hash << " (dry run)\n  stages:";
    for (const auto& s : config.stages) std::cout << " " << s;
    std::cout << "\n";
    for (const auto& s : r.splits) {
        std::cout << "  split " << s.target.name << ": target " << s.target.token_target
                  << " tokens\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"monoforge: build and filter synthetic monolingual corpora"};
    app.require_subcommand(1);
    int rc = 0;

    // ---- run ------------------------------------------------------------
    struct RunArgs {
        std::string config;
        int64_t seed = -1;
        bool seed_set = false;
        bool resume = false;
        bool dry_run = false;
        std::string halt_after;
    };
    auto ra = std::make_shared<RunArgs>();
    auto* run = app.add_subcommand("run", "Run a configured pipeline end to end");
    run->add_option("config", ra->config, "Pipeline config file")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--seed", ra->seed, "Override pipeline.seed")
        ->check(CLI::NonNegativeNumber);
    run->add_flag("--resume", ra->resume,
                  "Require resumable state in the output directory");
    run->add_flag("--dry-run", ra->dry_run, "Validate and plan without writing");
    run->add_option("--halt-after", ra->halt_after,
                    "Stop cleanly after the named stage completes");
    run->callback([ra, &rc] {
        ConfigTable table = ConfigTable::parse_file(ra->config);
        if (ra->seed >= 0) table.set_int("pipeline.seed", ra->seed);
        const PipelineConfig config = parse_pipeline_config(table);
        if (ra->resume && !fs::exists(fs::path(config.output_dir) / "state.json")) {
            throw ConfigError("--resume: no state.json in " + config.output_dir.string());
        }
        RunOptions options;
        options.dry_run = ra->dry_run;
        if (!ra->halt_after.empty()) options.halt_after = ra->halt_after;
        const RunReport report = run_pipeline(config, options);
        if (ra->dry_run) {
            print_plan(config, report);
            return;
        }
        print_report(report);
        if (!report.ok()) {
            std::cerr << "stage '" << *report.failed_stage << "' failed: " << report.error
                      << "\n";
            rc = 3;
        }
    });

    // ---- clean ----------------------------------------------------------
    auto ca = std::make_shared<CleanArgs>();
    auto* clean = app.add_subcommand("clean", "Normalize raw {url,text} JSON lines");
    clean->add_option("--lang", ca->lang, "Language tag, e.g. hi or hi-Deva")->required();
    clean->add_option("--in", ca->inputs, "Raw JSONL input file (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    clean->add_option("--out", ca->out, "Output manifest")->required();
    clean->add_option("--dropped", ca->dropped, "Dropped-document sidecar");
    clean->add_flag("--no-url-dedup", ca->no_url_dedup, "Keep repeated URLs");
    clean->add_option("--created-at", ca->created_at, "Manifest timestamp");
    clean->callback([ca] { cmd_clean(*ca); });

    // ---- lid ------------------------------------------------------------
    auto* lid = app.add_subcommand("lid", "Character n-gram language id");
    lid->require_subcommand(1);
    struct LidTrainArgs {
        std::vector<std::string> samples;
        std::string out;
    };
    auto lta = std::make_shared<LidTrainArgs>();
    auto* lid_train = lid->add_subcommand("train", "Train a model from text samples");
    lid_train->add_option("--sample", lta->samples, "LANG=PATH text sample (repeatable)")
        ->required();
    lid_train->add_option("--out", lta->out, "Model output path")->required();
    lid_train->callback([lta] {
        std::map<std::string, std::vector<std::string>> samples;
        for (const auto& [lang, paths] : parse_lang_paths(lta->samples, "--sample")) {
            for (const auto& p : paths) samples[lang].push_back(slurp(p));
        }
        const LidModel model = LidModel::train(samples);
        model.save(lta->out);
        std::cout << "lid: trained on " << samples.size() << " languages -> " << lta->out
                  << "\n";
    });
    struct LidApplyArgs {
        std::string model, manifest, lang, out, dropped;
        double min_conf = 0.5;
    };
    auto laa = std::make_shared<LidApplyArgs>();
    auto* lid_apply = lid->add_subcommand("apply", "Keep documents matching a language");
    lid_apply->add_option("--model", laa->model, "Trained model")
        ->required()
        ->check(CLI::ExistingFile);
    lid_apply->add_option("--manifest", laa->manifest, "Input manifest")
        ->required()
        ->check(CLI::ExistingFile);
    lid_apply->add_option("--lang", laa->lang, "Expected language tag")->required();
    lid_apply->add_option("--min-conf", laa->min_conf, "Minimum posterior confidence");
    lid_apply->add_option("--out", laa->out, "Kept-documents manifest")->required();
    lid_apply->add_option("--dropped", laa->dropped, "Dropped-document sidecar");
    lid_apply->callback([laa] {
        const LidModel model = LidModel::load(laa->model);
        const CorpusManifest manifest = load_manifest(laa->manifest);
        const LanguageTag lang = parse_language_tag(laa->lang);
        LidFilterResult r = lid_filter(manifest, model, lang, laa->min_conf);
        save_manifest(r.kept, laa->out);
        if (!laa->dropped.empty()) save_dropped(r.dropped, lang, "lid", laa->dropped);
        std::cout << "lid: kept " << r.kept.documents.size() << ", dropped "
                  << r.dropped.size() << "\n";
    });

    // ---- toxicity ---------------------------------------------------------
    struct ToxArgs {
        std::string manifest, words, lang, out, dropped;
        double match_ratio = 0.0;
    };
    auto ta = std::make_shared<ToxArgs>();
    auto* tox = app.add_subcommand("toxicity", "Drop documents matching a word list");
    tox->add_option("--manifest", ta->manifest, "Input manifest")
        ->required()
        ->check(CLI::ExistingFile);
    tox->add_option("--words", ta->words, "Word list, one word per line")
        ->required()
        ->check(CLI::ExistingFile);
    tox->add_option("--lang", ta->lang, "Language tag of the list")->required();
    tox->add_option("--match-ratio", ta->match_ratio,
                    "Tolerated matched-token ratio before dropping");
    tox->add_option("--out", ta->out, "Kept-documents manifest")->required();
    tox->add_option("--dropped", ta->dropped, "Dropped-document sidecar");
    tox->callback([ta] {
        const LanguageTag lang = parse_language_tag(ta->lang);
        const ToxicWordList words = ToxicWordList::load(ta->words, lang);
        const CorpusManifest manifest = load_manifest(ta->manifest);
        ToxicityResult r = toxicity_filter(manifest, words, ta->match_ratio);
        save_manifest(r.kept, ta->out);
        if (!ta->dropped.empty()) save_dropped(r.dropped, lang, "toxicity", ta->dropped);
        std::cout << "toxicity: kept " << r.kept.documents.size() << ", dropped "
                  << r.dropped.size() << "\n";
    });

    // ---- dedup ------------------------------------------------------------
    struct DedupArgs {
        std::string manifest, out, dropped, ledger;
    };
    auto da = std::make_shared<DedupArgs>();
    auto* dedup = app.add_subcommand("dedup", "Remove repeated paragraphs");
    dedup->add_option("--manifest", da->manifest, "Input manifest")
        ->required()
        ->check(CLI::ExistingFile);
    dedup->add_option("--out", da->out, "Kept-documents manifest")->required();
    dedup->add_option("--dropped", da->dropped, "Dropped-document sidecar");
    dedup->add_option("--ledger", da->ledger,
                      "Persist hash state here; loaded first when present, so "
                      "dedup can carry across invocations");
    dedup->callback([da] {
        const CorpusManifest manifest = load_manifest(da->manifest);
        DedupLedger ledger;
        if (!da->ledger.empty() && fs::exists(da->ledger)) {
            ledger = DedupLedger::load(da->ledger);
        }
        DedupResult r = dedup_paragraphs(manifest, ledger);
        save_manifest(r.kept, da->out);
        if (!da->dropped.empty()) {
            save_dropped(r.dropped, manifest.lang, "dedup", da->dropped);
        }
        if (!da->ledger.empty()) ledger.save(da->ledger);
        std::cout << "dedup: kept " << r.kept.documents.size() << ", dropped "
                  << r.dropped.size() << ", paragraphs removed " << r.paragraphs_removed
                  << "\n";
    });

    // ---- merge ------------------------------------------------------------
    struct MergeArgs {
        std::vector<std::string> manifests;
        std::string out, dropped;
    };
    auto ma = std::make_shared<MergeArgs>();
    auto* merge = app.add_subcommand("merge", "Merge manifests and re-dedup");
    merge->add_option("--manifest", ma->manifests, "Input manifest (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    merge->add_option("--out", ma->out, "Merged manifest")->required();
    merge->add_option("--dropped", ma->dropped, "Dropped-document sidecar");
    merge->callback([ma] {
        std::vector<CorpusManifest> parts;
        for (const auto& p : ma->manifests) parts.push_back(load_manifest(p));
        DedupResult r = merge_corpora(parts);
        if (r.kept.created_at.empty() && !parts.empty()) {
            r.kept.created_at = parts.front().created_at;
        }
        save_manifest(r.kept, ma->out);
        if (!ma->dropped.empty()) {
            save_dropped(r.dropped, r.kept.lang, "merge", ma->dropped);
        }
        std::cout << "merge: kept " << r.kept.documents.size() << ", dropped "
                  << r.dropped.size() << "\n";
    });

    // ---- tokenizer ----------------------------------------------------------
    auto* tok = app.add_subcommand("tokenizer", "Shared subword vocabulary");
    tok->require_subcommand(1);
    struct TokTrainArgs {
        std::vector<std::string> manifests;
        int64_t samples = 1000000;
        int64_t vocab = 56000;
        int64_t seed = 42;
        bool no_byte_fallback = false;
        std::string out;
    };
    auto tta = std::make_shared<TokTrainArgs>();
    auto* tok_train = tok->add_subcommand("train", "Train from sampled sentences");
    tok_train
        ->add_option("--manifest", tta->manifests, "LANG=PATH manifest (repeatable)")
        ->required();
    tok_train->add_option("--samples", tta->samples, "Sentences sampled per language")
        ->check(CLI::PositiveNumber);
    tok_train->add_option("--vocab-size", tta->vocab, "Target vocabulary size")
        ->check(CLI::PositiveNumber);
    tok_train->add_option("--seed", tta->seed, "Sampling seed")
        ->check(CLI::NonNegativeNumber);
    tok_train->add_flag("--no-byte-fallback", tta->no_byte_fallback,
                        "Map unknown bytes to UNK instead of byte pieces");
    tok_train->add_option("--out", tta->out, "Model output path")->required();
    tok_train->callback([tta] {
        std::map<std::string, CorpusManifest> loaded;
        SamplingPlan plan;
        for (const auto& [lang, paths] :
             parse_lang_paths(tta->manifests, "--manifest")) {
            if (paths.size() != 1) {
                throw ConfigError("tokenizer train: one manifest per language");
            }
            loaded[lang] = load_manifest(paths.front());
            plan.per_lang[lang] = {static_cast<size_t>(tta->samples), 1.0};
        }
        std::map<std::string, const CorpusManifest*> manifests;
        for (const auto& [lang, m] : loaded) manifests[lang] = &m;
        const auto sentences =
            sample_sentences(manifests, plan, static_cast<uint64_t>(tta->seed));
        const TokenizerModel model =
            TokenizerModel::train(sentences, static_cast<size_t>(tta->vocab),
                                  !tta->no_byte_fallback);
        model.save(tta->out);
        std::cout << "tokenizer: vocab " << model.vocab_size() << " from "
                  << sentences.size() << " sentences -> " << tta->out << "\n";
    });
    struct TokCodecArgs {
        std::string model, text, file;
    };
    auto tea = std::make_shared<TokCodecArgs>();
    auto* tok_encode = tok->add_subcommand("encode", "Text to space-separated ids");
    tok_encode->add_option("--model", tea->model, "Trained model")
        ->required()
        ->check(CLI::ExistingFile);
    tok_encode->add_option("--text", tea->text, "Text argument (default: stdin)");
    tok_encode->add_option("--file", tea->file, "Read text from file")
        ->check(CLI::ExistingFile);
    tok_encode->callback([tea] {
        const TokenizerModel model = TokenizerModel::load(tea->model);
        std::string text = tea->text;
        if (!tea->file.empty()) {
            text = slurp(tea->file);
        } else if (text.empty()) {
            text.assign((std::istreambuf_iterator<char>(std::cin)), {});
        }
        bool first = true;
        for (const TokenId id : model.encode(text)) {
            if (!first) std::cout << " ";
            std::cout << id;
            first = false;
        }
        std::cout << "\n";
    });
    auto tda = std::make_shared<TokCodecArgs>();
    auto* tok_decode = tok->add_subcommand("decode", "Space-separated ids to text");
    tok_decode->add_option("--model", tda->model, "Trained model")
        ->required()
        ->check(CLI::ExistingFile);
    tok_decode->add_option("--ids", tda->text, "Token ids (default: stdin)");
    tok_decode->callback([tda] {
        const TokenizerModel model = TokenizerModel::load(tda->model);
        std::string ids_text = tda->text;
        if (ids_text.empty()) {
            ids_text.assign((std::istreambuf_iterator<char>(std::cin)), {});
        }
        std::vector<TokenId> ids;
        std::istringstream in(ids_text);
        long long id = 0;
        while (in >> id) ids.push_back(static_cast<TokenId>(id));
        std::cout << model.decode(ids) << "\n";
    });

    // ---- lm-train -----------------------------------------------------------
    struct LmTrainArgs {
        std::string manifest, tokenizer, preset = "custom", out, curve;
        int64_t n_embed = 0, blocks = 0, heads = 0, context = 0;
        double dropout = -1.0;
        TrainConfig tc;
        int64_t max_steps = 0, epochs = -1, warmup = -1, batch = -1, accum = -1,
                seed = -1;
        double lr = -1.0;
    };
    auto lma = std::make_shared<LmTrainArgs>();
    auto* lm_train = app.add_subcommand("lm-train", "Train the perplexity scorer");
    lm_train->add_option("--manifest", lma->manifest, "Training corpus manifest")
        ->required()
        ->check(CLI::ExistingFile);
    lm_train->add_option("--tokenizer", lma->tokenizer, "Trained tokenizer model")
        ->required()
        ->check(CLI::ExistingFile);
    lm_train->add_option("--preset", lma->preset,
                         "mini-1k, base-1k, mini-4k, or custom");
    lm_train->add_option("--n-embed", lma->n_embed, "Custom embedding width");
    lm_train->add_option("--blocks", lma->blocks, "Custom transformer depth");
    lm_train->add_option("--heads", lma->heads, "Custom attention heads");
    lm_train->add_option("--context", lma->context, "Custom context length");
    lm_train->add_option("--dropout", lma->dropout, "Dropout for all sites");
    lm_train->add_option("--lr", lma->lr, "Peak learning rate");
    lm_train->add_option("--epochs", lma->epochs, "Training epochs");
    lm_train->add_option("--warmup", lma->warmup, "Warmup steps");
    lm_train->add_option("--batch", lma->batch, "Batch size");
    lm_train->add_option("--accum", lma->accum, "Gradient accumulation batches");
    lm_train->add_option("--max-steps", lma->max_steps, "Stop after N steps (0 = off)");
    lm_train->add_option("--seed", lma->seed, "Init and shuffle seed");
    lm_train->add_option("--out", lma->out, "Checkpoint output path")->required();
    lm_train->add_option("--curve", lma->curve, "Loss curve CSV output");
    lm_train->callback([lma] {
        const TokenizerModel tokenizer = TokenizerModel::load(lma->tokenizer);
        TinyLMConfig cfg;
        if (lma->preset == "mini-1k") cfg = TinyLMConfig::mini_1k();
        else if (lma->preset == "base-1k") cfg = TinyLMConfig::base_1k();
        else if (lma->preset == "mini-4k") cfg = TinyLMConfig::mini_4k();
        else if (lma->preset == "custom") {
            if (lma->n_embed <= 0 || lma->blocks <= 0 || lma->heads <= 0 ||
                lma->context <= 0) {
                throw ConfigError(
                    "custom preset needs --n-embed, --blocks, --heads, --context");
            }
            cfg.n_embed = static_cast<size_t>(lma->n_embed);
            cfg.num_blocks = static_cast<size_t>(lma->blocks);
            cfg.num_heads = static_cast<size_t>(lma->heads);
            cfg.context_len = static_cast<size_t>(lma->context);
        } else {
            throw ConfigError("--preset must be mini-1k, base-1k, mini-4k, or custom");
        }
        if (lma->dropout >= 0.0) {
            cfg.attn_dropout = cfg.ffn_dropout = cfg.residual_dropout = lma->dropout;
        }
        cfg.vocab_size = tokenizer.vocab_size();
        cfg.validate();

        TrainConfig tc;
        if (lma->lr > 0.0) tc.lr = lma->lr;
        if (lma->epochs >= 0) tc.epochs = static_cast<size_t>(lma->epochs);
        if (lma->warmup >= 0) tc.warmup_steps = static_cast<size_t>(lma->warmup);
        if (lma->batch > 0) tc.batch_size = static_cast<size_t>(lma->batch);
        if (lma->accum > 0) tc.accumulate_grad_batches = static_cast<size_t>(lma->accum);
        if (lma->max_steps > 0) tc.max_steps = static_cast<size_t>(lma->max_steps);
        if (lma->seed >= 0) tc.seed = static_cast<uint64_t>(lma->seed);
        tc.validate();

        const CorpusManifest corpus = load_manifest(lma->manifest);
        std::vector<std::vector<TokenId>> encoded;
        encoded.reserve(corpus.documents.size());
        for (const auto& doc : corpus.documents) encoded.push_back(tokenizer.encode(doc.text));
        const auto windows =
            make_training_windows(encoded, cfg.context_len, TokenizerModel::kEos);

        TinyLMParams<double> params = init_params<double>(cfg, tc.seed);
        const TrainResult result = train_lm(params, windows, tc);
        CheckpointMeta meta;
        meta.config = cfg;
        meta.seed = tc.seed;
        meta.step = result.steps;
        meta.tokens_seen = result.tokens_seen;
        save_checkpoint(lma->out, params, meta);
        if (!lma->curve.empty()) save_loss_curve(result.curve, lma->curve);
        std::cout << "lm-train: " << result.steps << " steps, " << result.tokens_seen
                  << " tokens";
        if (!result.curve.empty()) std::cout << ", final loss " << result.curve.back().loss;
        std::cout << " -> " << lma->out << "\n";
    });

    // ---- translate ------------------------------------------------------------
    struct TranslateArgs {
        std::string manifest, backend, model_id, src, tgt, tokenizer, out, failures,
            dropped, repair_checkpoint;
        int64_t beam = 5, batch = 64, max_tokens = 256;
    };
    auto tra = std::make_shared<TranslateArgs>();
    auto* translate = app.add_subcommand("translate", "Round documents through MT");
    translate->add_option("--manifest", tra->manifest, "Source-language manifest")
        ->required()
        ->check(CLI::ExistingFile);
    translate
        ->add_option("--backend", tra->backend,
                     "\"identity\" or an http(s) endpoint URL")
        ->required();
    translate->add_option("--model-id", tra->model_id, "Backend model identifier");
    translate->add_option("--src", tra->src, "Source language tag")->required();
    translate->add_option("--tgt", tra->tgt, "Target language tag")->required();
    translate->add_option("--beam", tra->beam, "Beam width")->check(CLI::PositiveNumber);
    translate->add_option("--batch", tra->batch, "Sentences per request")
        ->check(CLI::PositiveNumber);
    translate->add_option("--tokenizer", tra->tokenizer, "Tokenizer for chunk limits")
        ->required()
        ->check(CLI::ExistingFile);
    translate->add_option("--max-tokens", tra->max_tokens, "Per-request token limit")
        ->check(CLI::PositiveNumber);
    translate->add_option("--repair-checkpoint", tra->repair_checkpoint,
                          "Scorer checkpoint; enables truncation repair")
        ->check(CLI::ExistingFile);
    translate->add_option("--out", tra->out, "Synthetic manifest output")->required();
    translate->add_option("--failures", tra->failures, "Failure ledger JSONL");
    translate->add_option("--dropped", tra->dropped, "Dropped-document sidecar");
    translate->callback([tra] {
        MtBackendDescriptor descriptor;
        descriptor.endpoint = tra->backend;
        descriptor.model_id = tra->model_id.empty() ? tra->backend : tra->model_id;
        descriptor.src = parse_language_tag(tra->src);
        descriptor.tgt = parse_language_tag(tra->tgt);
        descriptor.beam = static_cast<size_t>(tra->beam);
        descriptor.batch_size = static_cast<size_t>(tra->batch);
        descriptor.validate();

        const TokenizerModel tokenizer = TokenizerModel::load(tra->tokenizer);
        TinyLMParams<double> repair_lm;
        TranslateOptions options;
        options.max_tokens = static_cast<size_t>(tra->max_tokens);
        if (!tra->repair_checkpoint.empty()) {
            load_checkpoint(tra->repair_checkpoint, repair_lm);
            options.repair_lm = &repair_lm;
            options.repair_tokenizer = &tokenizer;
        }

        const CorpusManifest source = load_manifest(tra->manifest);
        const auto backend = make_backend(descriptor);
        TranslateResult r = translate_corpus(source, *backend, descriptor, tokenizer,
                                             descriptor.tgt, options);
        save_manifest(r.synthetic, tra->out);
        if (!tra->failures.empty()) {
            std::vector<std::string> lines;
            for (const auto& f : r.failures) {
                json j;
                j["doc_id"] = f.doc_id;
                j["paragraph_index"] = f.paragraph_index;
                j["sentence_index"] = f.sentence_index;
                j["reason"] = f.reason;
                lines.push_back(j.dump());
            }
            write_lines(tra->failures, lines);
        }
        if (!tra->dropped.empty()) {
            std::map<std::string, std::string> failed;
            for (const auto& f : r.failures) failed.emplace(f.doc_id, f.reason);
            std::vector<DroppedDocument> dropped;
            for (const auto& doc : source.documents) {
                const auto it = failed.find(doc.id);
                if (it != failed.end()) {
                    dropped.push_back({doc, "translate_failed", it->second});
                }
            }
            save_dropped(dropped, source.lang, "translate", tra->dropped);
        }
        std::cout << "translate: " << r.synthetic.documents.size() << " docs, "
                  << r.stats.sentences << " sentences, " << r.stats.batches
                  << " batches, retries " << r.stats.retries << ", truncated "
                  << r.stats.truncated << ", repaired " << r.stats.repaired
                  << ", failed docs " << r.stats.failed_docs << "\n";
    });

    // ---- filter ------------------------------------------------------------
    auto* filter = app.add_subcommand("filter", "Perplexity scoring and selection");
    filter->require_subcommand(1);
    struct ScoreArgs {
        std::string manifest, checkpoint, tokenizer, scorer_id = "scorer", out;
        int64_t start = 10, end = 1024;
    };
    auto sa = std::make_shared<ScoreArgs>();
    auto* fscore = filter->add_subcommand("score", "Write a perplexity ledger");
    fscore->add_option("--manifest", sa->manifest, "Synthetic manifest")
        ->required()
        ->check(CLI::ExistingFile);
    fscore->add_option("--checkpoint", sa->checkpoint, "Scorer checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    fscore->add_option("--tokenizer", sa->tokenizer, "Tokenizer model")
        ->required()
        ->check(CLI::ExistingFile);
    fscore->add_option("--window-start", sa->start, "First scored position (1-based)")
        ->check(CLI::PositiveNumber);
    fscore->add_option("--window-end", sa->end, "Last scored position")
        ->check(CLI::PositiveNumber);
    fscore->add_option("--scorer-id", sa->scorer_id, "Provenance id for the ledger");
    fscore->add_option("--out", sa->out, "Ledger output path")->required();
    fscore->callback([sa] {
        const TokenizerModel tokenizer = TokenizerModel::load(sa->tokenizer);
        TinyLMParams<double> params;
        load_checkpoint(sa->checkpoint, params);
        const CorpusManifest manifest = load_manifest(sa->manifest);
        ScoreWindow window{static_cast<size_t>(sa->start), static_cast<size_t>(sa->end)};
        const ScoreLedger ledger =
            score_corpus(manifest, params, tokenizer, window, sa->scorer_id);
        save_ledger(ledger, sa->out);
        std::cout << "score: " << ledger.scorable_count() << " scorable, "
                  << ledger.unscorable_count() << " unscorable -> " << sa->out << "\n";
    });
    struct ThresholdArgs {
        std::string ledger, manifest, unit = "word", out, tokenizer;
        uint64_t budget = 0;
    };
    auto tha = std::make_shared<ThresholdArgs>();
    auto* fthresh = filter->add_subcommand("threshold", "Pick the admission cutoff");
    fthresh->add_option("--ledger", tha->ledger, "Perplexity ledger")
        ->required()
        ->check(CLI::ExistingFile);
    fthresh->add_option("--manifest", tha->manifest,
                        "Manifest the ledger was scored from (token counts are "
                        "joined from it, not stored in the ledger)")
        ->required()
        ->check(CLI::ExistingFile);
    fthresh->add_option("--budget", tha->budget, "Token budget")
        ->required()
        ->check(CLI::PositiveNumber);
    fthresh->add_option("--unit", tha->unit, "word or bpe");
    fthresh->add_option("--tokenizer", tha->tokenizer,
                        "Tokenizer model; Required for --unit bpe to recount "
                        "subword tokens")
        ->check(CLI::ExistingFile);
    fthresh->add_option("--out", tha->out, "Threshold JSON output")->required();
    fthresh->callback([tha] {
        ScoreLedger ledger = load_ledger(tha->ledger);
        CorpusManifest manifest = load_manifest(tha->manifest);
        BudgetUnit unit = BudgetUnit::word_tokens;
        if (tha->unit == "bpe") {
            if (tha->tokenizer.empty()) {
                throw ConfigError("--unit bpe needs --tokenizer to recount tokens");
            }
            const TokenizerModel tokenizer = TokenizerModel::load(tha->tokenizer);
            for (auto& doc : manifest.documents) {
                doc.bpe_tokens = tokenizer.encode(doc.text).size();
            }
            unit = BudgetUnit::bpe_tokens;
        } else if (tha->unit != "word") {
            throw ConfigError("--unit must be word or bpe");
        }
        attach_token_counts(ledger, manifest);
        const FilterThreshold threshold = select_threshold(ledger, tha->budget, unit);
        save_threshold(threshold, tha->out);
        std::cout << "threshold: ppl " << threshold.value << ", kept "
                  << threshold.kept_docs << " docs / " << threshold.kept_tokens
                  << " tokens" << (threshold.shortfall ? " (budget shortfall)" : "")
                  << "\n";
    });
    struct ApplyArgs {
        std::string manifest, ledger, threshold, out, dropped;
        bool passthrough = false;
    };
    auto aa = std::make_shared<ApplyArgs>();
    auto* fapply = filter->add_subcommand("apply", "Partition a manifest by threshold");
    fapply->add_option("--manifest", aa->manifest, "Synthetic manifest")
        ->required()
        ->check(CLI::ExistingFile);
    fapply->add_option("--ledger", aa->ledger, "Perplexity ledger")
        ->required()
        ->check(CLI::ExistingFile);
    fapply->add_option("--threshold", aa->threshold, "Threshold JSON")
        ->required()
        ->check(CLI::ExistingFile);
    fapply->add_flag("--passthrough-unscorable", aa->passthrough,
                     "Keep unscorable documents instead of dropping them");
    fapply->add_option("--out", aa->out, "Kept-documents manifest")->required();
    fapply->add_option("--dropped", aa->dropped, "Dropped-document sidecar");
    fapply->callback([aa] {
        const CorpusManifest manifest = load_manifest(aa->manifest);
        ScoreLedger ledger = load_ledger(aa->ledger);
        attach_token_counts(ledger, manifest);
        const FilterThreshold threshold = load_threshold(aa->threshold);
        FilterOutcome outcome = apply_filter(manifest, ledger, threshold, aa->passthrough);
        save_manifest(outcome.kept, aa->out);
        if (!aa->dropped.empty()) {
            save_dropped(outcome.dropped, manifest.lang, "filter", aa->dropped);
        }
        std::cout << "apply: kept " << outcome.kept.documents.size() << ", dropped "
                  << outcome.dropped.size() << "\n";
    });
    struct ReportArgs {
        std::string manifest, dropped, checkpoint, tokenizer, positions, lengths;
        int64_t position_bucket = 64, length_bucket = 64;
    };
    auto rga = std::make_shared<ReportArgs>();
    auto* freport = filter->add_subcommand("report", "Positional NLL and length CSVs");
    freport->add_option("--manifest", rga->manifest, "Kept-documents manifest")
        ->required()
        ->check(CLI::ExistingFile);
    freport->add_option("--dropped", rga->dropped, "Dropped-document sidecar")
        ->check(CLI::ExistingFile);
    freport->add_option("--checkpoint", rga->checkpoint, "Scorer checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    freport->add_option("--tokenizer", rga->tokenizer, "Tokenizer model")
        ->required()
        ->check(CLI::ExistingFile);
    freport->add_option("--position-bucket", rga->position_bucket,
                        "Positions per NLL bucket")
        ->check(CLI::PositiveNumber);
    freport->add_option("--length-bucket", rga->length_bucket,
                        "Word tokens per length bucket")
        ->check(CLI::PositiveNumber);
    freport->add_option("--positions", rga->positions, "Position stats CSV output");
    freport->add_option("--lengths", rga->lengths, "Length report CSV output");
    freport->callback([rga] {
        const TokenizerModel tokenizer = TokenizerModel::load(rga->tokenizer);
        TinyLMParams<double> params;
        load_checkpoint(rga->checkpoint, params);
        const CorpusManifest kept = load_manifest(rga->manifest);
        std::vector<DroppedDocument> dropped;
        if (!rga->dropped.empty()) dropped = load_dropped(rga->dropped);
        if (!rga->positions.empty()) {
            const auto stats = position_stats(kept, params, tokenizer,
                                              static_cast<size_t>(rga->position_bucket));
            save_position_stats(stats, rga->positions);
        }
        if (!rga->lengths.empty()) {
            const LengthReport report =
                length_report(kept, dropped, static_cast<size_t>(rga->length_bucket));
            save_length_report(report, rga->lengths);
        }
        std::cout << "report: " << kept.documents.size() << " kept, " << dropped.size()
                  << " dropped docs summarized\n";
    });

    // ---- budget ------------------------------------------------------------
    struct BudgetArgs {
        std::string preset, manifest;
        uint64_t params = 0;
        double ratio = 20.0;
        uint64_t hard_limit = 0;
    };
    auto ba = std::make_shared<BudgetArgs>();
    auto* budget = app.add_subcommand("budget", "Compute-optimal token budget");
    budget->add_option("--preset", ba->preset, "mini-1k, base-1k, or paper-base");
    budget->add_option("--params", ba->params, "Non-embedding parameter count");
    budget->add_option("--ratio", ba->ratio, "Tokens per parameter");
    budget->add_option("--hard-limit", ba->hard_limit, "Override the product outright");
    budget->add_option("--manifest", ba->manifest, "Check feasibility against a corpus")
        ->check(CLI::ExistingFile);
    budget->callback([ba] {
        BudgetSpec spec;
        if (!ba->preset.empty()) {
            spec = budget_preset(ba->preset);
        } else if (ba->params > 0) {
            spec.non_embedding_params = ba->params;
            spec.tokens_per_param = ba->ratio;
        } else {
            throw ConfigError("budget needs --preset or --params");
        }
        if (ba->hard_limit > 0) spec.hard_limit = ba->hard_limit;
        spec.validate();
        std::cout << "budget: " << token_budget(spec) << " tokens ("
                  << spec.non_embedding_params << " params x " << spec.tokens_per_param
                  << (spec.hard_limit ? ", hard limit " + std::to_string(*spec.hard_limit)
                                      : "")
                  << ")\n";
        if (!ba->manifest.empty()) {
            const CorpusManifest manifest = load_manifest(ba->manifest);
            const BudgetFeasibility f = budget_feasible(manifest, spec);
            std::cout << "corpus: " << f.corpus_tokens << " word tokens -> "
                      << (f.feasible ? "feasible" : "short by " +
                                                        std::to_string(f.shortfall))
                      << "\n";
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
