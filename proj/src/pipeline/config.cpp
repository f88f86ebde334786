#include "monoforge/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace monoforge {

namespace {

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
           c == '.';
}

std::string_view trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& origin, size_t line_no, const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + what);
}

// Parses a double-quoted string starting at s[pos] == '"'. Advances pos past
// the closing quote.
std::string parse_quoted(std::string_view s, size_t& pos, const std::string& origin,
                         size_t line_no) {
    std::string out;
    ++pos;  // opening quote
    while (pos < s.size()) {
        const char c = s[pos];
        if (c == '"') {
            ++pos;
            return out;
        }
        if (c == '\\') {
            ++pos;
            if (pos >= s.size()) fail(origin, line_no, "dangling escape in string");
            switch (s[pos]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(origin, line_no, std::string("unknown escape \\") + s[pos]);
            }
            ++pos;
            continue;
        }
        out += c;
        ++pos;
    }
    fail(origin, line_no, "unterminated string");
}

void expect_rest_blank(std::string_view s, size_t pos, const std::string& origin,
                       size_t line_no) {
    const std::string_view rest = trim(s.substr(pos));
    if (!rest.empty() && rest.front() != '#') {
        fail(origin, line_no, "trailing characters after value: '" + std::string(rest) + "'");
    }
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string render(const ConfigTable::Value& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return quote(*s);
    if (const auto* i = std::get_if<int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", *d);
        return buf;
    }
    if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    const auto& list = std::get<std::vector<std::string>>(v);
    std::string out = "[";
    for (size_t i = 0; i < list.size(); ++i) {
        if (i > 0) out += ", ";
        out += quote(list[i]);
    }
    out += ']';
    return out;
}

const char* type_name(const ConfigTable::Value& v) {
    if (std::holds_alternative<std::string>(v)) return "string";
    if (std::holds_alternative<int64_t>(v)) return "integer";
    if (std::holds_alternative<double>(v)) return "float";
    if (std::holds_alternative<bool>(v)) return "boolean";
    return "string list";
}

}  // namespace

ConfigTable ConfigTable::parse(std::string_view text, const std::string& origin) {
    ConfigTable table;
    table.origin_ = origin;
    std::string prefix;
    size_t line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        const size_t nl = text.find('\n', start);
        std::string_view line = text.substr(
            start, nl == std::string_view::npos ? text.size() - start : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const std::string_view stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;

        if (stripped.front() == '[') {
            if (stripped.back() != ']') fail(origin, line_no, "unterminated [section]");
            const std::string_view name = trim(stripped.substr(1, stripped.size() - 2));
            if (name.empty() || !std::all_of(name.begin(), name.end(), is_key_char)) {
                fail(origin, line_no, "bad section name '" + std::string(name) + "'");
            }
            prefix = std::string(name) + ".";
            continue;
        }

        const size_t eq = stripped.find('=');
        if (eq == std::string_view::npos) fail(origin, line_no, "expected key = value");
        const std::string_view key_part = trim(stripped.substr(0, eq));
        if (key_part.empty() || !std::all_of(key_part.begin(), key_part.end(), is_key_char)) {
            fail(origin, line_no, "bad key '" + std::string(key_part) + "'");
        }
        const std::string key = prefix + std::string(key_part);
        if (table.values_.contains(key)) fail(origin, line_no, "duplicate key '" + key + "'");

        const std::string_view raw = trim(stripped.substr(eq + 1));
        if (raw.empty()) fail(origin, line_no, "missing value for '" + key + "'");

        if (raw.front() == '"') {
            size_t pos = 0;
            std::string v = parse_quoted(raw, pos, origin, line_no);
            expect_rest_blank(raw, pos, origin, line_no);
            table.values_[key] = std::move(v);
        } else if (raw.front() == '[') {
            std::vector<std::string> list;
            size_t pos = 1;
            bool want_value = true;
            while (true) {
                while (pos < raw.size() &&
                       std::isspace(static_cast<unsigned char>(raw[pos]))) {
                    ++pos;
                }
                if (pos >= raw.size()) fail(origin, line_no, "unterminated array");
                if (raw[pos] == ']') {
                    ++pos;
                    break;
                }
                if (!want_value) {
                    if (raw[pos] != ',') fail(origin, line_no, "expected ',' in array");
                    ++pos;
                    want_value = true;
                    continue;
                }
                if (raw[pos] != '"') fail(origin, line_no, "arrays hold strings only");
                list.push_back(parse_quoted(raw, pos, origin, line_no));
                want_value = false;
            }
            expect_rest_blank(raw, pos, origin, line_no);
            table.values_[key] = std::move(list);
        } else {
            // Bare token: bool or number; strip a trailing comment first.
            std::string_view token = raw;
            const size_t hash = token.find('#');
            if (hash != std::string_view::npos) token = trim(token.substr(0, hash));
            const std::string t(token);
            if (t == "true" || t == "false") {
                table.values_[key] = (t == "true");
            } else if (t.find_first_of(".eE") != std::string::npos &&
                       t.find_first_not_of("+-0123456789.eE") == std::string::npos) {
                try {
                    size_t used = 0;
                    const double d = std::stod(t, &used);
                    if (used != t.size()) throw std::invalid_argument(t);
                    table.values_[key] = d;
                } catch (const std::exception&) {
                    fail(origin, line_no, "bad float '" + t + "'");
                }
            } else {
                try {
                    size_t used = 0;
                    const int64_t i = std::stoll(t, &used);
                    if (used != t.size()) throw std::invalid_argument(t);
                    table.values_[key] = i;
                } catch (const std::exception&) {
                    fail(origin, line_no, "bad value '" + t + "'");
                }
            }
        }
    }
    return table;
}

ConfigTable ConfigTable::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return parse(text, path.string());
}

const ConfigTable::Value& ConfigTable::require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return it->second;
}

std::string ConfigTable::get_string(const std::string& key) const {
    const Value& v = require(key);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError(origin_ + ": key '" + key + "' is a " + type_name(v) +
                      ", expected string");
}

std::string ConfigTable::get_string(const std::string& key,
                                    const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

int64_t ConfigTable::get_int(const std::string& key) const {
    const Value& v = require(key);
    if (const auto* i = std::get_if<int64_t>(&v)) return *i;
    throw ConfigError(origin_ + ": key '" + key + "' is a " + type_name(v) +
                      ", expected integer");
}

int64_t ConfigTable::get_int(const std::string& key, int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double ConfigTable::get_double(const std::string& key) const {
    const Value& v = require(key);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
    throw ConfigError(origin_ + ": key '" + key + "' is a " + type_name(v) +
                      ", expected number");
}

double ConfigTable::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool ConfigTable::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Value& v = require(key);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError(origin_ + ": key '" + key + "' is a " + type_name(v) +
                      ", expected boolean");
}

std::vector<std::string> ConfigTable::get_string_list(const std::string& key) const {
    const Value& v = require(key);
    if (const auto* l = std::get_if<std::vector<std::string>>(&v)) return *l;
    if (const auto* s = std::get_if<std::string>(&v)) return {*s};  // singleton sugar
    throw ConfigError(origin_ + ": key '" + key + "' is a " + type_name(v) +
                      ", expected string list");
}

std::vector<std::string> ConfigTable::get_string_list(
    const std::string& key, std::vector<std::string> fallback) const {
    return has(key) ? get_string_list(key) : fallback;
}

std::vector<std::string> ConfigTable::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

std::string ConfigTable::canonical() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key;
        out += " = ";
        out += render(value);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// PipelineConfig
// ---------------------------------------------------------------------------

const std::vector<std::string>& canonical_stages() {
    static const std::vector<std::string> kStages = {
        "clean",     "lid",   "toxicity", "dedup",  "merge",  "tokenize",
        "lm_train",  "translate", "score", "filter", "report", "split"};
    return kStages;
}

namespace {

size_t stage_index(const std::string& name) {
    const auto& all = canonical_stages();
    const auto it = std::find(all.begin(), all.end(), name);
    if (it == all.end()) throw ConfigError("unknown stage '" + name + "'");
    return static_cast<size_t>(it - all.begin());
}

LanguageTag parse_lang_or_config_error(const std::string& s, const std::string& where) {
    try {
        return parse_language_tag(s);
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

std::string PipelineConfig::hash() const { return content_id(canonical_text); }

PipelineConfig parse_pipeline_config(const ConfigTable& table) {
    PipelineConfig c;
    c.canonical_text = table.canonical();

    c.src = parse_lang_or_config_error(table.get_string("pipeline.src"), "pipeline.src");
    c.tgt = parse_lang_or_config_error(table.get_string("pipeline.tgt"), "pipeline.tgt");
    if (c.src.code == c.tgt.code) {
        throw ConfigError("pipeline.src and pipeline.tgt must differ");
    }
    c.output_dir = table.get_string("pipeline.output_dir");
    if (c.output_dir.empty()) throw ConfigError("pipeline.output_dir must not be empty");
    const int64_t seed = table.get_int("pipeline.seed", 42);
    if (seed < 0) throw ConfigError("pipeline.seed must be >= 0");
    c.seed = static_cast<uint64_t>(seed);
    c.created_at = table.get_string("pipeline.created_at", c.created_at);

    c.stages = table.get_string_list("pipeline.stages");
    if (c.stages.empty()) throw ConfigError("pipeline.stages must list at least one stage");
    size_t prev = 0;
    bool first = true;
    for (const auto& s : c.stages) {
        const size_t idx = stage_index(s);
        if (!first && idx <= prev) {
            throw ConfigError("stage '" + s + "' is out of order (canonical order: clean, "
                              "lid, toxicity, dedup, merge, tokenize, lm_train, translate, "
                              "score, filter, report, split)");
        }
        prev = idx;
        first = false;
    }
    const auto listed = [&](const std::string& s) {
        return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end();
    };

    // Inputs.
    for (const auto& key : table.keys_with_prefix("input.")) {
        const std::string lang = key.substr(std::string("input.").size());
        if (lang != c.src.code && lang != c.tgt.code) {
            throw ConfigError("input." + lang + " is neither pipeline.src nor pipeline.tgt");
        }
        for (const auto& p : table.get_string_list(key)) c.inputs[lang].emplace_back(p);
        if (c.inputs[lang].empty()) {
            throw ConfigError("input." + lang + " lists no files");
        }
    }
    c.url_dedup = table.get_bool("clean.url_dedup", true);

    // Dependency checks.
    const bool multi_file = std::any_of(c.inputs.begin(), c.inputs.end(),
                                        [](const auto& kv) { return kv.second.size() > 1; });
    const auto require_stage = [&](const std::string& stage, const std::string& dep) {
        if (listed(stage) && !listed(dep)) {
            throw ConfigError("stage '" + stage + "' requires stage '" + dep + "'");
        }
    };
    for (const std::string s : {"lid", "toxicity", "dedup", "merge", "tokenize"}) {
        require_stage(s, "clean");
    }
    require_stage("lm_train", "tokenize");
    require_stage("translate", "tokenize");
    require_stage("score", "translate");
    require_stage("score", "lm_train");
    require_stage("filter", "score");
    require_stage("report", "filter");
    if (multi_file) {
        for (const std::string s : {"tokenize", "lm_train", "translate"}) {
            if (listed(s) && !listed("merge")) {
                throw ConfigError("stage '" + s +
                                  "' needs stage 'merge' when a language has multiple "
                                  "input files");
            }
        }
    }
    if (listed("clean") && c.inputs.empty()) {
        throw ConfigError("stage 'clean' needs at least one input.<lang> file list");
    }
    if (listed("tokenize")) {
        for (const auto& code : {c.src.code, c.tgt.code}) {
            if (!c.inputs.contains(code)) {
                throw ConfigError("stage 'tokenize' needs input." + code);
            }
        }
    }
    if ((listed("lm_train") || listed("score")) && !c.inputs.contains(c.tgt.code)) {
        throw ConfigError("stage 'lm_train' needs input." + c.tgt.code);
    }
    if (listed("translate") && !c.inputs.contains(c.src.code)) {
        throw ConfigError("stage 'translate' needs input." + c.src.code);
    }

    // LID.
    if (listed("lid")) {
        for (const auto& key : table.keys_with_prefix("lid.samples.")) {
            const std::string lang = key.substr(std::string("lid.samples.").size());
            for (const auto& p : table.get_string_list(key)) {
                c.lid_samples[lang].emplace_back(p);
            }
        }
        for (const auto& [lang, files] : c.inputs) {
            (void)files;
            if (!c.lid_samples.contains(lang)) {
                throw ConfigError("stage 'lid' needs lid.samples." + lang);
            }
        }
        c.lid_min_conf = table.get_double("lid.min_conf", 0.5);
        if (c.lid_min_conf < 0.0 || c.lid_min_conf > 1.0) {
            throw ConfigError("lid.min_conf must be in [0, 1]");
        }
    }

    // Toxicity: per-language lists are optional (missing list = pass-through).
    if (listed("toxicity")) {
        for (const auto& key : table.keys_with_prefix("toxicity.list.")) {
            const std::string lang = key.substr(std::string("toxicity.list.").size());
            c.toxic_lists[lang] = table.get_string(key);
        }
        c.toxicity_match_ratio = table.get_double("toxicity.match_ratio", 0.0);
        if (c.toxicity_match_ratio < 0.0) {
            throw ConfigError("toxicity.match_ratio must be >= 0");
        }
    }

    // Tokenizer.
    if (listed("tokenize")) {
        const int64_t vocab = table.get_int("tokenize.vocab_size");
        if (vocab < 1) throw ConfigError("tokenize.vocab_size must be positive");
        c.vocab_size = static_cast<size_t>(vocab);
        c.byte_fallback = table.get_bool("tokenize.byte_fallback", true);
        const int64_t count = table.get_int("tokenize.sample_count");
        if (count < 1) throw ConfigError("tokenize.sample_count must be positive");
        c.tokenizer_sample_count = static_cast<size_t>(count);
        c.tokenizer_seed =
            static_cast<uint64_t>(table.get_int("tokenize.seed", static_cast<int64_t>(c.seed)));
    }

    // Scorer LM + training.
    if (listed("lm_train")) {
        c.lm_preset = table.get_string("lm.preset", "custom");
        if (c.lm_preset == "mini-1k") {
            c.scorer = TinyLMConfig::mini_1k();
        } else if (c.lm_preset == "base-1k") {
            c.scorer = TinyLMConfig::base_1k();
        } else if (c.lm_preset == "mini-4k") {
            c.scorer = TinyLMConfig::mini_4k();
        } else if (c.lm_preset == "custom") {
            c.scorer.n_embed = static_cast<size_t>(table.get_int("lm.n_embed"));
            c.scorer.num_blocks = static_cast<size_t>(table.get_int("lm.num_blocks"));
            c.scorer.num_heads = static_cast<size_t>(table.get_int("lm.num_heads"));
            c.scorer.context_len = static_cast<size_t>(table.get_int("lm.context_len"));
        } else {
            throw ConfigError("lm.preset must be one of mini-1k, base-1k, mini-4k, custom");
        }
        if (table.has("lm.dropout")) {
            const double d = table.get_double("lm.dropout");
            if (d < 0.0 || d >= 1.0) throw ConfigError("lm.dropout must be in [0, 1)");
            c.scorer.attn_dropout = d;
            c.scorer.ffn_dropout = d;
            c.scorer.residual_dropout = d;
        }
        if (c.scorer.n_embed == 0 || c.scorer.num_blocks == 0 || c.scorer.num_heads == 0 ||
            c.scorer.context_len == 0) {
            throw ConfigError("lm.* dimensions must be positive");
        }
        if (c.scorer.n_embed % c.scorer.num_heads != 0) {
            throw ConfigError("lm.n_embed must be divisible by lm.num_heads");
        }

        TrainConfig& tc = c.train;
        tc.lr = table.get_double("train.lr", tc.lr);
        tc.weight_decay = table.get_double("train.weight_decay", tc.weight_decay);
        tc.beta1 = table.get_double("train.beta1", tc.beta1);
        tc.beta2 = table.get_double("train.beta2", tc.beta2);
        tc.eps = table.get_double("train.eps", tc.eps);
        tc.warmup_steps = static_cast<size_t>(
            table.get_int("train.warmup_steps", static_cast<int64_t>(tc.warmup_steps)));
        tc.schedule = table.get_string("train.schedule", tc.schedule);
        tc.batch_size = static_cast<size_t>(
            table.get_int("train.batch_size", static_cast<int64_t>(tc.batch_size)));
        tc.accumulate_grad_batches = static_cast<size_t>(table.get_int(
            "train.accumulate", static_cast<int64_t>(tc.accumulate_grad_batches)));
        tc.gradient_clip_val = table.get_double("train.clip", tc.gradient_clip_val);
        tc.epochs =
            static_cast<size_t>(table.get_int("train.epochs", static_cast<int64_t>(tc.epochs)));
        tc.seed = static_cast<uint64_t>(table.get_int("train.seed", static_cast<int64_t>(c.seed)));
        tc.max_steps = static_cast<size_t>(table.get_int("train.max_steps", 0));
        const int64_t tb = table.get_int("train.token_budget", 0);
        if (tb > 0) tc.token_budget = static_cast<uint64_t>(tb);
        try {
            tc.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("train.*: ") + e.what());
        }
    }

    // Translate.
    if (listed("translate")) {
        c.backend.endpoint = table.get_string("translate.endpoint");
        c.backend.model_id = table.get_string("translate.model_id", c.backend.endpoint);
        c.backend.src = c.src;
        c.backend.tgt = c.tgt;
        c.backend.batch_size =
            static_cast<size_t>(table.get_int("translate.batch", 64));
        c.backend.beam = static_cast<size_t>(table.get_int("translate.beam", 5));
        try {
            c.backend.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("translate.*: ") + e.what());
        }
        const int64_t mt = table.get_int("translate.max_tokens", 256);
        if (mt < 1) throw ConfigError("translate.max_tokens must be positive");
        c.mt_max_tokens = static_cast<size_t>(mt);
        c.repair = table.get_bool("translate.repair", false);
        if (c.repair && !listed("lm_train")) {
            throw ConfigError("translate.repair needs stage 'lm_train' for the repair model");
        }
    }

    // Scoring window.
    if (listed("score")) {
        c.window.start = static_cast<size_t>(table.get_int("score.s", 10));
        c.window.end = static_cast<size_t>(table.get_int("score.e", 1024));
        if (c.window.start < 1 || c.window.end <= c.window.start) {
            throw ConfigError("score window needs s >= 1 and e > s");
        }
        if (c.scorer.context_len < c.window.end) {
            throw ConfigError("score.e exceeds the scorer context length " +
                              std::to_string(c.scorer.context_len));
        }
        c.scorer_id = table.get_string("score.scorer_id", "");
        if (c.scorer_id.empty()) {
            c.scorer_id = "tinylm-" + c.lm_preset + "-clean-" + c.tgt.code + "-seed" +
                          std::to_string(c.train.seed);
        }
    }

    // Budget (needed by filter and split).
    if (listed("filter") || listed("split")) {
        if (table.has("budget.preset")) {
            try {
                c.budget = budget_preset(table.get_string("budget.preset"));
            } catch (const Error& e) {
                throw ConfigError(std::string("budget.preset: ") + e.what());
            }
        }
        if (table.has("budget.params")) {
            c.budget.non_embedding_params =
                static_cast<uint64_t>(table.get_int("budget.params"));
        }
        if (table.has("budget.ratio")) {
            c.budget.tokens_per_param = table.get_double("budget.ratio");
        }
        if (table.has("budget.hard_limit")) {
            c.budget.hard_limit = static_cast<uint64_t>(table.get_int("budget.hard_limit"));
        }
        try {
            c.budget.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("budget.*: ") + e.what());
        }
    }
    if (listed("filter")) {
        const std::string unit = table.get_string("filter.unit", "word");
        if (unit == "word") {
            c.unit = BudgetUnit::word_tokens;
        } else if (unit == "bpe") {
            c.unit = BudgetUnit::bpe_tokens;
        } else {
            throw ConfigError("filter.unit must be 'word' or 'bpe'");
        }
        c.passthrough_unscorable = table.get_bool("filter.passthrough_unscorable", false);
    }

    // Reports.
    if (listed("report")) {
        c.position_bucket = static_cast<size_t>(table.get_int("report.position_bucket", 64));
        c.length_bucket = static_cast<size_t>(table.get_int("report.length_bucket", 64));
        if (c.position_bucket < 1 || c.length_bucket < 1) {
            throw ConfigError("report buckets must be positive");
        }
    }

    // Splits.
    if (listed("split")) {
        c.splits.kinds = table.get_string_list(
            "split.emit", {"clean", "syn-unfiltered", "syn-filtered", "plus10"});
        for (const auto& kind : c.splits.kinds) {
            if (kind != "clean" && kind != "syn-unfiltered" && kind != "syn-filtered" &&
                kind != "plus10") {
                throw ConfigError("split.emit entry '" + kind +
                                  "' is not one of clean, syn-unfiltered, syn-filtered, "
                                  "plus10");
            }
        }
        if (c.splits.kinds.empty()) throw ConfigError("split.emit must not be empty");
        c.splits.plus10_fraction = table.get_double("split.plus10_fraction", 0.10);
        if (c.splits.plus10_fraction <= 0.0 || c.splits.plus10_fraction > 1.0) {
            throw ConfigError("split.plus10_fraction must be in (0, 1]");
        }
        const auto needs = [&](const std::string& kind, const std::string& dep) {
            if (std::find(c.splits.kinds.begin(), c.splits.kinds.end(), kind) !=
                    c.splits.kinds.end() &&
                !listed(dep)) {
                throw ConfigError("split '" + kind + "' requires stage '" + dep + "'");
            }
        };
        needs("clean", "clean");
        needs("plus10", "clean");
        needs("syn-unfiltered", "translate");
        needs("syn-filtered", "filter");
        const auto emits = [&](const std::string& kind) {
            return std::find(c.splits.kinds.begin(), c.splits.kinds.end(), kind) !=
                   c.splits.kinds.end();
        };
        if (emits("plus10") && !emits("clean")) {
            // The extension is drawn disjoint from the emitted clean split.
            throw ConfigError("split 'plus10' requires the 'clean' split");
        }
        if ((std::find(c.splits.kinds.begin(), c.splits.kinds.end(), "clean") !=
                 c.splits.kinds.end() ||
             std::find(c.splits.kinds.begin(), c.splits.kinds.end(), "plus10") !=
                 c.splits.kinds.end()) &&
            !c.inputs.contains(c.tgt.code)) {
            throw ConfigError("clean/plus10 splits need input." + c.tgt.code);
        }
    }

    return c;
}

}  // namespace monoforge
