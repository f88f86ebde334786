#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "monoforge/budget/budget.hpp"
#include "monoforge/corpus/document.hpp"
#include "monoforge/filter/threshold.hpp"
#include "monoforge/lm/config.hpp"
#include "monoforge/lm/score.hpp"
#include "monoforge/translate/backend.hpp"

namespace monoforge {

// Configuration problems (bad file, bad key, bad stage list). The CLI maps
// these to exit code 2, stage failures to exit code 3.
struct ConfigError : Error {
    using Error::Error;
};

// Minimal TOML-style key/value file: [section] headers (dots allowed),
// `key = value` lines, `#` comments. Values: "string", integer, float,
// true/false, and ["string", ...] arrays. Keys flatten to dotted paths.
class ConfigTable {
public:
    using Value = std::variant<std::string, int64_t, double, bool,
                               std::vector<std::string>>;

    static ConfigTable parse(std::string_view text, const std::string& origin);
    static ConfigTable parse_file(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.contains(key); }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_string_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback) const;

    // Keys beginning with `prefix`, sorted. Used for per-language tables
    // such as lid.samples.<lang>.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    // Sorted `key = value` lines; the basis for the config hash.
    std::string canonical() const;

    void set_string(const std::string& key, std::string v) { values_[key] = std::move(v); }
    void set_int(const std::string& key, int64_t v) { values_[key] = v; }

private:
    const Value& require(const std::string& key) const;

    std::map<std::string, Value> values_;
    std::string origin_;
};

// The canonical stage order; configs list a subsequence.
const std::vector<std::string>& canonical_stages();

// Which named splits a run can emit.
struct SplitRequest {
    std::vector<std::string> kinds;  // of {clean, syn-unfiltered, syn-filtered, plus10}
    double plus10_fraction = 0.10;
};

struct PipelineConfig {
    LanguageTag src;
    LanguageTag tgt;
    std::filesystem::path output_dir;
    uint64_t seed = 42;
    std::string created_at = "1970-01-01T00:00:00Z";
    std::vector<std::string> stages;

    std::map<std::string, std::vector<std::filesystem::path>> inputs;  // lang -> raw files

    bool url_dedup = true;

    std::map<std::string, std::vector<std::filesystem::path>> lid_samples;
    double lid_min_conf = 0.5;

    std::map<std::string, std::filesystem::path> toxic_lists;
    double toxicity_match_ratio = 0.0;

    size_t vocab_size = 0;
    bool byte_fallback = true;
    size_t tokenizer_sample_count = 0;
    uint64_t tokenizer_seed = 42;

    std::string lm_preset = "custom";  // mini-1k | base-1k | mini-4k | custom
    TinyLMConfig scorer;               // vocab_size filled from the tokenizer
    TrainConfig train;

    MtBackendDescriptor backend;
    size_t mt_max_tokens = 256;
    bool repair = false;

    ScoreWindow window{10, 1024};
    std::string scorer_id;  // default derived from preset + seed

    BudgetSpec budget;
    BudgetUnit unit = BudgetUnit::word_tokens;
    bool passthrough_unscorable = false;

    size_t position_bucket = 64;
    size_t length_bucket = 64;

    SplitRequest splits;

    std::string canonical_text;  // serialized table, for hashing
    std::string hash() const;    // 32-hex content hash of canonical_text
};

// Builds and validates a PipelineConfig: stage names and order, stage
// dependencies, per-stage parameters checked against the module
// preconditions before any work starts. Throws ConfigError.
PipelineConfig parse_pipeline_config(const ConfigTable& table);

}  // namespace monoforge
