#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "monoforge/pipeline/config.hpp"

namespace monoforge {

// A stage blew up; carries which one. The partial run report survives in
// the output directory and in the returned RunReport.
struct StageError : Error {
    std::string stage;
    StageError(std::string stage_name, const std::string& what)
        : Error("stage '" + stage_name + "': " + what), stage(std::move(stage_name)) {}
};

struct StageCounters {
    std::string stage;
    uint64_t docs_in = 0;
    uint64_t docs_out = 0;
    uint64_t tokens_in = 0;
    uint64_t tokens_out = 0;
    std::map<std::string, uint64_t> drops;  // reason -> document count
    uint64_t repairs = 0;
    uint64_t retries = 0;
    double wall_seconds = 0.0;
    std::map<std::string, double> extras;  // stage-specific metrics

    uint64_t dropped_total() const {
        uint64_t n = 0;
        for (const auto& [reason, count] : drops) n += count;
        return n;
    }
    // Every document entering a stage lands in the output or in a drop.
    bool conserved() const { return docs_in == docs_out + dropped_total(); }
};

// A named split with its token target and (once pools are known) whether
// the pool can cover it.
struct SplitTarget {
    std::string name;  // file stem, e.g. "hi-clean" or "syn-hi_en-unfiltered"
    std::string kind;  // clean | syn-unfiltered | syn-filtered | plus10
    uint64_t token_target = 0;
    uint64_t pool_tokens = 0;
    bool feasible = true;
    uint64_t shortfall = 0;
};

// Token-count targets for the configured splits. The base budget B comes
// from the budget spec; the plus10 extension targets fraction*B and draws
// only from what the clean split leaves behind (disjoint by document id).
std::vector<SplitTarget> plan_splits(const PipelineConfig& config);
std::vector<SplitTarget> plan_splits(const PipelineConfig& config,
                                     uint64_t clean_pool_tokens,
                                     uint64_t synthetic_pool_tokens);

struct SplitResult {
    SplitTarget target;
    uint64_t actual_tokens = 0;
    uint64_t docs = 0;
    std::string file;  // manifest path, relative to the output dir
};

struct RunReport {
    std::string config_hash;
    bool resumed = false;
    bool halted = false;  // stopped early at RunOptions::halt_after
    std::vector<std::string> stages_run;
    std::vector<std::string> stages_skipped;  // completed earlier, loaded from disk
    std::vector<StageCounters> stages;        // all completed stages, pipeline order
    std::vector<SplitResult> splits;
    double wall_seconds = 0.0;
    std::optional<std::string> failed_stage;
    std::string error;

    bool ok() const { return !failed_stage.has_value(); }
};

void save_report(const RunReport& report, const std::filesystem::path& path);

struct RunOptions {
    bool dry_run = false;
    // Crash-simulation hook: stop cleanly after this stage completes,
    // leaving the resume state for a later invocation.
    std::optional<std::string> halt_after;
};

// Executes the configured stages in order, persisting every intermediate
// manifest (stage-tagged) in config.output_dir. A state file records the
// config hash and completed stages; rerunning with the same hash resumes
// after the last completed stage, a different hash starts fresh. On stage
// failure the report names the stage and keeps the completed counters.
RunReport run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace monoforge
