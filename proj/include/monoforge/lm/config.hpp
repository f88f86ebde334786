#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "monoforge/corpus/document.hpp"

namespace monoforge {

// Decoder-only transformer shape. num_blocks == 0 is a legal degenerate
// model (embedding -> final norm -> output projection), useful for analytic
// scorer fixtures.
struct TinyLMConfig {
    size_t vocab_size = 0;
    size_t n_embed = 0;
    size_t num_blocks = 0;
    size_t num_heads = 1;
    size_t context_len = 0;
    size_t ffn_scaling = 4;
    double attn_dropout = 0.1;
    double ffn_dropout = 0.1;
    double residual_dropout = 0.1;
    bool tie_output = false;  // output projection untied from the embedding

    size_t head_size() const { return n_embed / num_heads; }
    size_t rope_dim() const { return head_size() / 2; }  // rotation pairs
    size_t ffn_width() const { return ffn_scaling * n_embed; }

    void validate() const;

    // Production shapes. The two trainable sizes share width 768 and a
    // 1024-token context; the scorer variant stretches the context to 4096
    // for document-level perplexity.
    static TinyLMConfig mini_1k();  // 4 blocks, 16 heads  (~28M non-embedding)
    static TinyLMConfig base_1k();  // 12 blocks, 12 heads (~85M non-embedding)
    static TinyLMConfig mini_4k();  // mini shape, 4096-token scoring context
};

// Optimizer and schedule settings. Defaults are the production training
// recipe; tests override with toy sizes.
struct TrainConfig {
    double lr = 6e-4;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-5;
    size_t warmup_steps = 5000;
    std::string schedule = "cosine";  // "cosine" or "constant" after warmup
    size_t batch_size = 48;
    size_t accumulate_grad_batches = 8;
    double gradient_clip_val = 1.0;
    size_t epochs = 2;
    uint64_t seed = 42;
    size_t max_steps = 0;  // 0: bounded by epochs/budget only
    std::optional<uint64_t> token_budget;  // nullopt: unbounded; 0 is an error

    void validate() const;
};

// Linear warmup to the peak over warmup_steps (1-based; lr(warmup) == peak),
// then cosine decay to zero at total_steps (or flat when schedule is
// "constant" or total_steps <= warmup).
double lr_at(size_t step, const TrainConfig& tc, size_t total_steps);

// Parameter count excluding the embedding and output projection, the
// conventional size for compute-optimal budget rules.
uint64_t non_embedding_params(const TinyLMConfig& config);

}  // namespace monoforge
