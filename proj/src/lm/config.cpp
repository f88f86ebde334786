#include "monoforge/lm/config.hpp"

#include <cmath>

namespace monoforge {

void TinyLMConfig::validate() const {
    if (vocab_size == 0) throw Error("lm config: vocab_size must be positive");
    if (n_embed == 0) throw Error("lm config: n_embed must be positive");
    if (num_heads == 0) throw Error("lm config: num_heads must be positive");
    if (n_embed % num_heads != 0) {
        throw Error("lm config: n_embed " + std::to_string(n_embed) +
                    " not divisible by num_heads " + std::to_string(num_heads));
    }
    if (context_len < 2) throw Error("lm config: context_len must be >= 2");
    if (ffn_scaling == 0) throw Error("lm config: ffn_scaling must be positive");
    if (2 * rope_dim() > head_size()) {
        throw Error("lm config: rope pairs exceed head size");
    }
    for (double d : {attn_dropout, ffn_dropout, residual_dropout}) {
        if (d < 0.0 || d >= 1.0) throw Error("lm config: dropout must be in [0, 1)");
    }
}

TinyLMConfig TinyLMConfig::mini_1k() {
    TinyLMConfig c;
    c.vocab_size = 56000;
    c.n_embed = 768;
    c.num_blocks = 4;
    c.num_heads = 16;
    c.context_len = 1024;
    return c;
}

TinyLMConfig TinyLMConfig::base_1k() {
    TinyLMConfig c = mini_1k();
    c.num_blocks = 12;
    c.num_heads = 12;
    return c;
}

TinyLMConfig TinyLMConfig::mini_4k() {
    TinyLMConfig c = mini_1k();
    c.context_len = 4096;
    return c;
}

void TrainConfig::validate() const {
    if (!(lr > 0)) throw Error("train config: lr must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw Error("train config: betas must be in [0, 1)");
    }
    if (!(gradient_clip_val > 0)) throw Error("train config: clip must be > 0");
    if (!(eps > 0)) throw Error("train config: eps must be > 0");
    if (batch_size == 0) throw Error("train config: batch_size must be positive");
    if (accumulate_grad_batches == 0) {
        throw Error("train config: accumulate_grad_batches must be positive");
    }
    if (schedule != "cosine" && schedule != "constant") {
        throw Error("train config: unknown schedule '" + schedule + "'");
    }
    if (token_budget && *token_budget == 0) {
        throw Error("train config: token budget of zero");
    }
}

double lr_at(size_t step, const TrainConfig& tc, size_t total_steps) {
    if (step == 0) return 0.0;
    if (tc.warmup_steps > 0 && step <= tc.warmup_steps) {
        // Ratio first: lr(warmup_steps) is the peak exactly.
        return tc.lr * (static_cast<double>(step) / static_cast<double>(tc.warmup_steps));
    }
    if (tc.schedule == "constant" || total_steps <= tc.warmup_steps) return tc.lr;
    const double progress = static_cast<double>(step - tc.warmup_steps) /
                            static_cast<double>(total_steps - tc.warmup_steps);
    const double clamped = progress < 1.0 ? progress : 1.0;
    return tc.lr * 0.5 * (1.0 + std::cos(clamped * 3.14159265358979323846));
}

uint64_t non_embedding_params(const TinyLMConfig& config) {
    const uint64_t d = config.n_embed;
    const uint64_t f = config.ffn_width();
    const uint64_t per_block = 4 * (d * d + d)   // attention projections + biases
                               + d * f + f       // FFN in
                               + f * d + d       // FFN out
                               + 4 * d;          // two layer norms
    return config.num_blocks * per_block + 2 * d;  // + final norm
}

}  // namespace monoforge
