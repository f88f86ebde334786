#pragma once

#include <fstream>
#include <functional>

#include "monoforge/lm/adamw.hpp"
#include "monoforge/lm/backward.hpp"

namespace monoforge {

// Chops an EOS-joined stream of token documents into training windows of
// at most context_len + 1 tokens (inputs are window[:-1], targets
// window[1:]). Windows do not overlap; a trailing window is kept when it
// still holds a prediction (>= 2 tokens).
inline std::vector<std::vector<TokenId>> make_training_windows(
    const std::vector<std::vector<TokenId>>& docs, size_t context_len, TokenId eos_id) {
    if (context_len < 1) throw Error("make_training_windows: context_len must be >= 1");
    std::vector<TokenId> stream;
    for (const auto& doc : docs) {
        stream.insert(stream.end(), doc.begin(), doc.end());
        stream.push_back(eos_id);
    }
    std::vector<std::vector<TokenId>> windows;
    const size_t width = context_len + 1;
    for (size_t off = 0; off < stream.size(); off += width) {
        const size_t len = std::min(width, stream.size() - off);
        if (len < 2) break;
        windows.emplace_back(stream.begin() + off, stream.begin() + off + len);
    }
    return windows;
}

struct LossPoint {
    size_t step = 0;
    uint64_t tokens_seen = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    size_t steps = 0;
    uint64_t tokens_seen = 0;
    std::vector<LossPoint> curve;
    std::string stop_reason;  // "epochs" | "token_budget" | "max_steps"
};

inline void save_loss_curve(const std::vector<LossPoint>& curve,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_loss_curve: cannot open " + path);
    out << "step,tokens_seen,loss,lr\n";
    char buf[64];
    for (const LossPoint& p : curve) {
        out << p.step << ',' << p.tokens_seen << ',';
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", p.loss, p.lr);
        out << buf;
    }
    if (!out) throw Error("save_loss_curve: write failed for " + path);
}

// Trains in place over the given windows. One optimizer step spans
// accumulate_grad_batches micro-batches of batch_size sequences; the step
// loss is the mean of the micro-batch mean losses and the gradient is the
// matching mean, so accumulation only widens the batch. Window order is
// reshuffled each epoch from the config seed. Stops at the first of:
// epochs exhausted, token_budget reached, max_steps reached.
template <typename S>
TrainResult train_lm(TinyLMParams<S>& params,
                     const std::vector<std::vector<TokenId>>& windows,
                     const TrainConfig& tc,
                     const std::function<void(const LossPoint&)>& on_step = {}) {
    tc.validate();
    if (windows.empty()) throw Error("train_lm: no training windows");
    for (const auto& w : windows) {
        if (w.size() < 2) throw Error("train_lm: window shorter than 2 tokens");
        if (w.size() > params.config.context_len + 1) {
            throw Error("train_lm: window exceeds context_len + 1");
        }
    }

    const size_t micro = std::max<size_t>(1, tc.batch_size);
    const size_t micro_per_epoch = (windows.size() + micro - 1) / micro;
    const size_t steps_per_epoch =
        (micro_per_epoch + tc.accumulate_grad_batches - 1) / tc.accumulate_grad_batches;
    size_t horizon = steps_per_epoch * tc.epochs;
    if (tc.max_steps > 0) horizon = std::min(horizon, tc.max_steps);

    AdamW<S> opt(params.config, tc);
    Rng rng(tc.seed);
    TrainResult result;
    std::vector<size_t> order(windows.size());

    for (size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        size_t cursor = 0;
        while (cursor < order.size()) {
            TinyLMParams<S> grads = zero_params<S>(params.config);
            double step_loss = 0.0;
            size_t micros_done = 0;
            uint64_t step_tokens = 0;

            for (size_t a = 0; a < tc.accumulate_grad_batches && cursor < order.size();
                 ++a) {
                const size_t batch_end = std::min(cursor + micro, order.size());
                const size_t batch_n = batch_end - cursor;
                double batch_loss = 0.0;
                for (size_t b = cursor; b < batch_end; ++b) {
                    const std::vector<TokenId>& w = windows[order[b]];
                    std::span<const TokenId> inputs(w.data(), w.size() - 1);
                    std::span<const TokenId> targets(w.data() + 1, w.size() - 1);
                    ForwardCache<S> cache;
                    forward(params, inputs, &cache, RunMode::train, &rng);
                    batch_loss += loss_and_backward(params, cache, targets, grads,
                                                    1.0 / static_cast<double>(batch_n));
                    step_tokens += targets.size();
                }
                step_loss += batch_loss / static_cast<double>(batch_n);
                ++micros_done;
                cursor = batch_end;
            }
            // The micro-batch gradients summed to micros_done means.
            const S avg = static_cast<S>(1.0 / static_cast<double>(micros_done));
            for_each_tensor(grads, [&](const std::string&, LmMat<S>& m) { m *= avg; });
            step_loss /= static_cast<double>(micros_done);
            if (!std::isfinite(step_loss)) {
                throw Error("train_lm: non-finite loss at step " +
                            std::to_string(result.steps + 1));
            }

            clip_gradients(grads, tc.gradient_clip_val);
            const double lr = lr_at(result.steps + 1, tc, horizon);
            opt.step(params, grads, lr);

            ++result.steps;
            result.tokens_seen += step_tokens;
            LossPoint point{result.steps, result.tokens_seen, step_loss, lr};
            result.curve.push_back(point);
            if (on_step) on_step(point);

            if (tc.max_steps > 0 && result.steps >= tc.max_steps) {
                result.stop_reason = "max_steps";
                return result;
            }
            if (tc.token_budget && result.tokens_seen >= *tc.token_budget) {
                result.stop_reason = "token_budget";
                return result;
            }
        }
    }
    result.stop_reason = "epochs";
    return result;
}

}  // namespace monoforge
