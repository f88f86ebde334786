#pragma once

#include <limits>
#include <span>

#include "monoforge/bpe/token_id.hpp"
#include "monoforge/lm/model.hpp"

namespace monoforge {

enum class RunMode { eval, train };

// Rotates row t of x (one head's vectors, T x head_size) by the
// position-dependent angles of position start_pos + t: pair j of the first
// rope_dim pairs turns by (pos) * base^(-j/rope_dim), base 10000; remaining
// coordinates pass through. inverse=true applies the opposite rotation
// (the transpose), which is the backward map.
template <typename Derived>
void rope_apply_inplace(Eigen::MatrixBase<Derived>& x, size_t rope_dim,
                        int64_t start_pos, bool inverse = false) {
    using S = typename Derived::Scalar;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        const double pos = static_cast<double>(start_pos + t);
        for (size_t j = 0; j < rope_dim; ++j) {
            const double theta =
                pos * std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(rope_dim));
            const S c = static_cast<S>(std::cos(theta));
            const S s = static_cast<S>(inverse ? -std::sin(theta) : std::sin(theta));
            const S a = x.derived()(t, 2 * j);
            const S b = x.derived()(t, 2 * j + 1);
            x.derived()(t, 2 * j) = c * a - s * b;
            x.derived()(t, 2 * j + 1) = s * a + c * b;
        }
    }
}

template <typename S>
LmMat<S> rope_apply(LmMat<S> x, size_t rope_dim, int64_t start_pos) {
    rope_apply_inplace(x, rope_dim, start_pos);
    return x;
}

template <typename S>
struct LnCache {
    LmMat<S> xhat;     // (x - mean) * inv_std, T x D
    LmMat<S> inv_std;  // T x 1
};

template <typename S>
LmMat<S> layer_norm(const LmMat<S>& x, const LmMat<S>& g, const LmMat<S>& b,
                    LnCache<S>* cache) {
    const Eigen::Index T = x.rows(), D = x.cols();
    LmMat<S> xhat(T, D);
    LmMat<S> inv_std(T, 1);
    for (Eigen::Index t = 0; t < T; ++t) {
        const S mean = x.row(t).mean();
        const S var = (x.row(t).array() - mean).square().sum() / static_cast<S>(D);
        const S inv = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
        inv_std(t, 0) = inv;
        xhat.row(t) = (x.row(t).array() - mean) * inv;
    }
    LmMat<S> out =
        xhat.cwiseProduct(g.replicate(T, 1)) + b.replicate(T, 1);
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

// Exact (erf-based) GELU.
template <typename S>
LmMat<S> gelu(const LmMat<S>& x) {
    return x.unaryExpr([](S v) {
        const double d = static_cast<double>(v);
        return static_cast<S>(0.5 * d * (1.0 + std::erf(d / 1.4142135623730951)));
    });
}

template <typename S>
LmMat<S> gelu_grad(const LmMat<S>& x) {
    return x.unaryExpr([](S v) {
        const double d = static_cast<double>(v);
        const double cdf = 0.5 * (1.0 + std::erf(d / 1.4142135623730951));
        const double pdf = std::exp(-0.5 * d * d) / 2.5066282746310002;  // sqrt(2*pi)
        return static_cast<S>(cdf + d * pdf);
    });
}

// Per-row matrix product, functionally x * w (+ bias broadcast over rows).
// Each output row is computed independently: row i of the result can never
// depend on how many rows follow it. A blocked GEMM would re-group the
// K-dimension accumulation by row panel and perturb last bits when the row
// count changes, breaking the exact-causality guarantee of forward().
template <typename S>
LmMat<S> rows_times(const LmMat<S>& x, const LmMat<S>& w) {
    LmMat<S> out(x.rows(), w.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        out.row(t).noalias() = x.row(t) * w;
    }
    return out;
}

template <typename S>
LmMat<S> rows_times(const LmMat<S>& x, const LmMat<S>& w, const LmMat<S>& bias) {
    LmMat<S> out(x.rows(), w.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        out.row(t).noalias() = x.row(t) * w;
        out.row(t) += bias.row(0);
    }
    return out;
}

// Inverted-dropout multiplier matrix: 0 with probability rate, else
// 1/(1-rate).
template <typename S>
LmMat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    LmMat<S> m(rows, cols);
    const S keep = static_cast<S>(1.0 / (1.0 - rate));
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = rng.next_unit() < rate ? S(0) : keep;
        }
    }
    return m;
}

template <typename S>
struct BlockCache {
    LmMat<S> x_in;
    LnCache<S> ln1;
    LmMat<S> ln1_out;
    LmMat<S> q, k, v;  // T x D; q and k are post-rotation
    std::vector<LmMat<S>> probs;      // per head, T x T, post-softmax
    std::vector<LmMat<S>> attn_mask;  // per head dropout multipliers (train only)
    LmMat<S> ctx;
    LmMat<S> attn_out;
    LmMat<S> resid1_mask;  // train only
    LmMat<S> x_mid;
    LnCache<S> ln2;
    LmMat<S> ln2_out;
    LmMat<S> fc_pre;
    LmMat<S> act;  // gelu output with ffn dropout applied
    LmMat<S> ffn_mask;     // train only
    LmMat<S> resid2_mask;  // train only
};

template <typename S>
struct ForwardCache {
    std::vector<TokenId> ids;
    int64_t pos_offset = 0;
    RunMode mode = RunMode::eval;
    std::vector<BlockCache<S>> blocks;
    LmMat<S> x_final;
    LnCache<S> lnf;
    LmMat<S> lnf_out;
};

// Runs the model over one sequence, returning logits (T x vocab). In train
// mode dropout draws come from rng and the multiplier masks are cached for
// the backward pass. pos_offset shifts every rotary position, which leaves
// eval outputs unchanged (relative positions only) .
//
// Causal attention is accumulated with explicit j <= i loops in a fixed
// order, so logits at position i are bit-identical no matter how many
// tokens follow — the causality contract is exact, not approximate.
template <typename S>
LmMat<S> forward(const TinyLMParams<S>& p, std::span<const TokenId> ids,
                 ForwardCache<S>* cache = nullptr, RunMode mode = RunMode::eval,
                 Rng* rng = nullptr, int64_t pos_offset = 0) {
    const TinyLMConfig& cfg = p.config;
    const Eigen::Index T = static_cast<Eigen::Index>(ids.size());
    const Eigen::Index D = static_cast<Eigen::Index>(cfg.n_embed);
    const Eigen::Index H = static_cast<Eigen::Index>(cfg.num_heads);
    const Eigen::Index hs = static_cast<Eigen::Index>(cfg.head_size());

    if (T == 0) throw Error("forward: empty token sequence");
    if (static_cast<size_t>(T) > cfg.context_len) {
        throw Error("forward: sequence length " + std::to_string(T) +
                    " exceeds context_len " + std::to_string(cfg.context_len));
    }
    for (TokenId id : ids) {
        if (id < 0 || static_cast<size_t>(id) >= cfg.vocab_size) {
            throw Error("forward: token id " + std::to_string(id) + " out of range");
        }
    }
    const bool train = mode == RunMode::train;
    if (train && rng == nullptr) throw Error("forward: train mode requires an RNG");

    if (cache) {
        cache->ids.assign(ids.begin(), ids.end());
        cache->pos_offset = pos_offset;
        cache->mode = mode;
        cache->blocks.clear();
        cache->blocks.resize(cfg.num_blocks);
    }

    LmMat<S> x(T, D);
    for (Eigen::Index t = 0; t < T; ++t) x.row(t) = p.embedding.row(ids[t]);

    const S inv_sqrt_hs = S(1) / std::sqrt(static_cast<S>(hs));

    for (size_t bi = 0; bi < cfg.num_blocks; ++bi) {
        const BlockParams<S>& blk = p.blocks[bi];
        BlockCache<S>* bc = cache ? &cache->blocks[bi] : nullptr;
        if (bc) bc->x_in = x;

        LnCache<S> ln1_local;
        LmMat<S> ln1_out = layer_norm(x, blk.ln1_g, blk.ln1_b, bc ? &bc->ln1 : &ln1_local);

        LmMat<S> q = rows_times(ln1_out, blk.wq, blk.bq);
        LmMat<S> k = rows_times(ln1_out, blk.wk, blk.bk);
        LmMat<S> v = rows_times(ln1_out, blk.wv, blk.bv);
        for (Eigen::Index h = 0; h < H; ++h) {
            auto qh = q.block(0, h * hs, T, hs);
            auto kh = k.block(0, h * hs, T, hs);
            rope_apply_inplace(qh, cfg.rope_dim(), pos_offset);
            rope_apply_inplace(kh, cfg.rope_dim(), pos_offset);
        }

        LmMat<S> ctx = LmMat<S>::Zero(T, D);
        std::vector<LmMat<S>> probs_store;
        std::vector<LmMat<S>> attn_masks;
        if (bc) probs_store.resize(H);
        if (bc && train) attn_masks.resize(H);

        for (Eigen::Index h = 0; h < H; ++h) {
            auto qh = q.block(0, h * hs, T, hs);
            auto kh = k.block(0, h * hs, T, hs);
            auto vh = v.block(0, h * hs, T, hs);

            LmMat<S> probs = LmMat<S>::Zero(T, T);
            for (Eigen::Index i = 0; i < T; ++i) {
                // Scores over the causal window, then a stable softmax.
                S row_max = -std::numeric_limits<S>::infinity();
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const S score = qh.row(i).dot(kh.row(j)) * inv_sqrt_hs;
                    probs(i, j) = score;
                    if (score > row_max) row_max = score;
                }
                S denom = S(0);
                for (Eigen::Index j = 0; j <= i; ++j) {
                    probs(i, j) = std::exp(probs(i, j) - row_max);
                    denom += probs(i, j);
                }
                for (Eigen::Index j = 0; j <= i; ++j) probs(i, j) /= denom;
            }

            LmMat<S> mask;
            if (train && cfg.attn_dropout > 0) {
                mask = dropout_mask<S>(T, T, cfg.attn_dropout, *rng);
            }
            auto ctx_h = ctx.block(0, h * hs, T, hs);
            for (Eigen::Index i = 0; i < T; ++i) {
                for (Eigen::Index j = 0; j <= i; ++j) {
                    S w = probs(i, j);
                    if (mask.size()) w *= mask(i, j);
                    if (w != S(0)) ctx_h.row(i) += w * vh.row(j);
                }
            }
            if (bc) {
                probs_store[h] = std::move(probs);
                if (train) attn_masks[h] = std::move(mask);
            }
        }

        LmMat<S> attn_out = rows_times(ctx, blk.wo, blk.bo);
        LmMat<S> resid1_mask;
        if (train && cfg.residual_dropout > 0) {
            resid1_mask = dropout_mask<S>(T, D, cfg.residual_dropout, *rng);
        }
        LmMat<S> x_mid =
            resid1_mask.size() ? LmMat<S>(x + attn_out.cwiseProduct(resid1_mask))
                               : LmMat<S>(x + attn_out);

        LnCache<S> ln2_local;
        LmMat<S> ln2_out =
            layer_norm(x_mid, blk.ln2_g, blk.ln2_b, bc ? &bc->ln2 : &ln2_local);
        LmMat<S> fc_pre = rows_times(ln2_out, blk.w_fc, blk.b_fc);
        LmMat<S> act = gelu(fc_pre);
        LmMat<S> ffn_mask;
        if (train && cfg.ffn_dropout > 0) {
            ffn_mask = dropout_mask<S>(T, act.cols(), cfg.ffn_dropout, *rng);
            act = act.cwiseProduct(ffn_mask);
        }
        LmMat<S> ffn_out = rows_times(act, blk.w_proj, blk.b_proj);
        LmMat<S> resid2_mask;
        if (train && cfg.residual_dropout > 0) {
            resid2_mask = dropout_mask<S>(T, D, cfg.residual_dropout, *rng);
        }
        LmMat<S> x_out =
            resid2_mask.size() ? LmMat<S>(x_mid + ffn_out.cwiseProduct(resid2_mask))
                               : LmMat<S>(x_mid + ffn_out);

        if (bc) {
            bc->ln1_out = std::move(ln1_out);
            bc->q = std::move(q);
            bc->k = std::move(k);
            bc->v = std::move(v);
            bc->probs = std::move(probs_store);
            bc->attn_mask = std::move(attn_masks);
            bc->ctx = std::move(ctx);
            bc->attn_out = std::move(attn_out);
            bc->resid1_mask = std::move(resid1_mask);
            bc->x_mid = x_mid;
            bc->ln2_out = std::move(ln2_out);
            bc->fc_pre = std::move(fc_pre);
            bc->act = std::move(act);
            bc->ffn_mask = std::move(ffn_mask);
            bc->resid2_mask = std::move(resid2_mask);
        }
        x = std::move(x_out);
    }

    LnCache<S> lnf_local;
    if (cache) cache->x_final = x;
    LmMat<S> lnf_out = layer_norm(x, p.lnf_g, p.lnf_b, cache ? &cache->lnf : &lnf_local);
    LmMat<S> logits = rows_times(lnf_out, p.w_out);
    if (cache) cache->lnf_out = std::move(lnf_out);
    return logits;
}

// Mean token-level negative log-likelihood (natural log) of targets given
// logits; target ids < 0 are masked out. targets[i] is the token that
// should follow position i.
template <typename S>
double clm_loss(const LmMat<S>& logits, std::span<const TokenId> targets) {
    if (static_cast<size_t>(logits.rows()) != targets.size()) {
        throw Error("clm_loss: logits rows " + std::to_string(logits.rows()) +
                    " != targets " + std::to_string(targets.size()));
    }
    double total = 0.0;
    size_t counted = 0;
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        const TokenId target = targets[t];
        if (target < 0) continue;
        if (target >= logits.cols()) throw Error("clm_loss: target id out of range");
        const double row_max = static_cast<double>(logits.row(t).maxCoeff());
        double denom = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            denom += std::exp(static_cast<double>(logits(t, c)) - row_max);
        }
        total += std::log(denom) - (static_cast<double>(logits(t, target)) - row_max);
        ++counted;
    }
    if (counted == 0) throw Error("clm_loss: no unmasked targets");
    return total / static_cast<double>(counted);
}

}  // namespace monoforge
