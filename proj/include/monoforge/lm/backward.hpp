#pragma once

#include "monoforge/lm/forward.hpp"

namespace monoforge {

namespace detail {

// Backward through y = xhat * g + b given dy; accumulates into dg/db and
// returns dx. Uses the cached normalized activations and inverse stddevs.
template <typename S>
LmMat<S> layer_norm_backward(const LmMat<S>& dy, const LnCache<S>& ln,
                             const LmMat<S>& g, LmMat<S>& dg, LmMat<S>& db) {
    const Eigen::Index T = dy.rows(), D = dy.cols();
    LmMat<S> dx(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
        auto dyr = dy.row(t).array();
        auto xh = ln.xhat.row(t).array();
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat = dyr * g.row(0).array();
        const S m1 = dxhat.mean();
        const S m2 = (dxhat * xh).mean();
        dx.row(t) = (ln.inv_std(t, 0) * (dxhat - m1 - xh * m2)).matrix();
    }
    dg.row(0).array() += (dy.array() * ln.xhat.array()).colwise().sum();
    db.row(0).array() += dy.array().colwise().sum();
    return dx;
}

}  // namespace detail

// Computes the mean-NLL loss over targets and accumulates d(loss)/d(param)
// * scale into grads (which must have the shapes of zero_params). Returns
// the unscaled loss. The scale hook keeps gradient accumulation a pure sum
// of per-batch means, and doubling it must exactly double every gradient.
template <typename S>
double loss_and_backward(const TinyLMParams<S>& p, const ForwardCache<S>& cache,
                         std::span<const TokenId> targets, TinyLMParams<S>& grads,
                         double scale = 1.0) {
    const TinyLMConfig& cfg = p.config;
    const Eigen::Index T = static_cast<Eigen::Index>(cache.ids.size());
    const Eigen::Index D = static_cast<Eigen::Index>(cfg.n_embed);
    const Eigen::Index V = static_cast<Eigen::Index>(cfg.vocab_size);
    const Eigen::Index H = static_cast<Eigen::Index>(cfg.num_heads);
    const Eigen::Index hs = static_cast<Eigen::Index>(cfg.head_size());
    if (static_cast<size_t>(T) != targets.size()) {
        throw Error("loss_and_backward: cache length " + std::to_string(T) +
                    " != targets " + std::to_string(targets.size()));
    }

    // Recompute logits from the cached final activations (cheap relative to
    // caching the T x V matrix), then form softmax - onehot per row.
    LmMat<S> logits = cache.lnf_out * p.w_out;
    const double loss = clm_loss(logits, targets);

    size_t counted = 0;
    for (TokenId t : targets) {
        if (t >= 0) ++counted;
    }
    const S norm = static_cast<S>(scale / static_cast<double>(counted));

    LmMat<S> dlogits = LmMat<S>::Zero(T, V);
    for (Eigen::Index t = 0; t < T; ++t) {
        if (targets[t] < 0) continue;
        const S row_max = logits.row(t).maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> ex = (logits.row(t).array() - row_max).exp();
        dlogits.row(t) = (ex / ex.sum()).matrix() * norm;
        dlogits(t, targets[t]) -= norm;
    }

    grads.w_out += cache.lnf_out.transpose() * dlogits;
    LmMat<S> dx = detail::layer_norm_backward(LmMat<S>(dlogits * p.w_out.transpose()),
                                              cache.lnf, p.lnf_g, grads.lnf_g, grads.lnf_b);

    const S inv_sqrt_hs = S(1) / std::sqrt(static_cast<S>(hs));

    for (size_t bi = cfg.num_blocks; bi-- > 0;) {
        const BlockParams<S>& blk = p.blocks[bi];
        BlockParams<S>& gb = grads.blocks[bi];
        const BlockCache<S>& bc = cache.blocks[bi];

        // x_out = x_mid + drop(ffn_out): dx flows to both branches.
        LmMat<S> dffn_out = bc.resid2_mask.size()
                                ? LmMat<S>(dx.cwiseProduct(bc.resid2_mask))
                                : dx;
        gb.b_proj.row(0).array() += dffn_out.array().colwise().sum();
        gb.w_proj += bc.act.transpose() * dffn_out;
        LmMat<S> dact = dffn_out * blk.w_proj.transpose();
        if (bc.ffn_mask.size()) dact = dact.cwiseProduct(bc.ffn_mask);
        LmMat<S> dfc_pre = dact.cwiseProduct(gelu_grad(bc.fc_pre));
        gb.b_fc.row(0).array() += dfc_pre.array().colwise().sum();
        gb.w_fc += bc.ln2_out.transpose() * dfc_pre;
        LmMat<S> dln2_out = dfc_pre * blk.w_fc.transpose();
        LmMat<S> dx_mid =
            detail::layer_norm_backward(dln2_out, bc.ln2, blk.ln2_g, gb.ln2_g, gb.ln2_b);
        dx_mid += dx;

        // x_mid = x_in + drop(attn_out)
        LmMat<S> dattn_out = bc.resid1_mask.size()
                                 ? LmMat<S>(dx_mid.cwiseProduct(bc.resid1_mask))
                                 : dx_mid;
        gb.bo.row(0).array() += dattn_out.array().colwise().sum();
        gb.wo += bc.ctx.transpose() * dattn_out;
        LmMat<S> dctx = dattn_out * blk.wo.transpose();

        LmMat<S> dq = LmMat<S>::Zero(T, D);
        LmMat<S> dk = LmMat<S>::Zero(T, D);
        LmMat<S> dv = LmMat<S>::Zero(T, D);
        for (Eigen::Index h = 0; h < H; ++h) {
            auto qh = bc.q.block(0, h * hs, T, hs);
            auto kh = bc.k.block(0, h * hs, T, hs);
            auto vh = bc.v.block(0, h * hs, T, hs);
            auto dctx_h = dctx.block(0, h * hs, T, hs);
            auto dqh = dq.block(0, h * hs, T, hs);
            auto dkh = dk.block(0, h * hs, T, hs);
            auto dvh = dv.block(0, h * hs, T, hs);
            const LmMat<S>& probs = bc.probs[h];
            const LmMat<S>* mask =
                bc.attn_mask.size() && bc.attn_mask[h].size() ? &bc.attn_mask[h] : nullptr;

            for (Eigen::Index i = 0; i < T; ++i) {
                // Through ctx_i = sum_j (p_ij * m_ij) v_j.
                Eigen::Array<S, 1, Eigen::Dynamic> dp(i + 1);
                for (Eigen::Index j = 0; j <= i; ++j) {
                    S w = probs(i, j);
                    if (mask) w *= (*mask)(i, j);
                    if (w != S(0)) dvh.row(j) += w * dctx_h.row(i);
                    S d = dctx_h.row(i).dot(vh.row(j));
                    if (mask) d *= (*mask)(i, j);
                    dp(j) = d;
                }
                // Softmax row backward: ds_j = p_j * (dp_j - sum_k dp_k p_k).
                S inner = S(0);
                for (Eigen::Index j = 0; j <= i; ++j) inner += dp(j) * probs(i, j);
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const S ds = probs(i, j) * (dp(j) - inner) * inv_sqrt_hs;
                    dqh.row(i) += ds * kh.row(j);
                    dkh.row(j) += ds * qh.row(i);
                }
            }
            // Undo the rotations: the map is orthogonal, so the gradient
            // rotates back by the inverse.
            rope_apply_inplace(dqh, cfg.rope_dim(), cache.pos_offset, /*inverse=*/true);
            rope_apply_inplace(dkh, cfg.rope_dim(), cache.pos_offset, /*inverse=*/true);
        }

        gb.bq.row(0).array() += dq.array().colwise().sum();
        gb.bk.row(0).array() += dk.array().colwise().sum();
        gb.bv.row(0).array() += dv.array().colwise().sum();
        gb.wq += bc.ln1_out.transpose() * dq;
        gb.wk += bc.ln1_out.transpose() * dk;
        gb.wv += bc.ln1_out.transpose() * dv;
        LmMat<S> dln1_out = dq * blk.wq.transpose() + dk * blk.wk.transpose() +
                            dv * blk.wv.transpose();
        LmMat<S> dx_in =
            detail::layer_norm_backward(dln1_out, bc.ln1, blk.ln1_g, gb.ln1_g, gb.ln1_b);
        dx = dx_in + dx_mid;
    }

    for (Eigen::Index t = 0; t < T; ++t) {
        grads.embedding.row(cache.ids[t]) += dx.row(t);
    }
    return loss;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_tensor;
    size_t coords_checked = 0;
};

// Central-difference check of loss_and_backward against the forward pass,
// sampling up to per-tensor coordinates from every tensor. Relative error
// uses |a - n| / max(floor, |a| + |n|).
inline GradCheckResult gradient_check(const TinyLMConfig& config, uint64_t seed,
                                      std::span<const TokenId> ids,
                                      std::span<const TokenId> targets,
                                      size_t per_tensor = 4, double h = 1e-4) {
    TinyLMParams<double> params = init_params<double>(config, seed);
    ForwardCache<double> cache;
    forward(params, ids, &cache);
    TinyLMParams<double> grads = zero_params<double>(config);
    loss_and_backward(params, cache, targets, grads);

    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    GradCheckResult result;
    std::vector<std::pair<std::string, LmMat<double>*>> tensors;
    for_each_tensor(params, [&](const std::string& name, LmMat<double>& m) {
        tensors.emplace_back(name, &m);
    });
    std::vector<const LmMat<double>*> grad_tensors;
    for_each_tensor(grads, [&](const std::string&, LmMat<double>& m) {
        grad_tensors.push_back(&m);
    });

    for (size_t ti = 0; ti < tensors.size(); ++ti) {
        LmMat<double>& m = *tensors[ti].second;
        const LmMat<double>& g = *grad_tensors[ti];
        const size_t total = static_cast<size_t>(m.size());
        const size_t n_check = std::min(per_tensor, total);
        for (size_t c = 0; c < n_check; ++c) {
            const size_t flat = rng.next_below(total);
            const Eigen::Index r = static_cast<Eigen::Index>(flat) / m.cols();
            const Eigen::Index col = static_cast<Eigen::Index>(flat) % m.cols();
            const double orig = m(r, col);
            m(r, col) = orig + h;
            const double lp = clm_loss(forward(params, ids), targets);
            m(r, col) = orig - h;
            const double lm = clm_loss(forward(params, ids), targets);
            m(r, col) = orig;
            const double numeric = (lp - lm) / (2 * h);
            const double analytic = g(r, col);
            const double rel = std::abs(analytic - numeric) /
                               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            ++result.coords_checked;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_tensor = tensors[ti].first;
            }
        }
    }
    return result;
}

}  // namespace monoforge
