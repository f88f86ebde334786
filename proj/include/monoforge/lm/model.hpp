#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "monoforge/lm/config.hpp"
#include "monoforge/util/rng.hpp"

namespace monoforge {

template <typename S>
using LmMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLayerNormEps = 1e-5;

// All tensors are row-major matrices; vectors (biases, norm scales) are
// 1 x N so a single visitor covers every parameter uniformly.
template <typename S>
struct BlockParams {
    LmMat<S> ln1_g, ln1_b;
    LmMat<S> wq, wk, wv, wo;
    LmMat<S> bq, bk, bv, bo;
    LmMat<S> ln2_g, ln2_b;
    LmMat<S> w_fc, b_fc;
    LmMat<S> w_proj, b_proj;
};

template <typename S>
struct TinyLMParams {
    TinyLMConfig config;
    LmMat<S> embedding;  // vocab x n_embed
    std::vector<BlockParams<S>> blocks;
    LmMat<S> lnf_g, lnf_b;
    LmMat<S> w_out;  // n_embed x vocab
};

// Visits every tensor as (name, matrix). Order is fixed; initialization,
// the optimizer, serialization, and gradient checks all rely on it.
template <typename S, typename P, typename F>
void for_each_tensor_impl(P& p, F&& f) {
    f("embedding", p.embedding);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        auto& b = p.blocks[i];
        const std::string pre = "block" + std::to_string(i) + ".";
        f(pre + "ln1_g", b.ln1_g);
        f(pre + "ln1_b", b.ln1_b);
        f(pre + "wq", b.wq);
        f(pre + "bq", b.bq);
        f(pre + "wk", b.wk);
        f(pre + "bk", b.bk);
        f(pre + "wv", b.wv);
        f(pre + "bv", b.bv);
        f(pre + "wo", b.wo);
        f(pre + "bo", b.bo);
        f(pre + "ln2_g", b.ln2_g);
        f(pre + "ln2_b", b.ln2_b);
        f(pre + "w_fc", b.w_fc);
        f(pre + "b_fc", b.b_fc);
        f(pre + "w_proj", b.w_proj);
        f(pre + "b_proj", b.b_proj);
    }
    f("lnf_g", p.lnf_g);
    f("lnf_b", p.lnf_b);
    f("w_out", p.w_out);
}

template <typename S, typename F>
void for_each_tensor(TinyLMParams<S>& p, F&& f) {
    for_each_tensor_impl<S, TinyLMParams<S>, F>(p, std::forward<F>(f));
}
template <typename S, typename F>
void for_each_tensor(const TinyLMParams<S>& p, F&& f) {
    for_each_tensor_impl<S, const TinyLMParams<S>, F>(p, std::forward<F>(f));
}

// Allocates every tensor at its configured shape, zero-filled (also the
// gradient-accumulator layout).
template <typename S>
TinyLMParams<S> zero_params(const TinyLMConfig& config) {
    config.validate();
    const auto d = static_cast<Eigen::Index>(config.n_embed);
    const auto f = static_cast<Eigen::Index>(config.ffn_width());
    const auto v = static_cast<Eigen::Index>(config.vocab_size);
    TinyLMParams<S> p;
    p.config = config;
    p.embedding = LmMat<S>::Zero(v, d);
    p.blocks.resize(config.num_blocks);
    for (auto& b : p.blocks) {
        b.ln1_g = LmMat<S>::Zero(1, d);
        b.ln1_b = LmMat<S>::Zero(1, d);
        b.wq = LmMat<S>::Zero(d, d);
        b.wk = LmMat<S>::Zero(d, d);
        b.wv = LmMat<S>::Zero(d, d);
        b.wo = LmMat<S>::Zero(d, d);
        b.bq = LmMat<S>::Zero(1, d);
        b.bk = LmMat<S>::Zero(1, d);
        b.bv = LmMat<S>::Zero(1, d);
        b.bo = LmMat<S>::Zero(1, d);
        b.ln2_g = LmMat<S>::Zero(1, d);
        b.ln2_b = LmMat<S>::Zero(1, d);
        b.w_fc = LmMat<S>::Zero(d, f);
        b.b_fc = LmMat<S>::Zero(1, f);
        b.w_proj = LmMat<S>::Zero(f, d);
        b.b_proj = LmMat<S>::Zero(1, d);
    }
    p.lnf_g = LmMat<S>::Zero(1, d);
    p.lnf_b = LmMat<S>::Zero(1, d);
    p.w_out = LmMat<S>::Zero(d, v);
    return p;
}

// Scaled-normal initialization: weights N(0, 0.02^2); residual projections
// (wo, w_proj) scaled down by 1/sqrt(2 * num_blocks); biases zero; norms at
// identity. Deterministic given the seed.
template <typename S>
TinyLMParams<S> init_params(const TinyLMConfig& config, uint64_t seed) {
    TinyLMParams<S> p = zero_params<S>(config);
    Rng rng(seed);
    const double base_std = 0.02;
    const double resid_std =
        config.num_blocks > 0
            ? base_std / std::sqrt(2.0 * static_cast<double>(config.num_blocks))
            : base_std;

    for_each_tensor(p, [&](const std::string& name, LmMat<S>& t) {
        const auto leaf = name.find('.') == std::string::npos
                              ? name
                              : name.substr(name.find('.') + 1);
        if (leaf == "ln1_g" || leaf == "ln2_g" || leaf == "lnf_g") {
            t.setOnes();
            return;
        }
        if (leaf[0] == 'b' || leaf == "ln1_b" || leaf == "ln2_b" || leaf == "lnf_b") {
            return;  // biases and norm offsets stay zero
        }
        const double std_dev = (leaf == "wo" || leaf == "w_proj") ? resid_std : base_std;
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                t(r, c) = static_cast<S>(std_dev * rng.next_gaussian());
            }
        }
    });
    return p;
}

template <typename S>
uint64_t param_count(const TinyLMParams<S>& p) {
    uint64_t n = 0;
    for_each_tensor(p, [&](const std::string&, const LmMat<S>& t) {
        n += static_cast<uint64_t>(t.size());
    });
    return n;
}

}  // namespace monoforge
