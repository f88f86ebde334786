#pragma once

#include "monoforge/lm/model.hpp"

namespace monoforge {

// Global L2 norm over every gradient tensor.
template <typename S>
double gradient_norm(const TinyLMParams<S>& grads) {
    double sq = 0.0;
    for_each_tensor(grads, [&](const std::string&, const LmMat<S>& m) {
        sq += m.template cast<double>().squaredNorm();
    });
    return std::sqrt(sq);
}

// Scales all gradients so their global norm is at most max_norm; returns
// the pre-clip norm.
template <typename S>
double clip_gradients(TinyLMParams<S>& grads, double max_norm) {
    const double norm = gradient_norm(grads);
    if (max_norm > 0 && norm > max_norm) {
        const S factor = static_cast<S>(max_norm / norm);
        for_each_tensor(grads,
                        [&](const std::string&, LmMat<S>& m) { m *= factor; });
    }
    return norm;
}

// Decoupled-weight-decay Adam. Decay applies only to weight matrices
// (tensors with more than one row); biases and norm parameters are 1 x N
// and skip it, matching the usual no-decay parameter grouping.
template <typename S>
class AdamW {
public:
    AdamW(const TinyLMConfig& config, const TrainConfig& train)
        : train_(train),
          m_(zero_params<S>(config)),
          v_(zero_params<S>(config)) {}

    size_t step_count() const { return step_; }

    // One update with the given learning rate; grads are consumed read-only.
    void step(TinyLMParams<S>& params, const TinyLMParams<S>& grads, double lr) {
        ++step_;
        const double bc1 = 1.0 - std::pow(train_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(train_.beta2, static_cast<double>(step_));
        const S b1 = static_cast<S>(train_.beta1);
        const S b2 = static_cast<S>(train_.beta2);
        const S eps = static_cast<S>(train_.eps);

        std::vector<LmMat<S>*> mt, vt;
        for_each_tensor(m_, [&](const std::string&, LmMat<S>& m) { mt.push_back(&m); });
        for_each_tensor(v_, [&](const std::string&, LmMat<S>& m) { vt.push_back(&m); });
        std::vector<const LmMat<S>*> gt;
        for_each_tensor(grads,
                        [&](const std::string&, const LmMat<S>& m) { gt.push_back(&m); });

        size_t i = 0;
        for_each_tensor(params, [&](const std::string&, LmMat<S>& p) {
            LmMat<S>& m = *mt[i];
            LmMat<S>& v = *vt[i];
            const LmMat<S>& g = *gt[i];
            ++i;
            m = b1 * m + (S(1) - b1) * g;
            v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
            LmMat<S> update =
                (m.array() / static_cast<S>(bc1) /
                 ((v.array() / static_cast<S>(bc2)).sqrt() + eps))
                    .matrix();
            if (train_.weight_decay > 0 && p.rows() > 1) {
                update += static_cast<S>(train_.weight_decay) * p;
            }
            p -= static_cast<S>(lr) * update;
        });
    }

    TinyLMParams<S>& first_moment() { return m_; }
    TinyLMParams<S>& second_moment() { return v_; }
    void set_step_count(size_t step) { step_ = step; }

private:
    TrainConfig train_;
    TinyLMParams<S> m_;
    TinyLMParams<S> v_;
    size_t step_ = 0;
};

}  // namespace monoforge
