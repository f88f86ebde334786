#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "monoforge/lm/backward.hpp"
#include "monoforge/lm/checkpoint.hpp"
#include "monoforge/lm/generate.hpp"
#include "monoforge/lm/score.hpp"
#include "monoforge/lm/train.hpp"
#include "support/lm_fixtures.hpp"

using namespace monoforge;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "monoforge-tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::vector<TokenId> random_ids(size_t n, size_t vocab, Rng& rng) {
    std::vector<TokenId> ids(n);
    for (auto& id : ids) id = static_cast<TokenId>(rng.next_below(vocab));
    return ids;
}

// Reference NLL of one row, written independently of clm_loss.
double row_nll(const LmMat<double>& logits, Eigen::Index row, TokenId target) {
    const double row_max = logits.row(row).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        denom += std::exp(logits(row, c) - row_max);
    }
    return std::log(denom) - (logits(row, target) - row_max);
}

// Window-perplexity oracle: every scored token gets its own fresh forward
// pass over exactly its prefix, so no activation reuse is possible.
double oracle_window_ppl(const TinyLMParams<double>& p, const std::vector<TokenId>& ids,
                         size_t s, size_t e) {
    const size_t limit = std::min(ids.size(), e);
    double total = 0.0;
    size_t n = 0;
    for (size_t t = s + 1; t <= limit; ++t) {
        std::span<const TokenId> prefix(ids.data(), t - 1);
        LmMat<double> logits = forward(p, prefix);
        total += row_nll(logits, logits.rows() - 1, ids[t - 1]);
        ++n;
    }
    return std::exp(total / static_cast<double>(n));
}

}  // namespace

TEST_CASE("config: presets carry the published shapes") {
    const TinyLMConfig mini = TinyLMConfig::mini_1k();
    CHECK(mini.vocab_size == 56000);
    CHECK(mini.n_embed == 768);
    CHECK(mini.num_blocks == 4);
    CHECK(mini.num_heads == 16);
    CHECK(mini.context_len == 1024);
    CHECK(mini.ffn_scaling == 4);
    CHECK(mini.attn_dropout == 0.1);
    CHECK(mini.ffn_dropout == 0.1);
    CHECK(mini.residual_dropout == 0.1);
    CHECK(mini.head_size() == 48);
    CHECK(mini.rope_dim() == 24);
    CHECK_NOTHROW(mini.validate());

    const TinyLMConfig base = TinyLMConfig::base_1k();
    CHECK(base.num_blocks == 12);
    CHECK(base.num_heads == 12);
    CHECK(base.context_len == 1024);
    CHECK(base.head_size() == 64);
    CHECK_NOTHROW(base.validate());

    const TinyLMConfig mini4k = TinyLMConfig::mini_4k();
    CHECK(mini4k.context_len == 4096);
    CHECK(mini4k.num_blocks == 4);
    CHECK_NOTHROW(mini4k.validate());
}

TEST_CASE("config: non-embedding parameter counts") {
    // Derived by expanding the per-block tensor shapes at width 768.
    CHECK(non_embedding_params(TinyLMConfig::mini_1k()) == 28353024ULL);
    CHECK(non_embedding_params(TinyLMConfig::base_1k()) == 85056000ULL);
    // Matches the advertised ~28M / ~85M scales.
    CHECK(non_embedding_params(TinyLMConfig::mini_1k()) / 1000000 == 28);
    CHECK(non_embedding_params(TinyLMConfig::base_1k()) / 1000000 == 85);
}

TEST_CASE("config: validation rejects bad shapes") {
    TinyLMConfig c = fixtures::tiny_lm_config();
    CHECK_NOTHROW(c.validate());
    c.n_embed = 10;
    c.num_heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = fixtures::tiny_lm_config();
    c.context_len = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = fixtures::tiny_lm_config();
    c.attn_dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);

    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());
    tc.token_budget = 0;
    CHECK_THROWS_AS(tc.validate(), Error);
    tc = TrainConfig{};
    tc.schedule = "linear";
    CHECK_THROWS_AS(tc.validate(), Error);
}

TEST_CASE("lr schedule: warmup hits the peak exactly, cosine decays to zero") {
    TrainConfig tc;
    tc.warmup_steps = 5000;
    const size_t total = 20000;
    CHECK(lr_at(0, tc, total) == 0.0);
    CHECK(lr_at(2500, tc, total) == doctest::Approx(3e-4).epsilon(1e-12));
    CHECK(lr_at(5000, tc, total) == 6e-4);  // exact at the end of warmup
    // Midpoint of the cosine leg: half the peak.
    CHECK(lr_at(12500, tc, total) == doctest::Approx(3e-4).epsilon(1e-9));
    CHECK(lr_at(20000, tc, total) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lr_at(25000, tc, total) == doctest::Approx(0.0).epsilon(1e-12));  // clamped

    tc.schedule = "constant";
    CHECK(lr_at(12500, tc, total) == 6e-4);
    tc.schedule = "cosine";
    CHECK(lr_at(6000, tc, 4000) == 6e-4);  // horizon shorter than warmup: flat
}

TEST_CASE("init: deterministic, scaled, and shaped as advertised") {
    TinyLMConfig c = fixtures::tiny_lm_config(1000, 64, 4, 2, 16);
    TinyLMParams<double> a = init_params<double>(c, 42);
    TinyLMParams<double> b = init_params<double>(c, 42);
    TinyLMParams<double> other = init_params<double>(c, 43);

    double max_diff = 0.0;
    for_each_tensor(a, [&](const std::string& name, LmMat<double>& t) {
        const LmMat<double>* tb = nullptr;
        for_each_tensor(b, [&](const std::string& n2, LmMat<double>& t2) {
            if (n2 == name) tb = &t2;
        });
        REQUIRE(tb != nullptr);
        max_diff = std::max(max_diff, (t - *tb).cwiseAbs().maxCoeff());
    });
    CHECK(max_diff == 0.0);
    CHECK((a.embedding - other.embedding).cwiseAbs().maxCoeff() > 0.0);

    // Norm scales start at one, biases at zero.
    CHECK(a.lnf_g.minCoeff() == 1.0);
    CHECK(a.lnf_g.maxCoeff() == 1.0);
    CHECK(a.lnf_b.cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.blocks[0].ln1_g.minCoeff() == 1.0);
    CHECK(a.blocks[0].bq.cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.blocks[0].b_fc.cwiseAbs().maxCoeff() == 0.0);

    // Embedding entries are ~N(0, 0.02^2): the mean |x| of that half-normal
    // is 0.02 * sqrt(2/pi), and with 64k samples the estimate sits within a
    // few standard errors.
    const double mean_abs = a.embedding.cwiseAbs().mean();
    CHECK(std::abs(mean_abs - 0.02 * std::sqrt(2.0 / 3.14159265358979)) < 2e-4);
    const double emb_std = std::sqrt(a.embedding.array().square().mean());
    CHECK(std::abs(emb_std - 0.02) < 5e-4);

    // Residual-facing projections are shrunk by sqrt(2 * num_blocks).
    const double wo_std = std::sqrt(a.blocks[0].wo.array().square().mean());
    CHECK(std::abs(wo_std - 0.02 / std::sqrt(8.0)) < 5e-4);
    const double proj_std = std::sqrt(a.blocks[0].w_proj.array().square().mean());
    CHECK(std::abs(proj_std - 0.02 / std::sqrt(8.0)) < 3e-4);

    // param_count agrees with the tensor shapes.
    uint64_t total = 0;
    for_each_tensor(a, [&](const std::string&, LmMat<double>& t) {
        total += static_cast<uint64_t>(t.size());
    });
    CHECK(param_count(a) == total);
}

TEST_CASE("rope: position zero is the identity, bit for bit") {
    Rng rng(7);
    LmMat<double> x(5, 8);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.next_gaussian();
    }
    LmMat<double> single = x.topRows(1);
    LmMat<double> rotated = rope_apply(single, 4, 0);
    CHECK((rotated - single).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rope: rotations preserve row norms") {
    Rng rng(11);
    LmMat<double> x(6, 8);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.next_gaussian();
    }
    LmMat<double> y = rope_apply(x, 4, 123);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        CHECK(std::abs(y.row(r).norm() - x.row(r).norm()) < 1e-7);
    }
}

TEST_CASE("rope: attention scores depend only on relative position") {
    Rng rng(5);
    LmMat<double> q(1, 8), k(1, 8);
    for (Eigen::Index c = 0; c < 8; ++c) {
        q(0, c) = rng.next_gaussian();
        k(0, c) = rng.next_gaussian();
    }
    for (int64_t delta : {1, 7, 50}) {
        for (int64_t shift : {1, 13, 97}) {
            LmMat<double> q0 = rope_apply(q, 4, delta);
            LmMat<double> k0 = rope_apply(k, 4, 0);
            LmMat<double> q1 = rope_apply(q, 4, delta + shift);
            LmMat<double> k1 = rope_apply(k, 4, shift);
            CHECK(std::abs(q0.row(0).dot(k0.row(0)) - q1.row(0).dot(k1.row(0))) < 1e-9);
        }
    }
}

TEST_CASE("rope: inverse undoes the rotation") {
    Rng rng(3);
    LmMat<double> x(4, 8);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.next_gaussian();
    }
    LmMat<double> y = rope_apply(x, 4, 77);
    rope_apply_inplace(y, 4, 77, /*inverse=*/true);
    CHECK((y - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layer norm: rows come out standardized, params applied") {
    Rng rng(9);
    LmMat<double> x(4, 16);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            x(r, c) = 3.0 * rng.next_gaussian() + 2.0;
        }
    }
    LmMat<double> g = LmMat<double>::Constant(1, 16, 1.5);
    LmMat<double> b = LmMat<double>::Constant(1, 16, -0.5);
    LnCache<double> cache;
    LmMat<double> y = layer_norm(x, g, b, &cache);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        CHECK(std::abs(cache.xhat.row(r).mean()) < 1e-12);
        const double var = cache.xhat.row(r).array().square().mean();
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps-shrunk slightly
        CHECK(std::abs(y.row(r).mean() - (-0.5)) < 1e-10);
    }
}

TEST_CASE("gelu: exact-erf values and gradient") {
    LmMat<double> x(1, 4);
    x << 0.0, 1.0, -10.0, 10.0;
    LmMat<double> y = gelu(x);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(std::abs(y(0, 2)) < 1e-12);
    CHECK(y(0, 3) == doctest::Approx(10.0).epsilon(1e-12));

    // Derivative agrees with central differences.
    for (double v : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
        LmMat<double> p(1, 1), m(1, 1), at(1, 1);
        const double h = 1e-6;
        p << v + h;
        m << v - h;
        at << v;
        const double numeric = (gelu(p)(0, 0) - gelu(m)(0, 0)) / (2 * h);
        CHECK(gelu_grad(at)(0, 0) == doctest::Approx(numeric).epsilon(1e-6));
    }
}

TEST_CASE("forward: shape, validation, cache equivalence") {
    TinyLMConfig c = fixtures::tiny_lm_config();
    TinyLMParams<double> p = init_params<double>(c, 1);
    Rng rng(2);
    std::vector<TokenId> ids = random_ids(10, c.vocab_size, rng);

    LmMat<double> logits = forward(p, ids);
    CHECK(logits.rows() == 10);
    CHECK(logits.cols() == static_cast<Eigen::Index>(c.vocab_size));

    ForwardCache<double> cache;
    LmMat<double> logits2 = forward(p, ids, &cache);
    CHECK((logits - logits2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cache.ids.size() == 10);
    CHECK(cache.blocks.size() == c.num_blocks);

    CHECK_THROWS_AS(forward(p, std::span<const TokenId>{}), Error);
    std::vector<TokenId> too_long(c.context_len + 1, 0);
    CHECK_THROWS_AS(forward(p, too_long), Error);
    std::vector<TokenId> bad = {0, static_cast<TokenId>(c.vocab_size)};
    CHECK_THROWS_AS(forward(p, bad), Error);
    std::vector<TokenId> neg = {0, -1};
    CHECK_THROWS_AS(forward(p, neg), Error);
    CHECK_THROWS_AS(forward<double>(p, ids, nullptr, RunMode::train, nullptr), Error);
}

TEST_CASE("forward: appending tokens never changes earlier logits") {
    TinyLMConfig c = fixtures::tiny_lm_config(13, 8, 2, 2, 16);
    TinyLMParams<double> p = init_params<double>(c, 7);
    Rng rng(8);
    std::vector<TokenId> ids = random_ids(12, c.vocab_size, rng);

    LmMat<double> full = forward(p, ids);
    for (size_t k = 1; k <= ids.size(); ++k) {
        std::span<const TokenId> prefix(ids.data(), k);
        LmMat<double> part = forward(p, prefix);
        // Bit-identical, not merely close: scoring a prefix must be exactly
        // the same computation as scoring it inside a longer document.
        CHECK((part - full.topRows(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff() ==
              0.0);
    }
}

TEST_CASE("forward: attention rows are causal probability distributions") {
    TinyLMConfig c = fixtures::tiny_lm_config(13, 8, 2, 2, 16);
    TinyLMParams<double> p = init_params<double>(c, 3);
    Rng rng(4);
    std::vector<TokenId> ids = random_ids(9, c.vocab_size, rng);
    ForwardCache<double> cache;
    forward(p, ids, &cache);
    for (const BlockCache<double>& bc : cache.blocks) {
        REQUIRE(bc.probs.size() == c.num_heads);
        for (const LmMat<double>& probs : bc.probs) {
            for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                double row_sum = 0.0;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    CHECK(probs(i, j) >= 0.0);
                    row_sum += probs(i, j);
                }
                CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
                for (Eigen::Index j = i + 1; j < probs.cols(); ++j) {
                    CHECK(probs(i, j) == 0.0);  // future stays untouched
                }
            }
        }
    }
}

TEST_CASE("forward: rotary offset shifts are invisible to the outputs") {
    TinyLMConfig c = fixtures::tiny_lm_config(13, 8, 2, 2, 64);
    TinyLMParams<double> p = init_params<double>(c, 21);
    Rng rng(22);
    std::vector<TokenId> ids = random_ids(11, c.vocab_size, rng);
    LmMat<double> base = forward(p, ids);
    for (int64_t offset : {1, 5, 17, 40}) {
        LmMat<double> shifted = forward<double>(p, ids, nullptr, RunMode::eval, nullptr, offset);
        CHECK((shifted - base).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("forward: train mode dropout is seeded and reproducible") {
    TinyLMConfig c = fixtures::tiny_lm_config(13, 8, 2, 2, 16);
    c.attn_dropout = c.ffn_dropout = c.residual_dropout = 0.3;
    TinyLMParams<double> p = init_params<double>(c, 5);
    Rng rng_ids(6);
    std::vector<TokenId> ids = random_ids(8, c.vocab_size, rng_ids);

    Rng d1(99), d2(99), d3(100);
    LmMat<double> a = forward<double>(p, ids, nullptr, RunMode::train, &d1);
    LmMat<double> b = forward<double>(p, ids, nullptr, RunMode::train, &d2);
    LmMat<double> other = forward<double>(p, ids, nullptr, RunMode::train, &d3);
    LmMat<double> eval = forward(p, ids);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - other).cwiseAbs().maxCoeff() > 0.0);
    CHECK((a - eval).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("dropout mask: inverted scaling keeps the expectation") {
    Rng rng(31);
    LmMat<double> m = dropout_mask<double>(200, 50, 0.25, rng);
    size_t zeros = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75).epsilon(1e-12)));
            if (v == 0.0) ++zeros;
        }
    }
    const double rate = static_cast<double>(zeros) / static_cast<double>(m.size());
    CHECK(std::abs(rate - 0.25) < 0.02);
    CHECK(std::abs(m.mean() - 1.0) < 0.03);
}

TEST_CASE("clm loss: analytic anchors") {
    // Uniform logits: loss is ln(V) whatever the constant.
    LmMat<double> uniform = LmMat<double>::Constant(3, 7, 4.2);
    std::vector<TokenId> targets = {0, 3, 6};
    CHECK(clm_loss(uniform, targets) == doctest::Approx(std::log(7.0)).epsilon(1e-12));

    // Two-way row with odds 3:1 for the target.
    LmMat<double> two(1, 2);
    two << 0.0, std::log(3.0);
    std::vector<TokenId> t1 = {1};
    CHECK(clm_loss(two, t1) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));

    // Near-certain target: loss collapses toward zero.
    LmMat<double> sure = LmMat<double>::Zero(1, 5);
    sure(0, 2) = 100.0;
    std::vector<TokenId> t2 = {2};
    CHECK(clm_loss(sure, t2) < 1e-12);

    // Masked positions are excluded from the mean.
    LmMat<double> mixed(2, 2);
    mixed << 0.0, std::log(3.0), 50.0, 0.0;
    std::vector<TokenId> masked = {1, -1};
    CHECK(clm_loss(mixed, masked) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));

    std::vector<TokenId> all_masked = {-1, -1};
    CHECK_THROWS_AS(clm_loss(mixed, all_masked), Error);
    std::vector<TokenId> wrong_len = {0};
    CHECK_THROWS_AS(clm_loss(mixed, wrong_len), Error);
}

TEST_CASE("perplexity anchors: zero params score every vocab uniformly") {
    for (size_t vocab : {7UL, 56UL}) {
        TinyLMConfig c = fixtures::tiny_lm_config(vocab, 8, 0, 1, 64);
        TinyLMParams<double> p = zero_params<double>(c);
        std::vector<TokenId> ids = fixtures::cyclic_ids(40, vocab);
        WindowPerplexity wp = perplexity_window(p, ids, {10, 1024});
        CHECK(wp.scorable);
        CHECK(wp.tokens_scored == 30);
        CHECK(wp.ppl == doctest::Approx(static_cast<double>(vocab)).epsilon(1e-6));
    }
}

TEST_CASE("perplexity anchors: deterministic successor model scores 1") {
    for (size_t vocab : {7UL, 56UL}) {
        const size_t width = vocab <= 8 ? 8 : 64;
        TinyLMParams<double> p = fixtures::successor_model(vocab, width, 128);
        std::vector<TokenId> ids = fixtures::cyclic_ids(50, vocab);
        WindowPerplexity wp = perplexity_window(p, ids, {10, 1024});
        CHECK(wp.scorable);
        CHECK(wp.tokens_scored == 40);
        CHECK(wp.ppl == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("perplexity window: matches the fresh-prefix oracle") {
    TinyLMConfig c = fixtures::tiny_lm_config(17, 8, 2, 2, 32);
    TinyLMParams<double> p = init_params<double>(c, 13);
    Rng rng(14);
    for (int rep = 0; rep < 5; ++rep) {
        const size_t n = 12 + rng.next_below(15);  // 12..26 tokens
        std::vector<TokenId> ids = random_ids(n, c.vocab_size, rng);
        WindowPerplexity wp = perplexity_window(p, ids, {10, 20});
        const double oracle = oracle_window_ppl(p, ids, 10, 20);
        REQUIRE(wp.scorable);
        CHECK(wp.ppl == doctest::Approx(oracle).epsilon(1e-9));
        CHECK(wp.tokens_scored == std::min<size_t>(n, 20) - 10);
    }
}

TEST_CASE("perplexity window: scorability boundary at start + 2 tokens") {
    TinyLMConfig c = fixtures::tiny_lm_config(17, 8, 1, 1, 32);
    TinyLMParams<double> p = init_params<double>(c, 15);
    std::vector<TokenId> eleven = fixtures::cyclic_ids(11, c.vocab_size);
    std::vector<TokenId> twelve = fixtures::cyclic_ids(12, c.vocab_size);
    CHECK_FALSE(perplexity_window(p, eleven, {10, 1024}).scorable);
    WindowPerplexity wp = perplexity_window(p, twelve, {10, 24});
    CHECK(wp.scorable);
    CHECK(wp.tokens_scored == 2);  // predictions of tokens 11 and 12

    CHECK_THROWS_AS(perplexity_window(p, twelve, {0, 10}), Error);
    CHECK_THROWS_AS(perplexity_window(p, twelve, {10, 10}), Error);
    // Window end beyond the context: only an error once the doc reaches it.
    std::vector<TokenId> long_doc = fixtures::cyclic_ids(33, c.vocab_size);
    CHECK_THROWS_AS(perplexity_window(p, long_doc, {10, 64}), Error);
}

TEST_CASE("token nll trace: windowed mean reproduces the window score") {
    TinyLMConfig c = fixtures::tiny_lm_config(17, 8, 2, 2, 32);
    TinyLMParams<double> p = init_params<double>(c, 16);
    Rng rng(17);
    std::vector<TokenId> ids = random_ids(25, c.vocab_size, rng);
    const size_t s = 10, e = 20;
    std::vector<double> trace = token_nll_trace(p, ids);
    REQUIRE(trace.size() == ids.size() - 1);
    double total = 0.0;
    size_t n = 0;
    for (size_t t = s - 1; t + 1 < std::min(ids.size(), e); ++t) {
        total += trace[t];
        ++n;
    }
    WindowPerplexity wp = perplexity_window(p, ids, {s, e});
    CHECK(wp.tokens_scored == n);
    CHECK(std::abs(std::exp(total / static_cast<double>(n)) - wp.ppl) /
              wp.ppl <
          1e-9);

    std::vector<TokenId> one = {3};
    CHECK_THROWS_AS(token_nll_trace(p, one), Error);
}

TEST_CASE("backward: gradients match central differences") {
    Rng rng(19);
    SUBCASE("one block") {
        TinyLMConfig c = fixtures::tiny_lm_config(11, 8, 1, 2, 16);
        std::vector<TokenId> ids = random_ids(6, c.vocab_size, rng);
        std::vector<TokenId> targets = random_ids(6, c.vocab_size, rng);
        targets[2] = -1;  // exercise masking
        GradCheckResult r = gradient_check(c, 23, ids, targets, 6);
        CAPTURE(r.worst_tensor);
        CHECK(r.max_rel_err < 1e-4);
        CHECK(r.coords_checked > 50);
    }
    SUBCASE("two blocks, multi-head") {
        TinyLMConfig c = fixtures::tiny_lm_config(11, 8, 2, 2, 16);
        std::vector<TokenId> ids = random_ids(7, c.vocab_size, rng);
        std::vector<TokenId> targets = random_ids(7, c.vocab_size, rng);
        GradCheckResult r = gradient_check(c, 29, ids, targets, 4);
        CAPTURE(r.worst_tensor);
        CHECK(r.max_rel_err < 1e-4);
    }
    SUBCASE("block-free degenerate model") {
        TinyLMConfig c = fixtures::tiny_lm_config(11, 8, 0, 1, 16);
        std::vector<TokenId> ids = random_ids(5, c.vocab_size, rng);
        std::vector<TokenId> targets = random_ids(5, c.vocab_size, rng);
        GradCheckResult r = gradient_check(c, 31, ids, targets, 8);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("backward: scale is exactly linear in the gradients") {
    TinyLMConfig c = fixtures::tiny_lm_config(11, 8, 2, 2, 16);
    TinyLMParams<double> p = init_params<double>(c, 37);
    Rng rng(38);
    std::vector<TokenId> ids = random_ids(9, c.vocab_size, rng);
    std::vector<TokenId> targets = random_ids(9, c.vocab_size, rng);
    ForwardCache<double> cache;
    forward(p, ids, &cache);

    TinyLMParams<double> g1 = zero_params<double>(c);
    TinyLMParams<double> g2 = zero_params<double>(c);
    const double l1 = loss_and_backward(p, cache, targets, g1, 1.0);
    const double l2 = loss_and_backward(p, cache, targets, g2, 2.0);
    CHECK(l1 == l2);  // reported loss is unscaled

    std::vector<const LmMat<double>*> t1, t2;
    for_each_tensor(g1, [&](const std::string&, LmMat<double>& m) { t1.push_back(&m); });
    for_each_tensor(g2, [&](const std::string&, LmMat<double>& m) { t2.push_back(&m); });
    double max_diff = 0.0;
    for (size_t i = 0; i < t1.size(); ++i) {
        max_diff = std::max(max_diff, (*t2[i] - 2.0 * *t1[i]).cwiseAbs().maxCoeff());
    }
    CHECK(max_diff == 0.0);
}

TEST_CASE("backward: gradient vanishes at a memorized distribution") {
    TinyLMParams<double> p = fixtures::successor_model(7, 8, 64);
    std::vector<TokenId> ids = fixtures::cyclic_ids(20, 7);
    std::span<const TokenId> inputs(ids.data(), ids.size() - 1);
    std::span<const TokenId> targets(ids.data() + 1, ids.size() - 1);
    ForwardCache<double> cache;
    forward(p, inputs, &cache);
    TinyLMParams<double> grads = zero_params<double>(p.config);
    const double loss = loss_and_backward(p, cache, targets, grads);
    CHECK(loss < 1e-12);
    CHECK(gradient_norm(grads) < 1e-8);
}

TEST_CASE("adamw: one step against hand arithmetic") {
    TinyLMConfig c = fixtures::tiny_lm_config(2, 2, 0, 1, 4);
    TinyLMParams<double> p = zero_params<double>(c);
    TinyLMParams<double> g = zero_params<double>(c);
    for_each_tensor(p, [](const std::string&, LmMat<double>& m) { m.setConstant(1.0); });
    for_each_tensor(g, [](const std::string&, LmMat<double>& m) { m.setConstant(0.5); });

    TrainConfig tc;
    tc.weight_decay = 0.1;
    AdamW<double> opt(c, tc);
    opt.step(p, g, 0.1);

    // After one step the bias corrections cancel: m_hat = g, v_hat = g^2.
    const double adam = 0.5 / (std::sqrt(0.25) + 1e-5);
    const double expect_decay = 1.0 - 0.1 * (adam + 0.1 * 1.0);
    const double expect_plain = 1.0 - 0.1 * adam;
    CHECK(p.embedding(0, 0) == doctest::Approx(expect_decay).epsilon(1e-14));
    CHECK(p.w_out(1, 1) == doctest::Approx(expect_decay).epsilon(1e-14));
    // 1 x N tensors (norms, biases) skip the decay term.
    CHECK(p.lnf_g(0, 0) == doctest::Approx(expect_plain).epsilon(1e-14));
    CHECK(p.lnf_b(0, 1) == doctest::Approx(expect_plain).epsilon(1e-14));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("gradient clipping: rescales only above the threshold") {
    TinyLMConfig c = fixtures::tiny_lm_config(2, 2, 0, 1, 4);
    TinyLMParams<double> g = zero_params<double>(c);
    g.embedding.setConstant(3.0);  // norm 6 over 4 entries
    CHECK(gradient_norm(g) == doctest::Approx(6.0).epsilon(1e-12));
    const double pre = clip_gradients(g, 1.0);
    CHECK(pre == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(gradient_norm(g) == doctest::Approx(1.0).epsilon(1e-12));

    TinyLMParams<double> small = zero_params<double>(c);
    small.embedding.setConstant(0.1);
    const LmMat<double> before = small.embedding;
    clip_gradients(small, 1.0);
    CHECK((small.embedding - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training windows: EOS-joined stream chopped without overlap") {
    std::vector<std::vector<TokenId>> docs = {{1, 2, 3}, {4, 5}};
    auto windows = make_training_windows(docs, 3, 0);
    // Stream: 1 2 3 0 4 5 0 -> [1 2 3 0] [4 5 0]
    REQUIRE(windows.size() == 2);
    CHECK(windows[0] == std::vector<TokenId>{1, 2, 3, 0});
    CHECK(windows[1] == std::vector<TokenId>{4, 5, 0});

    // A trailing singleton can't form a prediction and is dropped.
    auto tail = make_training_windows({{1, 2, 3, 4}}, 3, 0);
    REQUIRE(tail.size() == 1);
    CHECK(tail[0] == std::vector<TokenId>{1, 2, 3, 4});

    CHECK(make_training_windows({}, 3, 0).empty());
}

TEST_CASE("train: loss descends on a learnable pattern") {
    TinyLMConfig c = fixtures::tiny_lm_config(16, 16, 1, 2, 8);
    TinyLMParams<double> p = init_params<double>(c, 42);
    std::vector<std::vector<TokenId>> docs = {fixtures::cyclic_ids(62, 15, 1)};
    auto windows = make_training_windows(docs, c.context_len, 0);
    // 62 tokens + EOS = 63 = 7 windows of context_len + 1 = 9.
    REQUIRE(windows.size() == 7);

    TrainConfig tc;
    tc.lr = 1e-2;
    tc.warmup_steps = 4;
    tc.batch_size = 4;
    tc.accumulate_grad_batches = 2;
    tc.epochs = 30;
    TrainResult r = train_lm(p, windows, tc);
    CHECK(r.stop_reason == "epochs");
    CHECK(r.steps == 30);  // 7 windows -> 2 micro-batches -> 1 step/epoch
    REQUIRE(!r.curve.empty());
    CHECK(r.curve.front().loss > 2.0);  // ~ln(16) at init
    CHECK(r.curve.back().loss < r.curve.front().loss * 0.5);
    CHECK(r.tokens_seen == 30UL * 7UL * 8UL);  // 8 predictions per window
    for (const LossPoint& pt : r.curve) CHECK(std::isfinite(pt.loss));
}

TEST_CASE("train: deterministic given the seed, dropout included") {
    TinyLMConfig c = fixtures::tiny_lm_config(16, 8, 1, 2, 8);
    c.attn_dropout = c.ffn_dropout = c.residual_dropout = 0.1;
    std::vector<std::vector<TokenId>> docs = {fixtures::cyclic_ids(40, 16)};
    auto windows = make_training_windows(docs, c.context_len, 0);

    TrainConfig tc;
    tc.lr = 5e-3;
    tc.warmup_steps = 2;
    tc.batch_size = 2;
    tc.accumulate_grad_batches = 1;
    tc.epochs = 4;

    TinyLMParams<double> p1 = init_params<double>(c, 1);
    TinyLMParams<double> p2 = init_params<double>(c, 1);
    TrainResult r1 = train_lm(p1, windows, tc);
    TrainResult r2 = train_lm(p2, windows, tc);
    REQUIRE(r1.curve.size() == r2.curve.size());
    for (size_t i = 0; i < r1.curve.size(); ++i) {
        CHECK(r1.curve[i].loss == r2.curve[i].loss);
        CHECK(r1.curve[i].lr == r2.curve[i].lr);
    }
    CHECK((p1.embedding - p2.embedding).cwiseAbs().maxCoeff() == 0.0);

    tc.seed = 43;
    TinyLMParams<double> p3 = init_params<double>(c, 1);
    TrainResult r3 = train_lm(p3, windows, tc);
    CHECK(r3.curve.back().loss != r1.curve.back().loss);
}

TEST_CASE("train: token budget and max_steps stop early") {
    TinyLMConfig c = fixtures::tiny_lm_config(16, 8, 1, 2, 8);
    std::vector<std::vector<TokenId>> docs = {fixtures::cyclic_ids(80, 16)};
    auto windows = make_training_windows(docs, c.context_len, 0);
    TrainConfig tc;
    tc.batch_size = 1;
    tc.accumulate_grad_batches = 1;
    tc.epochs = 10;

    TrainConfig budget = tc;
    budget.token_budget = 30;
    TinyLMParams<double> p = init_params<double>(c, 2);
    TrainResult r = train_lm(p, windows, budget);
    CHECK(r.stop_reason == "token_budget");
    CHECK(r.tokens_seen >= 30);
    CHECK(r.tokens_seen < 60);

    TrainConfig stepped = tc;
    stepped.max_steps = 3;
    TinyLMParams<double> q = init_params<double>(c, 2);
    TrainResult rs = train_lm(q, windows, stepped);
    CHECK(rs.stop_reason == "max_steps");
    CHECK(rs.steps == 3);

    CHECK_THROWS_AS(train_lm(q, {}, tc), Error);
}

TEST_CASE("train: loss curve file round-trips through CSV text") {
    std::vector<LossPoint> curve = {{1, 63, 2.5, 6e-4}, {2, 126, 2.25, 5.5e-4}};
    auto path = temp_file("curve.csv");
    save_loss_curve(curve, path.string());
    std::ifstream in(path);
    std::string header, l1, l2;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(header == "step,tokens_seen,loss,lr");
    CHECK(l1 == "1,63,2.5,0.0006");
    CHECK(l2 == "2,126,2.25,0.00055");
}

TEST_CASE("generate: greedy decoding follows the successor model") {
    TinyLMParams<double> p = fixtures::successor_model(7, 8, 64);
    std::vector<TokenId> prefix = {0};
    auto out = generate(p, prefix, 10);
    CHECK(out == fixtures::cyclic_ids(11, 7));

    // Stop ids end generation and are kept in the output.
    auto stopped = generate(p, prefix, 10, {3});
    CHECK(stopped == fixtures::cyclic_ids(4, 7));

    // Window sliding: the context is 4 tokens but generation runs past it.
    TinyLMParams<double> narrow = fixtures::successor_model(7, 8, 4);
    auto slid = generate(narrow, prefix, 12);
    CHECK(slid == fixtures::cyclic_ids(13, 7));

    CHECK_THROWS_AS(generate(p, std::span<const TokenId>{}, 3), Error);
    std::vector<TokenId> too_long(p.config.context_len + 1, 0);
    CHECK_THROWS_AS(generate(p, too_long, 1), Error);
    CHECK(generate(p, prefix, 0) == prefix);
}

TEST_CASE("generate: argmax ties resolve to the lowest id") {
    TinyLMConfig c = fixtures::tiny_lm_config(5, 8, 0, 1, 8);
    TinyLMParams<double> p = zero_params<double>(c);  // all logits equal
    std::vector<TokenId> prefix = {4};
    auto out = generate(p, prefix, 2);
    CHECK(out == std::vector<TokenId>{4, 0, 0});
}

TEST_CASE("checkpoint: parameters and metadata survive a round trip") {
    TinyLMConfig c = fixtures::tiny_lm_config(11, 8, 2, 2, 16);
    TinyLMParams<double> p = init_params<double>(c, 44);
    CheckpointMeta meta;
    meta.config = c;
    meta.seed = 44;
    meta.step = 17;
    meta.tokens_seen = 4242;

    auto path = temp_file("model.ckpt");
    save_checkpoint(path.string(), p, meta);

    TinyLMParams<double> q;
    CheckpointMeta loaded = load_checkpoint(path.string(), q);
    CHECK(loaded.seed == 44);
    CHECK(loaded.step == 17);
    CHECK(loaded.tokens_seen == 4242);
    CHECK(loaded.config.vocab_size == c.vocab_size);
    CHECK(loaded.config.num_blocks == c.num_blocks);

    std::vector<const LmMat<double>*> tp, tq;
    for_each_tensor(p, [&](const std::string&, LmMat<double>& m) { tp.push_back(&m); });
    for_each_tensor(q, [&](const std::string&, LmMat<double>& m) { tq.push_back(&m); });
    REQUIRE(tp.size() == tq.size());
    for (size_t i = 0; i < tp.size(); ++i) {
        CHECK((*tp[i] - *tq[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("checkpoint: optimizer moments reload bit-exact") {
    TinyLMConfig c = fixtures::tiny_lm_config(11, 8, 1, 2, 16);
    TinyLMParams<double> p = init_params<double>(c, 45);
    TrainConfig tc;
    AdamW<double> opt(c, tc);
    TinyLMParams<double> g = zero_params<double>(c);
    Rng rng(46);
    for_each_tensor(g, [&](const std::string&, LmMat<double>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index cc = 0; cc < m.cols(); ++cc) m(r, cc) = rng.next_gaussian();
        }
    });
    opt.step(p, g, 1e-3);
    opt.step(p, g, 1e-3);

    CheckpointMeta meta;
    meta.config = c;
    auto path = temp_file("model_opt.ckpt");
    save_checkpoint(path.string(), p, meta, &opt);

    TinyLMParams<double> q;
    AdamW<double> opt2(c, tc);
    load_checkpoint(path.string(), q, &opt2);
    CHECK(opt2.step_count() == 2);
    CHECK((opt2.first_moment().embedding - opt.first_moment().embedding)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((opt2.second_moment().w_out - opt.second_moment().w_out)
              .cwiseAbs()
              .maxCoeff() == 0.0);

    // Loading optimizer state from a plain checkpoint fails loudly.
    auto plain = temp_file("model_plain.ckpt");
    save_checkpoint(plain.string(), p, meta);
    AdamW<double> opt3(c, tc);
    CHECK_THROWS_AS(load_checkpoint(plain.string(), q, &opt3), Error);
}

TEST_CASE("checkpoint: corrupt files are rejected") {
    auto path = temp_file("bad.ckpt");
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all";
    }
    TinyLMParams<double> q;
    CHECK_THROWS_AS(load_checkpoint(path.string(), q), Error);
    TinyLMParams<double> q2;
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/path.ckpt", q2), Error);
}
