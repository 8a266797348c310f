#include <doctest.h>

#include <cmath>

#include "ecgformer/gradcheck.hpp"
#include "ecgformer/head.hpp"
#include "ecgformer/rng.hpp"

using namespace ecgformer;

namespace {

using Td = Tensor<double>;

GatedParams<double> make_params(size_t S, size_t N, size_t C, bool per_lead,
                                uint64_t seed) {
    std::mt19937 rng = derive_rng(seed, "head");
    auto p = GatedParams<double>::init(S, N, C, per_lead, rng);
    // init zeroes the biases; give every parameter signal for the tests.
    for (auto* t : {&p.proj_b, &p.cls_b, &p.pool_b})
        for (auto& v : t->values()) v = rng_gauss(rng) * 0.3;
    for (size_t i = 0; i < p.bq.size(); ++i)
        for (size_t j = 0; j < p.bq[i].numel(); ++j) {
            p.bq[i].values()[j] = rng_gauss(rng) * 0.3;
            p.bk[i].values()[j] = rng_gauss(rng) * 0.3;
        }
    return p;
}

}  // namespace

TEST_CASE("zero query weights kill the gate") {
    auto p = make_params(6, 3, 4, false, 11);
    for (auto& v : p.wq[0].values()) v = 0;
    for (auto& v : p.bq[0].values()) v = 0;
    std::mt19937 rng = derive_rng(11, "x");
    const Td x = Td::randn({2, 4, 6}, rng);
    const Td a = gated_attention(x, p);
    for (double v : a.values()) CHECK(v == 0.0);
}

TEST_CASE("zero key weights halve the query gate") {
    auto p = make_params(6, 3, 4, false, 13);
    for (auto& v : p.wk[0].values()) v = 0;
    for (auto& v : p.bk[0].values()) v = 0;
    std::mt19937 rng = derive_rng(13, "x");
    const Td x = Td::randn({2, 4, 6}, rng);
    const Td a = gated_attention(x, p);
    const Td q = tanh(add(matmul(x, p.wq[0]), p.bq[0]));
    for (size_t i = 0; i < a.numel(); ++i)
        CHECK(a.values()[i] == doctest::Approx(0.5 * q.values()[i]).epsilon(1e-12));
}

TEST_CASE("gate activations stay inside (-1, 1)") {
    auto p = make_params(8, 2, 3, false, 17);
    std::mt19937 rng = derive_rng(17, "x");
    const Td x = Td::randn({4, 3, 8}, rng, 3.0);
    const Td a = gated_attention(x, p);
    for (double v : a.values()) CHECK(std::abs(v) < 1.0);
}

TEST_CASE("single lead: attention collapses to 1 and logits are affine") {
    auto p = make_params(5, 3, 1, false, 19);
    std::mt19937 rng = derive_rng(19, "x");
    const Td x = Td::randn({2, 1, 5}, rng);
    const auto out = gated_logits(x, gated_attention(x, p), p);
    CHECK(out.lead_attn.shape() == Shape{2, 3, 1});
    for (double v : out.lead_attn.values()) CHECK(v == 1.0);
    for (size_t b = 0; b < 2; ++b)
        for (size_t i = 0; i < 3; ++i) {
            double want = p.cls_b.values()[i];
            for (size_t s = 0; s < 5; ++s)
                want += x.values()[b * 5 + s] * p.cls_w.values()[i * 5 + s];
            CHECK(out.logits.values()[b * 3 + i] ==
                  doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("zero projection gives uniform lead weights and mean pooling") {
    const size_t B = 2, C = 4, S = 6, N = 3;
    auto p = make_params(S, N, C, false, 23);
    for (auto& v : p.proj_w.values()) v = 0;
    for (auto& v : p.proj_b.values()) v = 0;
    std::mt19937 rng = derive_rng(23, "x");
    const Td x = Td::randn({B, C, S}, rng);
    const auto out = gated_logits(x, gated_attention(x, p), p);

    for (double v : out.lead_attn.values())
        CHECK(v == doctest::Approx(1.0 / C).epsilon(1e-12));
    for (size_t b = 0; b < B; ++b)
        for (size_t i = 0; i < N; ++i) {
            double want = p.cls_b.values()[i];
            for (size_t s = 0; s < S; ++s) {
                double m = 0;
                for (size_t c = 0; c < C; ++c) m += x.values()[(b * C + c) * S + s];
                want += (m / C) * p.cls_w.values()[i * S + s];
            }
            CHECK(out.logits.values()[b * N + i] ==
                  doctest::Approx(want).epsilon(1e-10));
        }
}

TEST_CASE("zero projection ties the gated head to a pooled baseline") {
    const size_t C = 4, S = 6, N = 3;
    auto p = make_params(S, N, C, false, 29);
    for (auto& v : p.proj_w.values()) v = 0;
    for (auto& v : p.proj_b.values()) v = 0;
    for (size_t i = 0; i < N; ++i) {
        p.cls_b.values()[i] = p.pool_b.values()[i];
        for (size_t s = 0; s < S; ++s)
            p.cls_w.values()[i * S + s] = p.pool_w.values()[s * N + i];
    }
    std::mt19937 rng = derive_rng(29, "x");
    const Td x = Td::randn({2, C, S}, rng);
    const Td gated = gated_logits(x, gated_attention(x, p), p).logits;
    const Td pooled = pooled_head(x, p);
    for (size_t i = 0; i < gated.numel(); ++i)
        CHECK(gated.values()[i] ==
              doctest::Approx(pooled.values()[i]).epsilon(1e-12));
}

TEST_CASE("lead weights are a distribution and the head is differentiable") {
    const size_t B = 2, C = 12, S = 16, N = 3;
    std::mt19937 rng = derive_rng(31, "grad");
    auto p = GatedParams<double>::init(S, N, C, false, rng);
    Td x = Td::randn({B, C, S}, rng, 0.5);
    x.set_requires_grad(true);

    const auto out = gated_logits(x, gated_attention(x, p), p);
    CHECK(out.lead_attn.shape() == Shape{B, N, C});
    for (size_t row = 0; row < B * N; ++row) {
        double s = 0;
        for (size_t c = 0; c < C; ++c) s += out.lead_attn.values()[row * C + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }

    const Td r = Td::randn({B, N}, rng);
    auto f = [&] {
        return sum_all(mul(gated_logits(x, gated_attention(x, p), p).logits, r));
    };
    // Small step: the gate/softmax/pooling chain is truncation-limited at
    // h=1e-5, and coordinates below the noise floor are skipped.
    const double err = finite_diff_check<double>(
        f,
        {x, p.wq[0], p.bq[0], p.wk[0], p.bk[0], p.proj_w, p.proj_b, p.cls_w,
         p.cls_b},
        1e-6, rng, 12, 1e-4);
    CHECK(err < 1e-5);
}

TEST_CASE("per-lead gates act on their own lead only") {
    const size_t C = 3, S = 5;
    auto p = make_params(S, 2, C, true, 37);
    CHECK(p.wq.size() == C);
    std::mt19937 rng = derive_rng(37, "x");
    const Td x = Td::randn({2, C, S}, rng);
    const Td a = gated_attention(x, p);

    auto p2 = p;
    p2.wq[1] = Td::from(p.wq[1].shape(), p.wq[1].values());
    for (auto& v : p2.wq[1].values()) v += 0.25;
    const Td a2 = gated_attention(x, p2);
    for (size_t b = 0; b < 2; ++b)
        for (size_t c = 0; c < C; ++c) {
            bool equal = true;
            for (size_t s = 0; s < S; ++s)
                equal = equal && a.values()[(b * C + c) * S + s] ==
                                     a2.values()[(b * C + c) * S + s];
            CHECK(equal == (c != 1));
        }

    auto bad = make_params(S, 2, C + 1, true, 37);
    CHECK_THROWS_AS(gated_attention(x, bad), ShapeError);
}

TEST_CASE("pooled head: mean over leads then affine") {
    const size_t S = 6, N = 3;
    auto p = make_params(S, N, 4, false, 41);
    std::mt19937 rng = derive_rng(41, "x");

    const Td one = Td::randn({1, 1, S}, rng);
    Td rep = Td::zeros({1, 4, S});
    for (size_t c = 0; c < 4; ++c)
        for (size_t s = 0; s < S; ++s)
            rep.values()[c * S + s] = one.values()[s];
    const Td a = pooled_head(rep, p);
    const Td b = pooled_head(one, p);
    for (size_t i = 0; i < N; ++i)
        CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-12));

    for (auto& v : p.pool_w.values()) v = 0;
    const Td z = pooled_head(rep, p);
    for (size_t i = 0; i < N; ++i) CHECK(z.values()[i] == p.pool_b.values()[i]);

    auto pg = make_params(S, N, 4, false, 43);
    Td x = Td::randn({2, 4, S}, rng, 0.5);
    x.set_requires_grad(true);
    const Td r = Td::randn({2, N}, rng);
    auto f = [&] { return sum_all(mul(pooled_head(x, pg), r)); };
    const double err =
        finite_diff_check<double>(f, {x, pg.pool_w, pg.pool_b}, 1e-5, rng);
    CHECK(err < 1e-5);
}

TEST_CASE("lead permutation permutes attention and preserves logits") {
    const size_t B = 2, C = 5, S = 7, N = 3;
    auto p = make_params(S, N, C, false, 47);
    std::mt19937 rng = derive_rng(47, "x");
    const Td x = Td::randn({B, C, S}, rng);
    const auto base = gated_logits(x, gated_attention(x, p), p);

    const std::array<size_t, 5> perm{3, 0, 4, 1, 2};
    Td px = Td::zeros({B, C, S});
    for (size_t b = 0; b < B; ++b)
        for (size_t c = 0; c < C; ++c)
            for (size_t s = 0; s < S; ++s)
                px.values()[(b * C + c) * S + s] =
                    x.values()[(b * C + perm[c]) * S + s];
    const auto moved = gated_logits(px, gated_attention(px, p), p);

    for (size_t b = 0; b < B; ++b)
        for (size_t i = 0; i < N; ++i)
            for (size_t c = 0; c < C; ++c)
                CHECK(moved.lead_attn.values()[(b * N + i) * C + c] ==
                      doctest::Approx(
                          base.lead_attn.values()[(b * N + i) * C + perm[c]])
                          .epsilon(1e-12));
    for (size_t i = 0; i < base.logits.numel(); ++i)
        CHECK(std::abs(moved.logits.values()[i] - base.logits.values()[i]) <=
              1e-12);
}
