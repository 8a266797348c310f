#pragma once

// Classification heads over the per-lead representation x in [B, C, S].
// The gated head computes q = tanh(Wq x + bq), k = sigmoid(Wk x + bk),
// a = q (*) k, projects a to per-class scores, softmaxes across leads, and
// pools x with those weights before N per-class linear classifiers. The
// pooled head is the plain mean-over-leads + affine baseline.

#include <random>
#include <vector>

#include "ecgformer/tensor.hpp"

namespace ecgformer {

template <class T>
struct GatedParams {
    // One affine per lead when per_lead_gate is set, otherwise a single
    // shared pair (vectors of length 1).
    std::vector<Tensor<T>> wq, bq, wk, bk;  // [S, S], [S]
    Tensor<T> proj_w;                       // [S, N]
    Tensor<T> proj_b;                       // [N]
    Tensor<T> cls_w;                        // [N, S], row i is classifier W_i
    Tensor<T> cls_b;                        // [N]
    // Pooled head (the "no gated attention" variant).
    Tensor<T> pool_w;  // [S, N]
    Tensor<T> pool_b;  // [N]
    bool per_lead = false;

    static GatedParams init(size_t width, size_t classes, size_t leads,
                            bool per_lead_gate, std::mt19937& rng);
};

template <class T>
Tensor<T> gated_attention(const Tensor<T>& x, const GatedParams<T>& p);

template <class T>
struct GatedOutput {
    Tensor<T> logits;     // [B, N]
    Tensor<T> lead_attn;  // [B, N, C], rows are distributions over leads
};

template <class T>
GatedOutput<T> gated_logits(const Tensor<T>& x, const Tensor<T>& a,
                            const GatedParams<T>& p);

template <class T>
Tensor<T> pooled_head(const Tensor<T>& x, const GatedParams<T>& p);

}  // namespace ecgformer
