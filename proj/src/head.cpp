#include "ecgformer/head.hpp"

#include <cmath>

namespace ecgformer {

template <class T>
GatedParams<T> GatedParams<T>::init(size_t width, size_t classes, size_t leads,
                                    bool per_lead_gate, std::mt19937& rng) {
    if (width < 1 || classes < 1 || leads < 1)
        throw ConfigError("head: width, classes, and leads must be >= 1");
    GatedParams<T> p;
    p.per_lead = per_lead_gate;
    const double std = std::sqrt(1.0 / width);
    const size_t copies = per_lead_gate ? leads : 1;
    for (size_t c = 0; c < copies; ++c) {
        p.wq.push_back(Tensor<T>::randn({width, width}, rng, std, true));
        p.bq.push_back(Tensor<T>::zeros({width}, true));
        p.wk.push_back(Tensor<T>::randn({width, width}, rng, std, true));
        p.bk.push_back(Tensor<T>::zeros({width}, true));
    }
    p.proj_w = Tensor<T>::randn({width, classes}, rng, std, true);
    p.proj_b = Tensor<T>::zeros({classes}, true);
    p.cls_w = Tensor<T>::randn({classes, width}, rng, std, true);
    p.cls_b = Tensor<T>::zeros({classes}, true);
    p.pool_w = Tensor<T>::randn({width, classes}, rng, std, true);
    p.pool_b = Tensor<T>::zeros({classes}, true);
    return p;
}

namespace {

// Affine along S, either shared across leads or per lead.
template <class T>
Tensor<T> lead_affine(const Tensor<T>& x, const std::vector<Tensor<T>>& w,
                      const std::vector<Tensor<T>>& b) {
    if (w.size() == 1) return add(matmul(x, w[0]), b[0]);
    const size_t B = x.dim(0), C = x.dim(1), S = x.dim(2);
    if (w.size() != C)
        throw ShapeError("per-lead affine has " + std::to_string(w.size()) +
                         " weight sets for " + std::to_string(C) + " leads");
    std::vector<Tensor<T>> rows;
    rows.reserve(C);
    for (size_t c = 0; c < C; ++c) {
        Tensor<T> one = reshape(slice(x, 1, c, 1), {B, S});
        rows.push_back(reshape(add(matmul(one, w[c]), b[c]), {B, 1, S}));
    }
    return concat(rows, 1);
}

}  // namespace

template <class T>
Tensor<T> gated_attention(const Tensor<T>& x, const GatedParams<T>& p) {
    if (x.rank() != 3)
        throw ShapeError("gated head expects [B, C, S], got " +
                         shape_str(x.shape()));
    Tensor<T> q = tanh(lead_affine(x, p.wq, p.bq));
    Tensor<T> k = sigmoid(lead_affine(x, p.wk, p.bk));
    return mul(q, k);
}

template <class T>
GatedOutput<T> gated_logits(const Tensor<T>& x, const Tensor<T>& a,
                            const GatedParams<T>& p) {
    Tensor<T> ap = add(matmul(a, p.proj_w), p.proj_b);     // [B, C, N]
    Tensor<T> a2 = softmax_lastdim(transpose(ap, {0, 2, 1}));  // [B, N, C]
    Tensor<T> v = matmul(a2, x);                           // [B, N, S]
    Tensor<T> logits = add(sum_axis(mul(v, p.cls_w), 2), p.cls_b);
    return GatedOutput<T>{logits, a2};
}

template <class T>
Tensor<T> pooled_head(const Tensor<T>& x, const GatedParams<T>& p) {
    if (x.rank() != 3)
        throw ShapeError("pooled head expects [B, C, S], got " +
                         shape_str(x.shape()));
    return add(matmul(mean_axis(x, 1), p.pool_w), p.pool_b);
}

#define ECGFORMER_INSTANTIATE(T)                                             \
    template struct GatedParams<T>;                                         \
    template Tensor<T> gated_attention(const Tensor<T>&,                    \
                                       const GatedParams<T>&);              \
    template GatedOutput<T> gated_logits(const Tensor<T>&, const Tensor<T>&, \
                                         const GatedParams<T>&);            \
    template Tensor<T> pooled_head(const Tensor<T>&, const GatedParams<T>&);
ECGFORMER_INSTANTIATE(float)
ECGFORMER_INSTANTIATE(double)
#undef ECGFORMER_INSTANTIATE

}  // namespace ecgformer
