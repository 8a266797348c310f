#include "ecgformer/transformer.hpp"

#include <cmath>

namespace ecgformer {

void StageConfig::validate() const {
    if (dim < 1 || heads < 1) throw ConfigError("stage: dim and heads must be >= 1");
    if (dim % heads != 0)
        throw ConfigError("stage: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(heads));
    if (attn == AttnKind::kDifferential && (dim / heads) % 2 != 0)
        throw ConfigError("stage: differential attention needs an even head "
                          "dimension, got " + std::to_string(dim / heads));
    if (mlp_ratio < 1) throw ConfigError("stage: mlp_ratio must be >= 1");
    if (!(ln_eps > 0)) throw ConfigError("stage: ln_eps must be positive");
}

namespace {

template <class T>
LayerParams<T> init_layer(const StageConfig& cfg, std::mt19937& rng) {
    const size_t D = cfg.dim, M = cfg.mlp_ratio * cfg.dim;
    const double std_attn = std::sqrt(1.0 / D);
    LayerParams<T> p;
    p.ln1_g = Tensor<T>::full({D}, T(1), true);
    p.ln1_b = Tensor<T>::zeros({D}, true);
    p.wq = Tensor<T>::randn({D, D}, rng, std_attn, true);
    p.bq = Tensor<T>::zeros({D}, true);
    p.wk = Tensor<T>::randn({D, D}, rng, std_attn, true);
    p.bk = Tensor<T>::zeros({D}, true);
    p.wv = Tensor<T>::randn({D, D}, rng, std_attn, true);
    p.bv = Tensor<T>::zeros({D}, true);
    p.wo = Tensor<T>::randn({D, D}, rng, std_attn, true);
    p.bo = Tensor<T>::zeros({D}, true);
    if (cfg.attn == AttnKind::kDifferential)
        p.lambda = Tensor<T>::full({1}, static_cast<T>(cfg.lambda_init), true);
    p.ln2_g = Tensor<T>::full({D}, T(1), true);
    p.ln2_b = Tensor<T>::zeros({D}, true);
    p.mlp_w1 = Tensor<T>::randn({D, M}, rng, std_attn, true);
    p.mlp_b1 = Tensor<T>::zeros({M}, true);
    p.mlp_w2 = Tensor<T>::randn({M, D}, rng, std::sqrt(1.0 / M), true);
    p.mlp_b2 = Tensor<T>::zeros({D}, true);
    return p;
}

// [B', T', D] -> [B', H, T', dh]
template <class T>
Tensor<T> split_heads(const Tensor<T>& x, size_t H, size_t dh) {
    const size_t Bp = x.dim(0), Tn = x.dim(1);
    return transpose(reshape(x, {Bp, Tn, H, dh}), {0, 2, 1, 3});
}

// [B', H, T', dh] -> [B', T', D]
template <class T>
Tensor<T> merge_heads(const Tensor<T>& x) {
    const size_t Bp = x.dim(0), H = x.dim(1), Tn = x.dim(2), dh = x.dim(3);
    return reshape(transpose(x, {0, 2, 1, 3}), {Bp, Tn, H * dh});
}

template <class T>
void capture(const Tensor<T>& attn, AttnMap* record) {
    if (!record) return;
    record->shape = attn.shape();
    record->values.assign(attn.values().begin(), attn.values().end());
}

template <class T>
Tensor<T> attend(const Tensor<T>& q, const Tensor<T>& k, double scale) {
    return softmax_lastdim(
        ecgformer::scale(matmul(q, transpose(k, {0, 1, 3, 2})), scale));
}

}  // namespace

template <class T>
Tensor<T> msa_standard(const Tensor<T>& tokens, const LayerParams<T>& p,
                       const StageConfig& cfg, AttnMap* record) {
    const size_t H = cfg.heads, dh = cfg.head_dim();
    Tensor<T> q = split_heads(add(matmul(tokens, p.wq), p.bq), H, dh);
    Tensor<T> k = split_heads(add(matmul(tokens, p.wk), p.bk), H, dh);
    Tensor<T> v = split_heads(add(matmul(tokens, p.wv), p.bv), H, dh);
    Tensor<T> attn = attend(q, k, 1.0 / std::sqrt(static_cast<double>(dh)));
    capture(attn, record);
    return add(matmul(merge_heads(matmul(attn, v)), p.wo), p.bo);
}

template <class T>
Tensor<T> msa_differential(const Tensor<T>& tokens, const LayerParams<T>& p,
                           const StageConfig& cfg, AttnMap* record) {
    const size_t H = cfg.heads, dh = cfg.head_dim(), half = dh / 2;
    Tensor<T> q = split_heads(add(matmul(tokens, p.wq), p.bq), H, dh);
    Tensor<T> k = split_heads(add(matmul(tokens, p.wk), p.bk), H, dh);
    Tensor<T> v = split_heads(add(matmul(tokens, p.wv), p.bv), H, dh);
    const double scale = 1.0 / std::sqrt(static_cast<double>(half));
    Tensor<T> a1 = attend(slice(q, 3, 0, half), slice(k, 3, 0, half), scale);
    Tensor<T> a2 = attend(slice(q, 3, half, half), slice(k, 3, half, half), scale);
    Tensor<T> attn = sub(a1, mul(a2, p.lambda));
    capture(attn, record);
    Tensor<T> out = matmul(attn, v);
    if (cfg.diff_head_norm) {
        // Source-style stabilization: normalize each head's output and scale
        // by (1 - lambda_init); gain/shift are fixed, not learned.
        out = layer_norm(out, Tensor<T>::full({out.dim(3)}, T(1)),
                         Tensor<T>::zeros({out.dim(3)}), cfg.ln_eps);
        out = ecgformer::scale(out, 1.0 - cfg.lambda_init);
    }
    return add(matmul(merge_heads(out), p.wo), p.bo);
}

template <class T>
StageOutput<T> transformer_stage(const ContextualTokens<T>& ctx,
                                 const Tensor<T>& cls_in,
                                 const StageParams<T>& params,
                                 const StageConfig& cfg, size_t stage,
                                 AttnRecord* record) {
    cfg.validate();
    if (ctx.tokens.dim(2) != cfg.dim)
        throw ShapeError("stage tokens must have width " + std::to_string(cfg.dim) +
                         ", got " + shape_str(ctx.tokens.shape()));
    if (cls_in.rank() != 3 || cls_in.dim(1) != 1 || cls_in.dim(2) != cfg.dim)
        throw ShapeError("exactly one CLS token crosses a stage boundary, got " +
                         shape_str(cls_in.shape()));

    const size_t N = ctx.spatial;
    Tensor<T> tokens = ctx.tokens;
    if (cfg.pos_embed) {
        if (params.pos.dim(0) < N + 1)
            throw ConfigError("positional table holds " +
                              std::to_string(params.pos.dim(0)) +
                              " rows, stage needs " + std::to_string(N + 1));
        // Row 0 is the CLS slot; the CLS token carries its own learnable
        // content, so only rows 1..N are added and the CLS crosses stage
        // boundaries unmodified when a stage has no layers.
        tokens = add(tokens, slice(params.pos, 0, 1, N));
    }
    Tensor<T> x = concat(cls_in, tokens, 1);  // [B*C, N+1, D]

    for (const LayerParams<T>& layer : params.layers) {
        AttnMap captured;
        AttnMap* cap = record ? &captured : nullptr;
        Tensor<T> normed = layer_norm(x, layer.ln1_g, layer.ln1_b, cfg.ln_eps);
        Tensor<T> attn_out = cfg.attn == AttnKind::kDifferential
                                 ? msa_differential(normed, layer, cfg, cap)
                                 : msa_standard(normed, layer, cfg, cap);
        if (record) record->stages[stage].push_back(std::move(captured));
        x = add(x, attn_out);
        Tensor<T> h = layer_norm(x, layer.ln2_g, layer.ln2_b, cfg.ln_eps);
        h = add(matmul(gelu(add(matmul(h, layer.mlp_w1), layer.mlp_b1)),
                       layer.mlp_w2),
                layer.mlp_b2);
        x = add(x, h);
    }
    return StageOutput<T>{x, slice(x, 1, 0, 1)};
}

template <class T>
TransformerParams<T> TransformerParams<T>::init(
    const StageConfig& cfg, size_t leads,
    const std::array<size_t, kStages>& tap_lengths, std::mt19937& rng) {
    cfg.validate();
    TransformerParams<T> p;
    p.cls = Tensor<T>::randn({cfg.per_lead_cls ? leads : 1, cfg.dim}, rng, 0.02,
                             true);
    for (size_t s = 0; s < kStages; ++s) {
        p.stages[s].pos =
            Tensor<T>::randn({tap_lengths[s] + 1, cfg.dim}, rng, 0.02, true);
        for (size_t l = 0; l < cfg.layers[s]; ++l)
            p.stages[s].layers.push_back(init_layer<T>(cfg, rng));
    }
    return p;
}

template <class T>
Tensor<T> run_three_stages(const std::array<ContextualTokens<T>, kStages>& taps,
                           const TransformerParams<T>& params,
                           const StageConfig& cfg, AttnRecord* record) {
    const size_t B = taps[0].batch, C = taps[0].leads, D = cfg.dim;
    for (size_t s = 1; s < kStages; ++s)
        if (taps[s].spatial >= taps[s - 1].spatial)
            throw ConfigError("stage token counts must strictly decrease");

    // Broadcast the learnable CLS parameter to every lead-sequence.
    Tensor<T> cls;
    if (cfg.per_lead_cls) {
        Tensor<T> one = reshape(params.cls, {C, 1, D});
        cls = B == 1 ? one : concat(std::vector<Tensor<T>>(B, one), 0);
    } else {
        cls = add(Tensor<T>::zeros({B * C, 1, D}), params.cls);
    }

    for (size_t s = 0; s < kStages; ++s)
        cls = transformer_stage(taps[s], cls, params.stages[s], cfg, s, record)
                  .cls_out;
    return reshape(cls, {B, C, D});
}

template struct TransformerParams<float>;
template struct TransformerParams<double>;
#define ECGFORMER_INSTANTIATE(T)                                              \
    template Tensor<T> msa_standard(const Tensor<T>&, const LayerParams<T>&, \
                                    const StageConfig&, AttnMap*);           \
    template Tensor<T> msa_differential(const Tensor<T>&,                    \
                                        const LayerParams<T>&,               \
                                        const StageConfig&, AttnMap*);       \
    template StageOutput<T> transformer_stage(                               \
        const ContextualTokens<T>&, const Tensor<T>&, const StageParams<T>&, \
        const StageConfig&, size_t, AttnRecord*);                            \
    template Tensor<T> run_three_stages(                                     \
        const std::array<ContextualTokens<T>, kStages>&,                     \
        const TransformerParams<T>&, const StageConfig&, AttnRecord*);
ECGFORMER_INSTANTIATE(float)
ECGFORMER_INSTANTIATE(double)
#undef ECGFORMER_INSTANTIATE

}  // namespace ecgformer
