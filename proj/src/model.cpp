#include "ecgformer/model.hpp"

namespace ecgformer {

void ModelConfig::validate() const {
    enc.validate();
    stage.validate();
    if (n_classes < 1) throw ConfigError("model: n_classes must be >= 1");
    if (input_len < 1) throw ConfigError("model: input_len must be >= 1");
    if (enc.multipliers.back() != stage.dim)
        throw ConfigError("model: final encoder multiplier " +
                          std::to_string(enc.multipliers.back()) +
                          " must equal the transformer width " +
                          std::to_string(stage.dim));
    enc.tap_lengths(input_len);  // token counts exist and strictly decrease
}

template <class T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& cfg, std::mt19937& rng) {
    cfg.validate();
    ModelParams<T> p;
    p.enc = EncoderParams<T>::init(cfg.enc, cfg.stage.dim, rng);
    p.tf = TransformerParams<T>::init(cfg.stage, cfg.enc.leads,
                                      cfg.enc.tap_lengths(cfg.input_len), rng);
    p.head = GatedParams<T>::init(cfg.head_width(), cfg.n_classes,
                                  cfg.enc.leads, cfg.per_lead_gate, rng);
    return p;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> ModelParams<T>::named() {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    auto put = [&out](std::string name, const Tensor<T>& t) {
        out.emplace_back(std::move(name), t);
    };
    for (size_t l = 0; l < enc.kernels.size(); ++l) {
        put("enc.conv" + std::to_string(l) + ".w", enc.kernels[l]);
        put("enc.conv" + std::to_string(l) + ".b", enc.biases[l]);
    }
    for (size_t s = 0; s < enc.proj_w.size(); ++s)
        for (size_t c = 0; c < enc.proj_w[s].size(); ++c) {
            const std::string tag = "enc.proj" + std::to_string(s) +
                                    (enc.proj_w[s].size() > 1
                                         ? ".lead" + std::to_string(c)
                                         : "");
            put(tag + ".w", enc.proj_w[s][c]);
            put(tag + ".b", enc.proj_b[s][c]);
        }
    put("tf.cls", tf.cls);
    for (size_t s = 0; s < kStages; ++s) {
        const std::string sp = "tf.stage" + std::to_string(s);
        put(sp + ".pos", tf.stages[s].pos);
        for (size_t l = 0; l < tf.stages[s].layers.size(); ++l) {
            LayerParams<T>& lp = tf.stages[s].layers[l];
            const std::string b = sp + ".layer" + std::to_string(l);
            put(b + ".ln1.g", lp.ln1_g);
            put(b + ".ln1.b", lp.ln1_b);
            put(b + ".wq", lp.wq);
            put(b + ".bq", lp.bq);
            put(b + ".wk", lp.wk);
            put(b + ".bk", lp.bk);
            put(b + ".wv", lp.wv);
            put(b + ".bv", lp.bv);
            put(b + ".wo", lp.wo);
            put(b + ".bo", lp.bo);
            if (lp.lambda.rank() == 1) put(b + ".lambda", lp.lambda);
            put(b + ".ln2.g", lp.ln2_g);
            put(b + ".ln2.b", lp.ln2_b);
            put(b + ".mlp.w1", lp.mlp_w1);
            put(b + ".mlp.b1", lp.mlp_b1);
            put(b + ".mlp.w2", lp.mlp_w2);
            put(b + ".mlp.b2", lp.mlp_b2);
        }
    }
    for (size_t c = 0; c < head.wq.size(); ++c) {
        const std::string tag =
            "head" + (head.wq.size() > 1 ? ".lead" + std::to_string(c) : "");
        put(tag + ".wq", head.wq[c]);
        put(tag + ".bq", head.bq[c]);
        put(tag + ".wk", head.wk[c]);
        put(tag + ".bk", head.bk[c]);
    }
    put("head.proj.w", head.proj_w);
    put("head.proj.b", head.proj_b);
    put("head.cls.w", head.cls_w);
    put("head.cls.b", head.cls_b);
    put("head.pool.w", head.pool_w);
    put("head.pool.b", head.pool_b);
    return out;
}

template <class T>
ModelOutput<T> model_forward(const ModelConfig& cfg, const ModelParams<T>& params,
                             const Tensor<T>& x, const Tensor<T>* wide,
                             AttnRecord* record) {
    auto taps = encode(x, cfg.enc, params.enc);
    std::array<ContextualTokens<T>, kStages> projected;
    for (size_t s = 0; s < kStages; ++s)
        projected[s] = project_per_lead(taps[s], cfg.enc, params.enc,
                                        cfg.stage.dim);
    Tensor<T> rep = run_three_stages(projected, params.tf, cfg.stage, record);

    if (cfg.wide_dim > 0) {
        if (!wide || wide->rank() != 2 || wide->dim(0) != x.dim(0) ||
            wide->dim(1) != cfg.wide_dim)
            throw ShapeError("model expects wide features [B, " +
                             std::to_string(cfg.wide_dim) + "]");
        const size_t B = x.dim(0), C = cfg.enc.leads;
        Tensor<T> one = reshape(*wide, {B, 1, cfg.wide_dim});
        Tensor<T> tiled =
            C == 1 ? one : concat(std::vector<Tensor<T>>(C, one), 1);
        rep = concat(rep, tiled, 2);  // [B, C, D + wide_dim]
    }

    if (cfg.head == HeadKind::kPooled)
        return ModelOutput<T>{pooled_head(rep, params.head), Tensor<T>()};
    GatedOutput<T> out = gated_logits(rep, gated_attention(rep, params.head),
                                      params.head);
    return ModelOutput<T>{out.logits, out.lead_attn};
}

#define ECGFORMER_INSTANTIATE(T)                                         \
    template struct ModelParams<T>;                                     \
    template ModelOutput<T> model_forward(const ModelConfig&,           \
                                          const ModelParams<T>&,        \
                                          const Tensor<T>&,             \
                                          const Tensor<T>*, AttnRecord*);
ECGFORMER_INSTANTIATE(float)
ECGFORMER_INSTANTIATE(double)
#undef ECGFORMER_INSTANTIATE

}  // namespace ecgformer
