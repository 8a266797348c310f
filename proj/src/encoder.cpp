#include "ecgformer/encoder.hpp"

#include <cmath>

namespace ecgformer {

void EncoderConfig::validate() const {
    if (leads < 1) throw ConfigError("encoder: leads must be >= 1");
    for (size_t l = 0; l < kEncoderLayers; ++l) {
        if (kernels[l] < 1) throw ConfigError("encoder: kernel lengths must be >= 1");
        if (strides[l] < 1) throw ConfigError("encoder: strides must be >= 1");
        if (multipliers[l] < 1) throw ConfigError("encoder: multipliers must be >= 1");
    }
    for (size_t s = 0; s < kStages; ++s) {
        if (tap_layers[s] < 1 || tap_layers[s] > kEncoderLayers)
            throw ConfigError("encoder: tap layers must lie in 1..4");
        if (s > 0 && tap_layers[s] <= tap_layers[s - 1])
            throw ConfigError("encoder: tap layers must be strictly increasing");
    }
}

std::array<size_t, kEncoderLayers> EncoderConfig::layer_lengths(size_t L) const {
    validate();
    std::array<size_t, kEncoderLayers> n{};
    size_t cur = L;
    for (size_t l = 0; l < kEncoderLayers; ++l) {
        if (cur < kernels[l])
            throw ValueError("encoder: layer " + std::to_string(l + 1) +
                             " input length " + std::to_string(cur) +
                             " shorter than kernel " + std::to_string(kernels[l]));
        cur = (cur - kernels[l]) / strides[l] + 1;
        n[l] = cur;
    }
    const auto taps = std::array<size_t, kStages>{
        n[tap_layers[0] - 1], n[tap_layers[1] - 1], n[tap_layers[2] - 1]};
    if (!(taps[0] > taps[1] && taps[1] > taps[2]))
        throw ConfigError("encoder: tapped token counts must strictly decrease, got " +
                          std::to_string(taps[0]) + ", " + std::to_string(taps[1]) +
                          ", " + std::to_string(taps[2]));
    return n;
}

std::array<size_t, kStages> EncoderConfig::tap_lengths(size_t L) const {
    const auto n = layer_lengths(L);
    return {n[tap_layers[0] - 1], n[tap_layers[1] - 1], n[tap_layers[2] - 1]};
}

template <class T>
EncoderParams<T> EncoderParams<T>::init(const EncoderConfig& cfg, size_t dim,
                                        std::mt19937& rng) {
    cfg.validate();
    EncoderParams<T> p;
    size_t in_mult = 1;
    for (size_t l = 0; l < kEncoderLayers; ++l) {
        const size_t out_ch = cfg.multipliers[l];
        const double std = std::sqrt(2.0 / (in_mult * cfg.kernels[l]));
        p.kernels.push_back(Tensor<T>::randn(
            {out_ch, in_mult, cfg.kernels[l]}, rng, std, true));
        p.biases.push_back(Tensor<T>::zeros({out_ch}, true));
        in_mult = cfg.multipliers[l];
    }
    for (size_t s = 0; s < kStages; ++s) {
        const size_t m = cfg.multipliers[cfg.tap_layers[s] - 1];
        const size_t copies = cfg.per_lead_projection ? cfg.leads : 1;
        const double std = std::sqrt(1.0 / m);
        std::vector<Tensor<T>> ws, bs;
        for (size_t c = 0; c < copies; ++c) {
            ws.push_back(Tensor<T>::randn({m, dim}, rng, std, true));
            bs.push_back(Tensor<T>::zeros({dim}, true));
        }
        p.proj_w.push_back(std::move(ws));
        p.proj_b.push_back(std::move(bs));
    }
    return p;
}

template <class T>
std::array<ContextualTokens<T>, kStages> encode(const Tensor<T>& x,
                                                const EncoderConfig& cfg,
                                                const EncoderParams<T>& params) {
    cfg.validate();
    if (x.rank() != 3 || x.dim(1) != cfg.leads)
        throw ShapeError("encode expects [B, " + std::to_string(cfg.leads) +
                         ", L], got " + shape_str(x.shape()));
    const size_t B = x.dim(0), C = cfg.leads;
    cfg.layer_lengths(x.dim(2));  // validates lengths up front

    std::array<ContextualTokens<T>, kStages> taps;
    // Leads become batch entries; one filter bank serves every lead.
    Tensor<T> cur = reshape(x, {B * C, 1, x.dim(2)});
    size_t next_tap = 0;
    for (size_t l = 0; l < kEncoderLayers; ++l) {
        cur = gelu(grouped_conv1d(cur, params.kernels[l], params.biases[l],
                                  cfg.strides[l], 1));
        if (next_tap < kStages && cfg.tap_layers[next_tap] == l + 1) {
            const size_t m = cfg.multipliers[l], N = cur.dim(2);
            Tensor<T> t = transpose(cur, {0, 2, 1});  // [B*C, N, m]
            taps[next_tap] = ContextualTokens<T>{t, B, C, N, m, next_tap};
            ++next_tap;
        }
    }
    return taps;
}

template <class T>
ContextualTokens<T> project_per_lead(const ContextualTokens<T>& t,
                                     const EncoderConfig& cfg,
                                     const EncoderParams<T>& params, size_t dim) {
    const auto& ws = params.proj_w.at(t.stage);
    const auto& bs = params.proj_b.at(t.stage);
    ContextualTokens<T> out = t;
    out.width = dim;
    if (!cfg.per_lead_projection) {
        out.tokens = add(matmul(t.tokens, ws[0]), bs[0]);
        return out;
    }
    const size_t B = t.batch, C = t.leads, N = t.spatial, m = t.width;
    Tensor<T> grouped = reshape(t.tokens, {B, C, N, m});
    std::vector<Tensor<T>> leads;
    leads.reserve(C);
    for (size_t c = 0; c < C; ++c) {
        Tensor<T> one = reshape(slice(grouped, 1, c, 1), {B, N, m});
        one = add(matmul(one, ws[c]), bs[c]);
        leads.push_back(reshape(one, {B, 1, N, dim}));
    }
    out.tokens = reshape(concat(leads, 1), {B * C, N, dim});
    return out;
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template std::array<ContextualTokens<float>, kStages> encode(
    const Tensor<float>&, const EncoderConfig&, const EncoderParams<float>&);
template std::array<ContextualTokens<double>, kStages> encode(
    const Tensor<double>&, const EncoderConfig&, const EncoderParams<double>&);
template ContextualTokens<float> project_per_lead(const ContextualTokens<float>&,
                                                  const EncoderConfig&,
                                                  const EncoderParams<float>&,
                                                  size_t);
template ContextualTokens<double> project_per_lead(
    const ContextualTokens<double>&, const EncoderConfig&,
    const EncoderParams<double>&, size_t);

}  // namespace ecgformer
