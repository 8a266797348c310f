#pragma once

// Four-layer depthwise 1D convolutional encoder. Leads fold into the batch
// axis and every layer applies one shared filter bank per lead, which is a
// grouped convolution with groups == leads and tied per-lead weights: no
// information crosses leads, and permuting input leads permutes the taps
// bitwise. Three taps at progressively coarser resolutions feed the
// transformer stages.

#include <array>
#include <random>
#include <vector>

#include "ecgformer/tensor.hpp"

namespace ecgformer {

constexpr size_t kEncoderLayers = 4;
constexpr size_t kStages = 3;

struct EncoderConfig {
    size_t leads = 12;
    std::array<size_t, kEncoderLayers> kernels{15, 9, 9, 5};
    std::array<size_t, kEncoderLayers> strides{3, 2, 2, 2};
    // Channels per lead at each layer; the last one is the per-lead
    // embedding width entering the stage-3 projection.
    std::array<size_t, kEncoderLayers> multipliers{8, 16, 32, 64};
    // 1-based layer indices whose outputs feed stages 1..3.
    std::array<size_t, kStages> tap_layers{2, 3, 4};
    bool per_lead_projection = false;

    void validate() const;
    // Token count after each layer for input length L; throws if any layer
    // underflows or the tapped lengths are not strictly decreasing.
    std::array<size_t, kEncoderLayers> layer_lengths(size_t L) const;
    std::array<size_t, kStages> tap_lengths(size_t L) const;
};

// Per-lead token sequences tapped at one encoder depth.
template <class T>
struct ContextualTokens {
    Tensor<T> tokens;  // [B*C, N, width]
    size_t batch = 0, leads = 0, spatial = 0, width = 0, stage = 0;
};

template <class T>
struct EncoderParams {
    std::vector<Tensor<T>> kernels;  // [m_l, m_{l-1}, k_l], shared across leads
    std::vector<Tensor<T>> biases;   // [m_l]
    // Stage projections onto the transformer width D; one weight/bias pair
    // per stage, or one per (stage, lead) when per_lead_projection is set.
    std::vector<std::vector<Tensor<T>>> proj_w;  // [m_tap, D]
    std::vector<std::vector<Tensor<T>>> proj_b;  // [D]

    static EncoderParams init(const EncoderConfig& cfg, size_t dim,
                              std::mt19937& rng);
};

// x: [B, C, L] -> three taps, each [B*C, N_s, m_s], N strictly decreasing.
template <class T>
std::array<ContextualTokens<T>, kStages> encode(const Tensor<T>& x,
                                                const EncoderConfig& cfg,
                                                const EncoderParams<T>& params);

// Affine m -> D along the channel axis, shared across time positions.
template <class T>
ContextualTokens<T> project_per_lead(const ContextualTokens<T>& t,
                                     const EncoderConfig& cfg,
                                     const EncoderParams<T>& params, size_t dim);

}  // namespace ecgformer
