#pragma once

// Full model: depthwise encoder -> three CLS-threaded transformer stages ->
// gated or pooled classification head. The four studied variants are pure
// configuration: {gated, pooled} x {standard, differential}.

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecgformer/encoder.hpp"
#include "ecgformer/head.hpp"
#include "ecgformer/transformer.hpp"

namespace ecgformer {

enum class HeadKind { kGated, kPooled };

struct ModelConfig {
    EncoderConfig enc;
    StageConfig stage;
    HeadKind head = HeadKind::kGated;
    size_t n_classes = 2;
    size_t input_len = 7500;  // samples per segment entering the encoder
    size_t wide_dim = 0;      // optional auxiliary features appended per lead
    bool per_lead_gate = false;

    size_t head_width() const { return stage.dim + wide_dim; }
    void validate() const;
};

template <class T>
struct ModelParams {
    EncoderParams<T> enc;
    TransformerParams<T> tf;
    GatedParams<T> head;

    static ModelParams init(const ModelConfig& cfg, std::mt19937& rng);
    // Stable (name, tensor) listing; tensors share storage with the params,
    // so optimizer and checkpoint code mutate them in place.
    std::vector<std::pair<std::string, Tensor<T>>> named();
};

template <class T>
struct ModelOutput {
    Tensor<T> logits;     // [B, N]
    Tensor<T> lead_attn;  // [B, N, C] for the gated head, empty otherwise
};

// x: [B, C, L]; wide: optional [B, wide_dim], appended to every lead's
// representation before the head.
template <class T>
ModelOutput<T> model_forward(const ModelConfig& cfg, const ModelParams<T>& params,
                             const Tensor<T>& x, const Tensor<T>* wide = nullptr,
                             AttnRecord* record = nullptr);

}  // namespace ecgformer
