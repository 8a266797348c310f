#pragma once

// Three-stage transformer over per-lead token sequences. Leads are folded
// into the batch dimension, so nothing mixes across leads. Each stage
// prepends the CLS token to its contextual tokens, runs pre-norm blocks,
// and forwards only the CLS token to the next stage. Attention is either
// standard multi-head softmax or the differential form
// A = softmax(Q1 K1^T / sqrt(d)) - lambda * softmax(Q2 K2^T / sqrt(d)).

#include <array>
#include <random>
#include <vector>

#include "ecgformer/encoder.hpp"
#include "ecgformer/tensor.hpp"

namespace ecgformer {

enum class AttnKind { kStandard, kDifferential };

struct StageConfig {
    size_t dim = 64;
    size_t heads = 4;
    std::array<size_t, kStages> layers{2, 2, 2};
    size_t mlp_ratio = 4;
    AttnKind attn = AttnKind::kStandard;
    double lambda_init = 0.5;
    // Per-head normalization of the differential output scaled by
    // (1 - lambda_init), as in the differential-attention source.
    bool diff_head_norm = false;
    bool per_lead_cls = false;
    bool pos_embed = true;
    double ln_eps = 1e-5;

    void validate() const;
    size_t head_dim() const { return dim / heads; }
};

// Captured attention maps (values only): [sequences, heads, T, T] per layer.
// For differential attention this is the combined map.
struct AttnMap {
    Shape shape;
    std::vector<double> values;
};

struct AttnRecord {
    std::array<std::vector<AttnMap>, kStages> stages;
};

template <class T>
struct LayerParams {
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> lambda;  // scalar, differential only
    Tensor<T> ln2_g, ln2_b;
    Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

template <class T>
struct StageParams {
    Tensor<T> pos;  // [N_s + 1, D], row 0 is the CLS slot
    std::vector<LayerParams<T>> layers;
};

template <class T>
struct TransformerParams {
    Tensor<T> cls;  // [1, D], or [C, D] with per_lead_cls
    std::array<StageParams<T>, kStages> stages;

    static TransformerParams init(const StageConfig& cfg, size_t leads,
                                  const std::array<size_t, kStages>& tap_lengths,
                                  std::mt19937& rng);
};

// One attention sublayer on tokens [B', T', D].
template <class T>
Tensor<T> msa_standard(const Tensor<T>& tokens, const LayerParams<T>& p,
                       const StageConfig& cfg, AttnMap* record = nullptr);
template <class T>
Tensor<T> msa_differential(const Tensor<T>& tokens, const LayerParams<T>& p,
                           const StageConfig& cfg, AttnMap* record = nullptr);

// Full stage: concat CLS + ctx, add positional table, run the blocks.
// Returns the final token sequence; the CLS output is its token 0.
template <class T>
struct StageOutput {
    Tensor<T> tokens;   // [B*C, N_s + 1, D], retained for attention export
    Tensor<T> cls_out;  // [B*C, 1, D]
};

template <class T>
StageOutput<T> transformer_stage(const ContextualTokens<T>& ctx,
                                 const Tensor<T>& cls_in,
                                 const StageParams<T>& params,
                                 const StageConfig& cfg, size_t stage,
                                 AttnRecord* record = nullptr);

// Chains the three stages, threading only the CLS token across boundaries,
// and unfolds the result to [B, C, D].
template <class T>
Tensor<T> run_three_stages(const std::array<ContextualTokens<T>, kStages>& taps,
                           const TransformerParams<T>& params,
                           const StageConfig& cfg,
                           AttnRecord* record = nullptr);

}  // namespace ecgformer
