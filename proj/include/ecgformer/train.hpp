#pragma once

// Training and evaluation drivers. Training is deterministic for a fixed
// seed: the shuffle and crop streams are derived statelessly from
// (seed, epoch, item), so a resumed run continues bit-identically.

#include <string>

#include "ecgformer/checkpoint.hpp"
#include "ecgformer/config.hpp"
#include "ecgformer/dataset.hpp"
#include "ecgformer/metrics.hpp"

namespace ecgformer {

struct TrainResult {
    double final_loss = 0;
    int64_t epochs_run = 0;
    std::string checkpoint_path;
    std::string log_path;
};

// Trains on manifest entries whose fold differs from cfg.val_fold (all
// entries when val_fold < 0), logging one JSON line per epoch to
// <out_dir>/train_log.jsonl and writing <out_dir>/checkpoint.bin. Pass a
// checkpoint path in `resume` to continue a run.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::string& data_root, const std::string& out_dir,
                  const std::string& resume = "");

// Runs the checkpointed model over the selected entries (fold < 0 = all),
// averaging logits over evenly spaced crops per recording.
EvalReport evaluate(const std::string& checkpoint_path,
                    const DatasetManifest& manifest,
                    const std::string& data_root, int fold,
                    const WeightMatrix* weights, Predictions* predictions);

// BCE-with-logits gradient-checked entry used by the gradient suite.
template <class T>
Tensor<T> classification_loss(const Tensor<T>& logits, const Tensor<T>& targets);

}  // namespace ecgformer
