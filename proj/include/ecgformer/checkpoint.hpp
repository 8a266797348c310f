#pragma once

// Versioned checkpoint container: a JSON manifest (config snapshot, epoch,
// seed, optimizer step, tensor table) followed by raw little-endian tensor
// payloads. Parameters and Adam moments round-trip bit-exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "ecgformer/tensor.hpp"

namespace ecgformer {

struct TensorBlob {
    std::string name;
    std::string dtype;  // "f32" or "f64"
    Shape shape;
    std::vector<unsigned char> raw;
};

struct CheckpointData {
    uint32_t version = 1;
    std::string config_json;  // TrainConfig snapshot
    int64_t epoch = 0;        // completed epochs
    uint64_t seed = 0;
    int64_t adam_step = 0;
    std::vector<TensorBlob> tensors;

    const TensorBlob* find(const std::string& name) const;
};

void save_checkpoint(const CheckpointData& ckpt, const std::string& path);
CheckpointData load_checkpoint(const std::string& path);

template <class T>
TensorBlob make_blob(const std::string& name, const Tensor<T>& t);

// Copies a blob's payload into dst; dtype and shape must match exactly.
template <class T>
void blob_into(const TensorBlob& blob, Tensor<T>& dst);

}  // namespace ecgformer
