#pragma once

// JSON (de)serialization for every configuration struct. Parsing is
// permissive about omitted keys (defaults stand in) and strict about
// value validity.

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ecgformer/model.hpp"
#include "ecgformer/signal.hpp"
#include "ecgformer/synth.hpp"

namespace ecgformer {

struct OptimConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    void validate() const;
};

struct TrainConfig {
    ModelConfig model;
    PipelineConfig pipe;
    OptimConfig optim;
    size_t batch_size = 16;
    size_t epochs = 10;
    uint64_t seed = 0;
    size_t crops_per_recording = 1;
    std::string precision = "f32";  // or "f64"
    double stop_loss = 0.0;         // stop once train loss drops below (0 = off)
    int val_fold = -1;              // entries with this fold are held out
    int save_every = 0;             // periodic checkpoints (0 = final only)
    std::string wide_features;      // optional JSON file {id: [floats]}

    void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const StageConfig& c);
void from_json(const nlohmann::json& j, StageConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const OptimConfig& c);
void from_json(const nlohmann::json& j, OptimConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const ClassMorphology& c);
void from_json(const nlohmann::json& j, ClassMorphology& c);
void to_json(nlohmann::json& j, const SyntheticSpec& c);
void from_json(const nlohmann::json& j, SyntheticSpec& c);

std::string train_config_to_json(const TrainConfig& cfg);
// Resolves model.input_len from the pipeline when left at 0 and validates.
TrainConfig train_config_from_json(const std::string& text);
SyntheticSpec synth_spec_from_json(const std::string& text);

}  // namespace ecgformer
