#include "ecgformer/config.hpp"

#include <nlohmann/json.hpp>

namespace ecgformer {

using json = nlohmann::json;

namespace {

template <class X>
void opt(const json& j, const char* key, X& value) {
    if (j.contains(key)) j.at(key).get_to(value);
}

template <class X, size_t N>
void opt_array(const json& j, const char* key, std::array<X, N>& value) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<X>>();
    if (v.size() != N)
        throw ConfigError(std::string(key) + " needs exactly " +
                          std::to_string(N) + " entries");
    std::copy(v.begin(), v.end(), value.begin());
}

}  // namespace

void OptimConfig::validate() const {
    if (!(lr > 0)) throw ConfigError("optimizer: lr must be positive");
    if (!(0 <= beta1 && beta1 < 1) || !(0 <= beta2 && beta2 < 1))
        throw ConfigError("optimizer: betas must lie in [0, 1)");
    if (!(eps > 0)) throw ConfigError("optimizer: eps must be positive");
    if (weight_decay < 0) throw ConfigError("optimizer: weight_decay must be >= 0");
}

void TrainConfig::validate() const {
    model.validate();
    pipe.validate();
    optim.validate();
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (crops_per_recording < 1)
        throw ConfigError("train: crops_per_recording must be >= 1");
    if (precision != "f32" && precision != "f64")
        throw ConfigError("train: precision must be 'f32' or 'f64'");
    if (save_every < 0) throw ConfigError("train: save_every must be >= 0");
    if (model.input_len != pipe.segment_samples())
        throw ConfigError("train: model input_len " +
                          std::to_string(model.input_len) +
                          " does not match the pipeline segment of " +
                          std::to_string(pipe.segment_samples()) + " samples");
}

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"target_fs", c.target_fs},
             {"segment_seconds", c.segment_seconds},
             {"bandpass_low", c.bandpass_low},
             {"bandpass_high", c.bandpass_high},
             {"fir_taps", c.fir_taps},
             {"normalize", c.normalize}};
}

void from_json(const json& j, PipelineConfig& c) {
    opt(j, "target_fs", c.target_fs);
    opt(j, "segment_seconds", c.segment_seconds);
    opt(j, "bandpass_low", c.bandpass_low);
    opt(j, "bandpass_high", c.bandpass_high);
    opt(j, "fir_taps", c.fir_taps);
    opt(j, "normalize", c.normalize);
}

void to_json(json& j, const EncoderConfig& c) {
    j = json{{"leads", c.leads},
             {"kernels", c.kernels},
             {"strides", c.strides},
             {"multipliers", c.multipliers},
             {"tap_layers", c.tap_layers},
             {"per_lead_projection", c.per_lead_projection}};
}

void from_json(const json& j, EncoderConfig& c) {
    opt(j, "leads", c.leads);
    opt_array(j, "kernels", c.kernels);
    opt_array(j, "strides", c.strides);
    opt_array(j, "multipliers", c.multipliers);
    opt_array(j, "tap_layers", c.tap_layers);
    opt(j, "per_lead_projection", c.per_lead_projection);
}

void to_json(json& j, const StageConfig& c) {
    j = json{{"dim", c.dim},
             {"heads", c.heads},
             {"layers", c.layers},
             {"mlp_ratio", c.mlp_ratio},
             {"attention", c.attn == AttnKind::kDifferential ? "differential"
                                                             : "standard"},
             {"lambda_init", c.lambda_init},
             {"diff_head_norm", c.diff_head_norm},
             {"per_lead_cls", c.per_lead_cls},
             {"pos_embed", c.pos_embed},
             {"ln_eps", c.ln_eps}};
}

void from_json(const json& j, StageConfig& c) {
    opt(j, "dim", c.dim);
    opt(j, "heads", c.heads);
    opt_array(j, "layers", c.layers);
    opt(j, "mlp_ratio", c.mlp_ratio);
    if (j.contains("attention")) {
        const auto s = j.at("attention").get<std::string>();
        if (s == "standard") c.attn = AttnKind::kStandard;
        else if (s == "differential") c.attn = AttnKind::kDifferential;
        else throw ConfigError("attention must be 'standard' or 'differential'");
    }
    opt(j, "lambda_init", c.lambda_init);
    opt(j, "diff_head_norm", c.diff_head_norm);
    opt(j, "per_lead_cls", c.per_lead_cls);
    opt(j, "pos_embed", c.pos_embed);
    opt(j, "ln_eps", c.ln_eps);
}

void to_json(json& j, const ModelConfig& c) {
    j = json{{"encoder", c.enc},
             {"stage", c.stage},
             {"head", c.head == HeadKind::kPooled ? "pooled" : "gated"},
             {"n_classes", c.n_classes},
             {"input_len", c.input_len},
             {"wide_dim", c.wide_dim},
             {"per_lead_gate", c.per_lead_gate}};
}

void from_json(const json& j, ModelConfig& c) {
    opt(j, "encoder", c.enc);
    opt(j, "stage", c.stage);
    if (j.contains("head")) {
        const auto s = j.at("head").get<std::string>();
        if (s == "gated") c.head = HeadKind::kGated;
        else if (s == "pooled") c.head = HeadKind::kPooled;
        else throw ConfigError("head must be 'gated' or 'pooled'");
    }
    opt(j, "n_classes", c.n_classes);
    opt(j, "input_len", c.input_len);
    opt(j, "wide_dim", c.wide_dim);
    opt(j, "per_lead_gate", c.per_lead_gate);
}

void to_json(json& j, const OptimConfig& c) {
    j = json{{"lr", c.lr},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"eps", c.eps},
             {"weight_decay", c.weight_decay}};
}

void from_json(const json& j, OptimConfig& c) {
    opt(j, "lr", c.lr);
    opt(j, "beta1", c.beta1);
    opt(j, "beta2", c.beta2);
    opt(j, "eps", c.eps);
    opt(j, "weight_decay", c.weight_decay);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"model", c.model},
             {"pipeline", c.pipe},
             {"optimizer", c.optim},
             {"batch_size", c.batch_size},
             {"epochs", c.epochs},
             {"seed", c.seed},
             {"crops_per_recording", c.crops_per_recording},
             {"precision", c.precision},
             {"stop_loss", c.stop_loss},
             {"val_fold", c.val_fold},
             {"save_every", c.save_every},
             {"wide_features", c.wide_features}};
}

void from_json(const json& j, TrainConfig& c) {
    opt(j, "model", c.model);
    opt(j, "pipeline", c.pipe);
    opt(j, "optimizer", c.optim);
    opt(j, "batch_size", c.batch_size);
    opt(j, "epochs", c.epochs);
    opt(j, "seed", c.seed);
    opt(j, "crops_per_recording", c.crops_per_recording);
    opt(j, "precision", c.precision);
    opt(j, "stop_loss", c.stop_loss);
    opt(j, "val_fold", c.val_fold);
    opt(j, "save_every", c.save_every);
    opt(j, "wide_features", c.wide_features);
}

void to_json(json& j, const ClassMorphology& c) {
    json amp, width;
    for (size_t w = 0; w < kWavelets; ++w) {
        amp[kWaveletNames[w]] = c.amp_mult[w];
        width[kWaveletNames[w]] = c.width_mult[w];
    }
    j = json{{"name", c.name}, {"amp_mult", amp}, {"width_mult", width}};
}

void from_json(const json& j, ClassMorphology& c) {
    opt(j, "name", c.name);
    for (size_t w = 0; w < kWavelets; ++w) {
        if (j.contains("amp_mult"))
            opt(j.at("amp_mult"), kWaveletNames[w], c.amp_mult[w]);
        if (j.contains("width_mult"))
            opt(j.at("width_mult"), kWaveletNames[w], c.width_mult[w]);
    }
}

void to_json(json& j, const SyntheticSpec& c) {
    j = json{{"n_recordings", c.n_recordings},
             {"leads", c.leads},
             {"duration_s", c.duration_s},
             {"fs", c.fs},
             {"bpm_low", c.bpm_low},
             {"bpm_high", c.bpm_high},
             {"noise_std", c.noise_std},
             {"classes", c.classes},
             {"seed", c.seed}};
}

void from_json(const json& j, SyntheticSpec& c) {
    opt(j, "n_recordings", c.n_recordings);
    opt(j, "leads", c.leads);
    opt(j, "duration_s", c.duration_s);
    opt(j, "fs", c.fs);
    opt(j, "bpm_low", c.bpm_low);
    opt(j, "bpm_high", c.bpm_high);
    opt(j, "noise_std", c.noise_std);
    opt(j, "classes", c.classes);
    opt(j, "seed", c.seed);
}

std::string train_config_to_json(const TrainConfig& cfg) {
    return json(cfg).dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValueError("malformed training config JSON");
    TrainConfig cfg;
    try {
        j.get_to(cfg);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad training config: ") + e.what());
    }
    if (cfg.model.input_len == 0)
        cfg.model.input_len = cfg.pipe.segment_samples();
    cfg.validate();
    return cfg;
}

SyntheticSpec synth_spec_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValueError("malformed synthesis spec JSON");
    SyntheticSpec spec;
    try {
        j.get_to(spec);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad synthesis spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace ecgformer
