#include "ecgformer/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ecgformer/rng.hpp"

namespace ecgformer {

using json = nlohmann::json;

template <class T>
Tensor<T> classification_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
    return bce_with_logits_mean(logits, targets);
}

namespace {

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    int64_t t = 0;
};

template <class T>
AdamState<T> adam_init(const std::vector<std::pair<std::string, Tensor<T>>>& params) {
    AdamState<T> st;
    for (const auto& [name, p] : params) {
        st.m.emplace_back(p.numel(), T(0));
        st.v.emplace_back(p.numel(), T(0));
    }
    return st;
}

template <class T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params,
               AdamState<T>& st, const OptimConfig& oc) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(oc.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(oc.beta2, static_cast<double>(st.t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& vals = params[i].second.values();
        const auto& grad = params[i].second.grad();
        auto& m = st.m[i];
        auto& v = st.v[i];
        for (size_t k = 0; k < vals.size(); ++k) {
            const double g = grad[k];
            const double mk = oc.beta1 * m[k] + (1 - oc.beta1) * g;
            const double vk = oc.beta2 * v[k] + (1 - oc.beta2) * g * g;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            const double step = (mk / bc1) / (std::sqrt(vk / bc2) + oc.eps) +
                                oc.weight_decay * vals[k];
            vals[k] = static_cast<T>(vals[k] - oc.lr * step);
        }
    }
}

struct Item {
    Recording pre;  // preprocessed, uncropped
    std::vector<int> labels;
};

std::vector<Item> load_items(const DatasetManifest& manifest,
                             const std::string& data_root,
                             const PipelineConfig& pipe, int fold,
                             bool keep_fold) {
    std::vector<Item> items;
    for (const auto& e : manifest.entries) {
        const bool matches = e.fold == fold;
        if (fold >= 0 && matches != keep_fold) continue;
        Recording rec = load_recording(resolve_path(data_root, e.path));
        items.push_back(Item{preprocess(rec, pipe), e.labels});
    }
    return items;
}

template <class T>
void fill_window(Tensor<T>& x, size_t row, const Recording& rec) {
    const size_t C = rec.leads, W = rec.n_samples;
    T* dst = x.values().data() + row * C * W;
    for (size_t i = 0; i < C * W; ++i) dst[i] = static_cast<T>(rec.signal[i]);
}

template <class T>
void fill_targets(Tensor<T>& y, size_t row, const std::vector<int>& labels,
                  size_t n_classes) {
    T* dst = y.values().data() + row * n_classes;
    for (int l : labels) dst[l] = T(1);
}

template <class T>
Tensor<T> wide_tensor(const std::map<std::string, std::vector<float>>& feats,
                      const std::vector<const Recording*>& recs, size_t dim) {
    Tensor<T> w = Tensor<T>::zeros({recs.size(), dim});
    for (size_t r = 0; r < recs.size(); ++r) {
        const auto it = feats.find(recs[r]->id);
        if (it == feats.end())
            throw ValueError("no wide features for recording '" + recs[r]->id + "'");
        if (it->second.size() != dim)
            throw ValueError("wide features for '" + recs[r]->id + "' have size " +
                             std::to_string(it->second.size()) + ", expected " +
                             std::to_string(dim));
        for (size_t k = 0; k < dim; ++k)
            w.values()[r * dim + k] = static_cast<T>(it->second[k]);
    }
    return w;
}

// Crop-averaged sigmoid scores, row-major [items x classes].
template <class T>
std::vector<double> score_items(const ModelConfig& mcfg, ModelParams<T>& params,
                                const std::vector<Item>& items,
                                const PipelineConfig& pipe,
                                const std::map<std::string, std::vector<float>>* feats) {
    const size_t W = pipe.segment_samples(), N = mcfg.n_classes;
    std::vector<double> scores;
    scores.reserve(items.size() * N);
    for (const auto& item : items) {
        const auto starts = eval_crop_starts(item.pre.n_samples, W);
        Tensor<T> x = Tensor<T>::zeros({starts.size(), mcfg.enc.leads, W});
        for (size_t s = 0; s < starts.size(); ++s)
            fill_window(x, s, crop_at(item.pre, starts[s], W));
        Tensor<T> wide;
        if (mcfg.wide_dim > 0) {
            if (!feats) throw ValueError("model needs wide features but none were given");
            std::vector<const Recording*> recs(starts.size(), &item.pre);
            wide = wide_tensor<T>(*feats, recs, mcfg.wide_dim);
        }
        Tensor<T> logits =
            model_forward(mcfg, params, x, mcfg.wide_dim > 0 ? &wide : nullptr)
                .logits;
        for (size_t c = 0; c < N; ++c) {
            double mean = 0;
            for (size_t s = 0; s < starts.size(); ++s)
                mean += logits.values()[s * N + c];
            mean /= static_cast<double>(starts.size());
            scores.push_back(1.0 / (1.0 + std::exp(-mean)));
        }
    }
    return scores;
}

template <class T>
CheckpointData build_checkpoint(const TrainConfig& cfg,
                                std::vector<std::pair<std::string, Tensor<T>>>& params,
                                const AdamState<T>& st, int64_t epoch) {
    CheckpointData ck;
    ck.config_json = train_config_to_json(cfg);
    ck.epoch = epoch;
    ck.seed = cfg.seed;
    ck.adam_step = st.t;
    for (auto& [name, p] : params)
        ck.tensors.push_back(make_blob("param." + name, p));
    for (size_t i = 0; i < params.size(); ++i) {
        TensorBlob m = make_blob("adam.m." + params[i].first, params[i].second);
        std::memcpy(m.raw.data(), st.m[i].data(), m.raw.size());
        TensorBlob v = make_blob("adam.v." + params[i].first, params[i].second);
        std::memcpy(v.raw.data(), st.v[i].data(), v.raw.size());
        ck.tensors.push_back(std::move(m));
        ck.tensors.push_back(std::move(v));
    }
    return ck;
}

template <class T>
void restore_params(const CheckpointData& ck,
                    std::vector<std::pair<std::string, Tensor<T>>>& params,
                    AdamState<T>* st) {
    for (size_t i = 0; i < params.size(); ++i) {
        auto& [name, p] = params[i];
        const TensorBlob* blob = ck.find("param." + name);
        if (!blob) throw ValueError("checkpoint lacks tensor 'param." + name + "'");
        blob_into(*blob, p);
        if (!st) continue;
        const TensorBlob* mb = ck.find("adam.m." + name);
        const TensorBlob* vb = ck.find("adam.v." + name);
        if (!mb || !vb)
            throw ValueError("checkpoint lacks optimizer state for '" + name + "'");
        if (mb->raw.size() != p.numel() * sizeof(T) ||
            vb->raw.size() != p.numel() * sizeof(T))
            throw ValueError("optimizer state size mismatch for '" + name + "'");
        std::memcpy(st->m[i].data(), mb->raw.data(), mb->raw.size());
        std::memcpy(st->v[i].data(), vb->raw.data(), vb->raw.size());
    }
    if (st) st->t = ck.adam_step;
}

// A resumed run may extend epochs or change checkpoint cadence; everything
// that shapes the data, model, or update sequence must match.
void check_resume_config(const TrainConfig& ours, const std::string& their_json) {
    TrainConfig theirs = train_config_from_json(their_json);
    auto strip = [](TrainConfig c) {
        c.epochs = 1;
        c.save_every = 0;
        c.stop_loss = 0;
        return train_config_to_json(c);
    };
    if (strip(ours) != strip(theirs))
        throw ConfigError("resume checkpoint was trained with an incompatible config");
}

template <class T>
TrainResult train_impl(const TrainConfig& cfg, const DatasetManifest& manifest,
                       const std::string& data_root, const std::string& out_dir,
                       const std::string& resume) {
    cfg.validate();
    manifest.validate();
    if (manifest.entries.empty()) throw ValueError("training manifest is empty");
    if (!manifest.class_names.empty() &&
        manifest.class_names.size() != cfg.model.n_classes)
        throw ValueError("manifest declares " +
                         std::to_string(manifest.class_names.size()) +
                         " classes, model expects " +
                         std::to_string(cfg.model.n_classes));
    std::filesystem::create_directories(out_dir);

    const std::vector<Item> train_items =
        load_items(manifest, data_root, cfg.pipe, cfg.val_fold, false);
    if (train_items.empty()) throw ValueError("no training entries after fold split");
    std::vector<Item> val_items;
    if (cfg.val_fold >= 0)
        val_items = load_items(manifest, data_root, cfg.pipe, cfg.val_fold, true);

    std::map<std::string, std::vector<float>> feats;
    if (!cfg.wide_features.empty()) feats = load_wide_features(cfg.wide_features);
    if (cfg.model.wide_dim > 0 && cfg.wide_features.empty())
        throw ConfigError("model has wide_dim > 0 but no wide_features file");

    std::mt19937 init_rng = derive_rng(cfg.seed, "init");
    ModelParams<T> model = ModelParams<T>::init(cfg.model, init_rng);
    auto params = model.named();
    AdamState<T> adam = adam_init(params);

    int64_t start_epoch = 0;
    if (!resume.empty()) {
        const CheckpointData ck = load_checkpoint(resume);
        check_resume_config(cfg, ck.config_json);
        restore_params(ck, params, &adam);
        start_epoch = ck.epoch;
        if (start_epoch >= static_cast<int64_t>(cfg.epochs))
            throw ConfigError("checkpoint already covers " +
                              std::to_string(start_epoch) + " epochs");
    }

    const size_t W = cfg.pipe.segment_samples();
    const size_t C = cfg.model.enc.leads, N = cfg.model.n_classes;
    const size_t n_items = train_items.size() * cfg.crops_per_recording;

    const std::string log_path = out_dir + "/train_log.jsonl";
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path);
    const std::string ckpt_path = out_dir + "/checkpoint.bin";

    TrainResult result;
    result.log_path = log_path;
    result.checkpoint_path = ckpt_path;

    for (int64_t epoch = start_epoch + 1;
         epoch <= static_cast<int64_t>(cfg.epochs); ++epoch) {
        std::vector<size_t> order(n_items);
        for (size_t i = 0; i < n_items; ++i) order[i] = i;
        std::mt19937 shuffle_rng =
            derive_rng(cfg.seed, "shuffle", static_cast<uint64_t>(epoch));
        for (size_t i = n_items; i > 1; --i)
            std::swap(order[i - 1], order[rng_index(shuffle_rng, i)]);

        double loss_sum = 0;
        for (size_t pos = 0; pos < n_items; pos += cfg.batch_size) {
            const size_t b = std::min(cfg.batch_size, n_items - pos);
            Tensor<T> x = Tensor<T>::zeros({b, C, W});
            Tensor<T> y = Tensor<T>::zeros({b, N});
            std::vector<const Recording*> batch_recs(b);
            for (size_t r = 0; r < b; ++r) {
                const size_t item = order[pos + r];
                const size_t rec_i = item / cfg.crops_per_recording;
                std::mt19937 crop_rng = derive_rng(
                    cfg.seed, "crop", static_cast<uint64_t>(epoch), item);
                fill_window(x, r,
                            crop_or_pad(train_items[rec_i].pre,
                                        cfg.pipe.segment_seconds, crop_rng));
                fill_targets(y, r, train_items[rec_i].labels, N);
                batch_recs[r] = &train_items[rec_i].pre;
            }
            Tensor<T> wide;
            if (cfg.model.wide_dim > 0)
                wide = wide_tensor<T>(feats, batch_recs, cfg.model.wide_dim);

            for (auto& [name, p] : params) p.zero_grad();
            Tape<T> tape;
            Tensor<T> logits =
                model_forward(cfg.model, model, x,
                              cfg.model.wide_dim > 0 ? &wide : nullptr)
                    .logits;
            Tensor<T> loss = classification_loss(logits, y);
            tape.backward(loss);
            adam_step(params, adam, cfg.optim);
            loss_sum += static_cast<double>(loss.item()) * b;
        }
        const double epoch_loss = loss_sum / static_cast<double>(n_items);
        result.final_loss = epoch_loss;
        result.epochs_run = epoch;

        json line{{"epoch", epoch}, {"loss", epoch_loss}};
        if (!val_items.empty()) {
            const auto scores =
                score_items(cfg.model, model, val_items, cfg.pipe,
                            cfg.model.wide_dim > 0 ? &feats : nullptr);
            std::vector<std::vector<int>> truth;
            for (const auto& it : val_items) truth.push_back(it.labels);
            const auto wm = WeightMatrix::identity(
                std::vector<std::string>(N, ""));
            const EvalReport rep =
                evaluate_scores(scores, truth, N, wm.w, "identity");
            line["val_auc"] = rep.auc;
            line["val_macro_fbeta"] = rep.macro_fbeta;
            line["val_challenge_normalized"] = rep.challenge_normalized;
        }
        log << line.dump() << "\n";
        log.flush();

        const bool stop = cfg.stop_loss > 0 && epoch_loss < cfg.stop_loss;
        if (cfg.save_every > 0 && epoch % cfg.save_every == 0)
            save_checkpoint(build_checkpoint(cfg, params, adam, epoch),
                            out_dir + "/checkpoint_epoch" +
                                std::to_string(epoch) + ".bin");
        if (stop || epoch == static_cast<int64_t>(cfg.epochs)) {
            save_checkpoint(build_checkpoint(cfg, params, adam, epoch), ckpt_path);
            break;
        }
    }
    return result;
}

template <class T>
EvalReport evaluate_impl(const CheckpointData& ck, const TrainConfig& cfg,
                         const DatasetManifest& manifest,
                         const std::string& data_root, int fold,
                         const WeightMatrix* weights, Predictions* predictions) {
    std::mt19937 init_rng = derive_rng(cfg.seed, "init");
    ModelParams<T> model = ModelParams<T>::init(cfg.model, init_rng);
    auto params = model.named();
    restore_params<T>(ck, params, nullptr);

    std::vector<Item> items;
    std::vector<std::string> ids;
    for (const auto& e : manifest.entries) {
        if (fold >= 0 && e.fold != fold) continue;
        Recording rec = load_recording(resolve_path(data_root, e.path));
        ids.push_back(rec.id);
        items.push_back(Item{preprocess(rec, cfg.pipe), e.labels});
    }
    if (items.empty()) throw ValueError("evaluation selection is empty");

    std::map<std::string, std::vector<float>> feats;
    if (cfg.model.wide_dim > 0) {
        if (cfg.wide_features.empty())
            throw ConfigError("checkpoint expects wide features but the config "
                              "names no file");
        feats = load_wide_features(cfg.wide_features);
    }

    const size_t N = cfg.model.n_classes;
    const auto scores = score_items(cfg.model, model, items, cfg.pipe,
                                    cfg.model.wide_dim > 0 ? &feats : nullptr);
    std::vector<std::vector<int>> truth;
    for (const auto& it : items) truth.push_back(it.labels);

    WeightMatrix wm = weights
                          ? *weights
                          : WeightMatrix::identity(std::vector<std::string>(N, ""));
    if (wm.n() != N)
        throw ValueError("weight matrix has " + std::to_string(wm.n()) +
                         " classes, model expects " + std::to_string(N));
    if (predictions) {
        predictions->ids = ids;
        predictions->class_names.assign(manifest.class_names.begin(),
                                        manifest.class_names.end());
        if (predictions->class_names.empty())
            predictions->class_names.assign(N, "");
        predictions->scores = scores;
    }
    return evaluate_scores(scores, truth, N, wm.w,
                           weights ? "file" : "identity");
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest,
                  const std::string& data_root, const std::string& out_dir,
                  const std::string& resume) {
    return cfg.precision == "f64"
               ? train_impl<double>(cfg, manifest, data_root, out_dir, resume)
               : train_impl<float>(cfg, manifest, data_root, out_dir, resume);
}

EvalReport evaluate(const std::string& checkpoint_path,
                    const DatasetManifest& manifest,
                    const std::string& data_root, int fold,
                    const WeightMatrix* weights, Predictions* predictions) {
    const CheckpointData ck = load_checkpoint(checkpoint_path);
    const TrainConfig cfg = train_config_from_json(ck.config_json);
    if (!manifest.class_names.empty() &&
        manifest.class_names.size() != cfg.model.n_classes)
        throw ValueError("manifest declares " +
                         std::to_string(manifest.class_names.size()) +
                         " classes, checkpoint expects " +
                         std::to_string(cfg.model.n_classes));
    return cfg.precision == "f64"
               ? evaluate_impl<double>(ck, cfg, manifest, data_root, fold,
                                       weights, predictions)
               : evaluate_impl<float>(ck, cfg, manifest, data_root, fold,
                                      weights, predictions);
}

template Tensor<float> classification_loss(const Tensor<float>&,
                                           const Tensor<float>&);
template Tensor<double> classification_loss(const Tensor<double>&,
                                            const Tensor<double>&);

}  // namespace ecgformer
