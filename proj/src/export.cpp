#include "ecgformer/export.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ecgformer/checkpoint.hpp"
#include "ecgformer/config.hpp"
#include "ecgformer/dataset.hpp"
#include "ecgformer/model.hpp"
#include "ecgformer/rng.hpp"

namespace ecgformer {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << body;
}

// Attention matrix of one (layer, head, lead): [T, T] slice of the recorded
// [C, H, T, T] map (batch of one recording).
std::string attn_csv(const AttnMap& map, size_t head, size_t lead) {
    const size_t H = map.shape[1], T = map.shape[2];
    const double* base = map.values.data() + ((lead * H + head) * T) * T;
    std::string body;
    for (size_t i = 0; i < T; ++i) {
        for (size_t j = 0; j < T; ++j) {
            if (j) body += ',';
            body += fmt(base[i * T + j]);
        }
        body += '\n';
    }
    return body;
}

// One lead: the window signal as a polyline over per-token heat rectangles
// whose intensity follows the CLS row (attention from token 0 to each
// contextual token), which is exactly its nearest-neighbor upsampling to
// signal length.
std::string lead_svg(const float* signal, size_t W, const std::vector<double>& cls_row,
                     size_t lead) {
    const double width = 1000.0, height = 220.0, pad = 10.0;
    float lo = signal[0], hi = signal[0];
    for (size_t i = 1; i < W; ++i) {
        lo = std::min(lo, signal[i]);
        hi = std::max(hi, signal[i]);
    }
    const double range = hi - lo > 0 ? hi - lo : 1.0;
    double amax = 0;
    for (double a : cls_row) amax = std::max(amax, a);
    if (amax <= 0) amax = 1.0;

    std::string body;
    body += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width, "%g") +
            "\" height=\"" + fmt(height, "%g") + "\">\n";
    body += "<title>lead " + std::to_string(lead) + "</title>\n";
    body += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const size_t N = cls_row.size();
    for (size_t t = 0; t < N; ++t) {
        const double x0 = t * width / static_cast<double>(N);
        const double x1 = (t + 1) * width / static_cast<double>(N);
        body += "<rect x=\"" + fmt(x0, "%.6g") + "\" y=\"0\" width=\"" +
                fmt(x1 - x0, "%.6g") + "\" height=\"" + fmt(height, "%g") +
                "\" fill=\"#d62728\" fill-opacity=\"" +
                fmt(cls_row[t] / amax, "%.6g") + "\"/>\n";
    }
    body += "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"";
    for (size_t i = 0; i < W; ++i) {
        if (i) body += ' ';
        const double x = i * width / static_cast<double>(W > 1 ? W - 1 : 1);
        const double y = height - pad - (signal[i] - lo) / range * (height - 2 * pad);
        body += fmt(x, "%.6g") + "," + fmt(y, "%.6g");
    }
    body += "\"/>\n</svg>\n";
    return body;
}

template <class T>
std::vector<std::string> export_impl(const CheckpointData& ck, const TrainConfig& cfg,
                                     const Recording& recording,
                                     const std::string& out_dir,
                                     std::vector<std::string> class_names) {
    std::mt19937 init_rng = derive_rng(cfg.seed, "init");
    ModelParams<T> model = ModelParams<T>::init(cfg.model, init_rng);
    for (auto& [name, p] : model.named()) {
        const TensorBlob* blob = ck.find("param." + name);
        if (!blob) throw ValueError("checkpoint lacks tensor 'param." + name + "'");
        blob_into(*blob, p);
    }

    const Recording window =
        crop_at(preprocess(recording, cfg.pipe), 0, cfg.pipe.segment_samples());
    const size_t C = cfg.model.enc.leads, W = window.n_samples;
    const size_t N_cls = cfg.model.n_classes;
    Tensor<T> x = Tensor<T>::zeros({1, C, W});
    for (size_t i = 0; i < C * W; ++i)
        x.values()[i] = static_cast<T>(window.signal[i]);

    Tensor<T> wide;
    const Tensor<T>* wide_ptr = nullptr;
    if (cfg.model.wide_dim > 0) {
        if (cfg.wide_features.empty())
            throw ConfigError("checkpoint expects wide features but the config "
                              "names no file");
        const auto feats = load_wide_features(cfg.wide_features);
        const auto it = feats.find(recording.id);
        if (it == feats.end())
            throw ValueError("no wide features for recording '" + recording.id + "'");
        wide = Tensor<T>::zeros({size_t{1}, cfg.model.wide_dim});
        for (size_t k = 0; k < cfg.model.wide_dim; ++k)
            wide.values()[k] = static_cast<T>(it->second[k]);
        wide_ptr = &wide;
    }

    // The attribution matrix comes from the gated head even for checkpoints
    // trained with the pooled head; the gate parameters always exist.
    ModelConfig mcfg = cfg.model;
    mcfg.head = HeadKind::kGated;
    AttnRecord record;
    const ModelOutput<T> out = model_forward(mcfg, model, x, wide_ptr, &record);

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    for (size_t s = 0; s < kStages; ++s) {
        for (size_t l = 0; l < record.stages[s].size(); ++l) {
            const AttnMap& map = record.stages[s][l];
            for (size_t h = 0; h < cfg.model.stage.heads; ++h) {
                for (size_t c = 0; c < C; ++c) {
                    const std::string name = "stage" + std::to_string(s) + "_layer" +
                                             std::to_string(l) + "_head" +
                                             std::to_string(h) + "_lead" +
                                             std::to_string(c) + ".csv";
                    write_file(out_dir + "/" + name, attn_csv(map, h, c));
                    files.push_back(name);
                }
            }
        }
    }

    if (class_names.empty())
        for (size_t i = 0; i < N_cls; ++i)
            class_names.push_back("class_" + std::to_string(i));
    if (class_names.size() != N_cls)
        throw ValueError("expected " + std::to_string(N_cls) + " class names, got " +
                         std::to_string(class_names.size()));
    std::string attr = "class";
    for (size_t c = 0; c < C; ++c) attr += ",lead" + std::to_string(c);
    attr += '\n';
    for (size_t i = 0; i < N_cls; ++i) {
        attr += class_names[i];
        for (size_t c = 0; c < C; ++c)
            attr += "," + fmt(out.lead_attn.values()[i * C + c]);
        attr += '\n';
    }
    write_file(out_dir + "/lead_attribution.csv", attr);
    files.push_back("lead_attribution.csv");

    // SVG overlay: head-averaged CLS row of the deepest stage that has layers.
    size_t svg_stage = kStages;
    for (size_t s = kStages; s-- > 0;)
        if (!record.stages[s].empty()) {
            svg_stage = s;
            break;
        }
    for (size_t c = 0; c < C; ++c) {
        std::vector<double> cls_row;
        if (svg_stage < kStages) {
            const AttnMap& map = record.stages[svg_stage].back();
            const size_t H = map.shape[1], Tn = map.shape[2];
            cls_row.assign(Tn - 1, 0.0);
            for (size_t h = 0; h < H; ++h) {
                const double* row = map.values.data() + ((c * H + h) * Tn) * Tn;
                for (size_t j = 1; j < Tn; ++j) cls_row[j - 1] += row[j] / H;
            }
        } else {
            cls_row.assign(1, 0.0);
        }
        const std::string name = "lead" + std::to_string(c) + ".svg";
        write_file(out_dir + "/" + name,
                   lead_svg(window.lead_ptr(c), W, cls_row, c));
        files.push_back(name);
    }
    return files;
}

}  // namespace

std::vector<std::string> export_attention(const std::string& checkpoint_path,
                                          const Recording& recording,
                                          const std::string& out_dir,
                                          const std::vector<std::string>& class_names) {
    const CheckpointData ck = load_checkpoint(checkpoint_path);
    const TrainConfig cfg = train_config_from_json(ck.config_json);
    return cfg.precision == "f64"
               ? export_impl<double>(ck, cfg, recording, out_dir, class_names)
               : export_impl<float>(ck, cfg, recording, out_dir, class_names);
}

}  // namespace ecgformer
