// Python bindings for the core operations: tensor primitives at value
// level, the challenge metrics, signal preprocessing, the synthetic
// generator, checkpoint scoring, and the gradient suite.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "ecgformer/config.hpp"
#include "ecgformer/dataset.hpp"
#include "ecgformer/gradsuite.hpp"
#include "ecgformer/metrics.hpp"
#include "ecgformer/synth.hpp"
#include "ecgformer/tensor.hpp"
#include "ecgformer/train.hpp"

namespace py = pybind11;
using namespace ecgformer;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Arr& a) {
    Shape shape(static_cast<size_t>(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i)
        shape[static_cast<size_t>(i)] = static_cast<size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor<double>::from(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const Tensor<double>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

Recording to_recording(const Arr& x, double fs) {
    if (x.ndim() != 2) throw ShapeError("signal must be [leads, samples]");
    Recording rec;
    rec.id = "py";
    rec.fs = fs;
    rec.leads = static_cast<size_t>(x.shape(0));
    rec.n_samples = static_cast<size_t>(x.shape(1));
    rec.signal.assign(x.data(), x.data() + x.size());
    rec.validate();
    return rec;
}

py::array_t<double> from_recording(const Recording& rec) {
    py::array_t<double> out({static_cast<py::ssize_t>(rec.leads),
                             static_cast<py::ssize_t>(rec.n_samples)});
    std::copy(rec.signal.begin(), rec.signal.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "ecgformer core operations";

    py::register_exception<ValueError>(m, "EcgValueError", PyExc_ValueError);
    py::register_exception<IoError>(m, "EcgIoError", PyExc_IOError);

    m.def(
        "softmax", [](const Arr& x) { return to_array(softmax_lastdim(to_tensor(x))); },
        py::arg("x"), "Softmax over the last axis.");
    m.def(
        "layer_norm",
        [](const Arr& x, const Arr& gain, const Arr& shift, double eps) {
            return to_array(layer_norm(to_tensor(x), to_tensor(gain),
                                       to_tensor(shift), eps));
        },
        py::arg("x"), py::arg("gain"), py::arg("shift"), py::arg("eps") = 1e-5,
        "Layer normalization over the last axis.");
    m.def(
        "matmul",
        [](const Arr& a, const Arr& b) {
            return to_array(matmul(to_tensor(a), to_tensor(b)));
        },
        py::arg("a"), py::arg("b"),
        "Matrix product; rank-2 b is a shared weight, rank-3 is batched.");
    m.def(
        "conv1d",
        [](const Arr& x, const Arr& kernels, const Arr& bias, size_t stride,
           size_t groups, size_t padding) {
            return to_array(grouped_conv1d(to_tensor(x), to_tensor(kernels),
                                           to_tensor(bias), stride, groups,
                                           padding));
        },
        py::arg("x"), py::arg("kernels"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("groups") = 1, py::arg("padding") = 0,
        "Grouped 1-D convolution over [B, C, L].");

    m.def(
        "fbeta",
        [](double tp, double fp, double fn, double tn, double beta) {
            return fbeta(ConfusionCounts{tp, fp, fn, tn}, beta);
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0.0,
        py::arg("beta") = 2.0);
    m.def(
        "gbeta",
        [](double tp, double fp, double fn, double tn, double beta) {
            return gbeta(ConfusionCounts{tp, fp, fn, tn}, beta);
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0.0,
        py::arg("beta") = 2.0);
    m.def(
        "challenge_score",
        [](const std::vector<std::vector<int>>& truth,
           const std::vector<std::vector<int>>& pred, const Arr& weights,
           size_t n_classes) {
            const auto s = challenge_score(
                truth, pred,
                std::vector<double>(weights.data(), weights.data() + weights.size()),
                n_classes);
            return py::make_tuple(s.raw, s.normalized);
        },
        py::arg("truth"), py::arg("pred"), py::arg("weights"),
        py::arg("n_classes"), "Returns (raw, normalized) challenge score.");
    m.def(
        "macro_auc",
        [](const Arr& scores, const std::vector<std::vector<int>>& truth,
           size_t n_classes) {
            return macro_auc(
                std::vector<double>(scores.data(), scores.data() + scores.size()),
                truth, n_classes);
        },
        py::arg("scores"), py::arg("truth"), py::arg("n_classes"));

    m.def(
        "resample",
        [](const Arr& x, double fs, double target_fs) {
            return from_recording(resample_linear(to_recording(x, fs), target_fs));
        },
        py::arg("x"), py::arg("fs"), py::arg("target_fs"));
    m.def("design_bandpass", &design_bandpass, py::arg("low_hz"), py::arg("high_hz"),
          py::arg("fs"), py::arg("taps"));
    m.def(
        "preprocess",
        [](const Arr& x, double fs, double target_fs, double low, double high,
           int taps, bool normalize) {
            PipelineConfig cfg;
            cfg.target_fs = target_fs;
            cfg.bandpass_low = low;
            cfg.bandpass_high = high;
            cfg.fir_taps = taps;
            cfg.normalize = normalize;
            return from_recording(preprocess(to_recording(x, fs), cfg));
        },
        py::arg("x"), py::arg("fs"), py::arg("target_fs") = 500.0,
        py::arg("low") = 0.5, py::arg("high") = 40.0, py::arg("taps") = 101,
        py::arg("normalize") = true,
        "Resample, zero-phase bandpass, and z-score a [leads, samples] array.");

    m.def(
        "synth_recording",
        [](const std::string& spec_json, size_t index) {
            const Recording rec = synth_one(synth_spec_from_json(spec_json), index);
            py::dict out;
            out["id"] = rec.id;
            out["fs"] = rec.fs;
            out["labels"] = rec.labels;
            out["signal"] = from_recording(rec);
            return out;
        },
        py::arg("spec_json"), py::arg("index"),
        "One synthetic recording from a SyntheticSpec JSON string.");

    m.def(
        "forward_scores",
        [](const std::string& checkpoint, const std::string& recording_json) {
            namespace fs = std::filesystem;
            DatasetManifest manifest;
            manifest.entries.push_back(ManifestEntry{
                fs::path(recording_json).filename().string(), {}, -1});
            Predictions preds;
            evaluate(checkpoint, manifest,
                     fs::path(recording_json).parent_path().string(), -1, nullptr,
                     &preds);
            return preds.scores;
        },
        py::arg("checkpoint"), py::arg("recording_json"),
        "Crop-averaged sigmoid class scores for one recording.");

    m.def(
        "gradient_suite",
        [](uint64_t seed, size_t instances) {
            py::list out;
            for (const auto& e : run_gradient_suite(seed, instances).entries) {
                py::dict d;
                d["name"] = e.name;
                d["instances"] = e.instances;
                d["max_rel_err"] = e.max_rel_err;
                d["tolerance"] = e.tolerance;
                d["pass"] = e.pass;
                out.append(d);
            }
            return out;
        },
        py::arg("seed") = 0, py::arg("instances") = 10);
}
