#pragma once

// Multi-lead ECG container and the preprocessing chain: resample to the
// target rate, zero-phase FIR bandpass, per-lead z-score, fixed-length
// crop or pad.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ecgformer/errors.hpp"

namespace ecgformer {

// One recording: lead-major sample matrix [leads x n_samples] in millivolts.
struct Recording {
    std::string id;
    double fs = 0.0;
    size_t leads = 0;
    size_t n_samples = 0;
    std::vector<float> signal;
    std::vector<int> labels;
    std::map<std::string, std::string> source_meta;

    float& at(size_t lead, size_t t) { return signal[lead * n_samples + t]; }
    float at(size_t lead, size_t t) const { return signal[lead * n_samples + t]; }
    const float* lead_ptr(size_t lead) const { return signal.data() + lead * n_samples; }

    // Enforces C >= 1, L >= 1, fs > 0, finite samples, consistent sizes.
    void validate() const;
};

struct PipelineConfig {
    double target_fs = 500.0;
    double segment_seconds = 15.0;
    double bandpass_low = 0.5;
    double bandpass_high = 40.0;
    int fir_taps = 101;
    bool normalize = true;

    // Samples per segment after preprocessing.
    size_t segment_samples() const;
    void validate() const;
};

// New length round(L * target_fs / fs), linear interpolation per lead,
// holding the last sample beyond the input's right edge.
Recording resample_linear(const Recording& rec, double target_fs);

// Hamming-windowed-sinc bandpass taps (difference of two unit-DC-gain
// lowpasses), normalized so the passband is flat and DC is rejected exactly.
std::vector<double> design_bandpass(double low_hz, double high_hz, double fs,
                                    int taps);

// Zero-phase application: filter, reverse, filter, reverse, with reflect
// padding of (taps - 1) samples on each side and the result trimmed back
// to the input length.
Recording fir_bandpass(const Recording& rec, const PipelineConfig& cfg);

// Per-lead z-score over the whole recording; constant leads map to zeros
// through a standard-deviation floor of 1e-8.
Recording zscore_normalize(const Recording& rec);

// Output length exactly round(T * fs): longer inputs get a uniformly random
// window, shorter ones zero padding appended at the end.
Recording crop_or_pad(const Recording& rec, double segment_seconds,
                      std::mt19937& rng);

// resample -> bandpass -> (optional) z-score. Cropping is separate because
// training redraws windows each epoch while evaluation tiles them.
Recording preprocess(const Recording& rec, const PipelineConfig& cfg);

// Deterministic evenly spaced crop starts covering the recording with
// ceil(L / W) windows of W samples; a single 0 when L <= W.
std::vector<size_t> eval_crop_starts(size_t length, size_t window);

// Fixed window starting at `start` (zero padded past the end).
Recording crop_at(const Recording& rec, size_t start, size_t window);

}  // namespace ecgformer
