#include "ecgformer/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ecgformer/rng.hpp"

namespace ecgformer {

void Recording::validate() const {
    if (leads < 1 || n_samples < 1)
        throw ValueError("recording '" + id + "' must have at least one lead and one sample");
    if (!(fs > 0)) throw ValueError("recording '" + id + "' has non-positive sampling rate");
    if (signal.size() != leads * n_samples)
        throw ValueError("recording '" + id + "' signal size " +
                         std::to_string(signal.size()) + " != leads*samples " +
                         std::to_string(leads * n_samples));
    for (float v : signal)
        if (!std::isfinite(v))
            throw ValueError("recording '" + id + "' contains non-finite samples");
}

size_t PipelineConfig::segment_samples() const {
    return static_cast<size_t>(std::llround(segment_seconds * target_fs));
}

void PipelineConfig::validate() const {
    if (!(target_fs > 0)) throw ConfigError("target_fs must be positive");
    if (!(segment_seconds > 0)) throw ConfigError("segment_seconds must be positive");
    if (!(0 < bandpass_low && bandpass_low < bandpass_high &&
          bandpass_high < target_fs / 2))
        throw ConfigError("bandpass must satisfy 0 < low < high < target_fs/2");
    if (fir_taps < 3 || fir_taps % 2 == 0)
        throw ConfigError("fir_taps must be odd and >= 3");
}

Recording resample_linear(const Recording& rec, double target_fs) {
    if (!(target_fs > 0)) throw ConfigError("target_fs must be positive");
    if (rec.fs == target_fs) return rec;
    const double ratio = target_fs / rec.fs;
    const size_t L = rec.n_samples;
    const size_t Ln = static_cast<size_t>(std::llround(L * ratio));

    Recording out = rec;
    out.fs = target_fs;
    out.n_samples = Ln;
    out.signal.assign(rec.leads * Ln, 0.0f);
    for (size_t c = 0; c < rec.leads; ++c) {
        const float* src = rec.lead_ptr(c);
        for (size_t t = 0; t < Ln; ++t) {
            const double pos = t / ratio;
            const size_t i0 = std::min(static_cast<size_t>(pos), L - 1);
            const size_t i1 = std::min(i0 + 1, L - 1);
            const double frac = pos - static_cast<double>(i0);
            out.at(c, t) = static_cast<float>(src[i0] + frac * (src[i1] - src[i0]));
        }
    }
    return out;
}

namespace {

// Unit-DC-gain Hamming-windowed-sinc lowpass.
std::vector<double> design_lowpass(double cutoff_hz, double fs, int taps) {
    const int mid = taps / 2;
    const double fc = cutoff_hz / fs;
    std::vector<double> h(taps);
    double sum = 0.0;
    for (int n = 0; n < taps; ++n) {
        const int k = n - mid;
        const double sinc = (k == 0) ? 2.0 * fc
                                     : std::sin(2.0 * std::numbers::pi * fc * k) /
                                           (std::numbers::pi * k);
        const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
        h[n] = sinc * w;
        sum += h[n];
    }
    for (double& v : h) v /= sum;
    return h;
}

std::vector<double> apply_fir_reflect(const std::vector<double>& x,
                                      const std::vector<double>& h) {
    const size_t L = x.size(), K = h.size(), pad = K - 1;
    // Reflect padding (without repeating the edge sample).
    std::vector<double> ext(L + 2 * pad);
    for (size_t i = 0; i < pad; ++i)
        ext[i] = x[std::min(pad - i, L - 1)];
    std::copy(x.begin(), x.end(), ext.begin() + pad);
    for (size_t i = 0; i < pad; ++i)
        ext[pad + L + i] = x[L - 2 - std::min(i, L - 2)];

    // Causal convolution, then drop the K-1 group delay so y aligns with x.
    std::vector<double> y(L);
    for (size_t t = 0; t < L; ++t) {
        double acc = 0.0;
        const double* xe = ext.data() + t + pad;
        for (size_t k = 0; k < K; ++k) acc += h[k] * xe[pad - k];
        y[t] = acc;
    }
    return y;
}

}  // namespace

std::vector<double> design_bandpass(double low_hz, double high_hz, double fs,
                                    int taps) {
    // Both lowpasses have exactly unit DC gain, so their difference has
    // exactly zero DC gain and the passband sits near unity.
    const auto lp_high = design_lowpass(high_hz, fs, taps);
    const auto lp_low = design_lowpass(low_hz, fs, taps);
    std::vector<double> h(taps);
    for (int n = 0; n < taps; ++n) h[n] = lp_high[n] - lp_low[n];
    return h;
}

Recording fir_bandpass(const Recording& rec, const PipelineConfig& cfg) {
    cfg.validate();
    const size_t K = static_cast<size_t>(cfg.fir_taps);
    if (rec.n_samples < K)
        throw ValueError("recording '" + rec.id + "' shorter than FIR length " +
                         std::to_string(K));
    const auto h = design_bandpass(cfg.bandpass_low, cfg.bandpass_high, rec.fs,
                                   cfg.fir_taps);
    Recording out = rec;
    std::vector<double> lead(rec.n_samples);
    for (size_t c = 0; c < rec.leads; ++c) {
        for (size_t t = 0; t < rec.n_samples; ++t) lead[t] = rec.at(c, t);
        lead = apply_fir_reflect(lead, h);
        std::reverse(lead.begin(), lead.end());
        lead = apply_fir_reflect(lead, h);
        std::reverse(lead.begin(), lead.end());
        for (size_t t = 0; t < rec.n_samples; ++t)
            out.at(c, t) = static_cast<float>(lead[t]);
    }
    return out;
}

Recording zscore_normalize(const Recording& rec) {
    Recording out = rec;
    const double n = static_cast<double>(rec.n_samples);
    for (size_t c = 0; c < rec.leads; ++c) {
        double mean = 0.0;
        for (size_t t = 0; t < rec.n_samples; ++t) mean += rec.at(c, t);
        mean /= n;
        double var = 0.0;
        for (size_t t = 0; t < rec.n_samples; ++t) {
            const double d = rec.at(c, t) - mean;
            var += d * d;
        }
        const double sd = std::max(std::sqrt(var / n), 1e-8);
        for (size_t t = 0; t < rec.n_samples; ++t)
            out.at(c, t) = static_cast<float>((rec.at(c, t) - mean) / sd);
    }
    return out;
}

Recording crop_at(const Recording& rec, size_t start, size_t window) {
    Recording out = rec;
    out.n_samples = window;
    out.signal.assign(rec.leads * window, 0.0f);
    for (size_t c = 0; c < rec.leads; ++c)
        for (size_t t = 0; t < window; ++t) {
            const size_t s = start + t;
            if (s < rec.n_samples) out.at(c, t) = rec.at(c, s);
        }
    return out;
}

Recording crop_or_pad(const Recording& rec, double segment_seconds,
                      std::mt19937& rng) {
    if (!(segment_seconds > 0)) throw ConfigError("segment_seconds must be positive");
    const size_t W = static_cast<size_t>(std::llround(segment_seconds * rec.fs));
    size_t start = 0;
    if (rec.n_samples > W) start = rng_index(rng, rec.n_samples - W + 1);
    return crop_at(rec, start, W);
}

Recording preprocess(const Recording& rec, const PipelineConfig& cfg) {
    cfg.validate();
    rec.validate();
    Recording out = resample_linear(rec, cfg.target_fs);
    out = fir_bandpass(out, cfg);
    if (cfg.normalize) out = zscore_normalize(out);
    return out;
}

std::vector<size_t> eval_crop_starts(size_t length, size_t window) {
    if (length <= window) return {0};
    const size_t k = (length + window - 1) / window;
    std::vector<size_t> starts(k);
    for (size_t i = 0; i < k; ++i)
        starts[i] = static_cast<size_t>(
            std::llround(static_cast<double>(i) * (length - window) / (k - 1)));
    return starts;
}

}  // namespace ecgformer
