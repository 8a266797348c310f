#pragma once

// Synthetic multi-lead ECG generator: per beat, five Gaussian wavelets
// (P, Q, R, S, T) at a sampled heart rate, plus white noise. Class
// morphologies scale selected wavelet amplitudes/widths, which gives a
// desk-scale classification task with a known ground truth.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgformer/signal.hpp"

namespace ecgformer {

// Wavelet order used throughout: P, Q, R, S, T.
constexpr size_t kWavelets = 5;
constexpr std::array<const char*, kWavelets> kWaveletNames{"P", "Q", "R", "S", "T"};

// Baseline morphology: center offset from the R peak (seconds), amplitude
// (millivolts), Gaussian width (seconds).
constexpr std::array<double, kWavelets> kWaveletOffsetS{-0.20, -0.035, 0.0, 0.035, 0.30};
constexpr std::array<double, kWavelets> kWaveletAmpMv{0.15, -0.10, 1.00, -0.25, 0.30};
constexpr std::array<double, kWavelets> kWaveletWidthS{0.040, 0.012, 0.014, 0.014, 0.060};

struct ClassMorphology {
    std::string name = "normal";
    std::array<double, kWavelets> amp_mult{1, 1, 1, 1, 1};
    std::array<double, kWavelets> width_mult{1, 1, 1, 1, 1};
};

struct SyntheticSpec {
    size_t n_recordings = 100;
    size_t leads = 12;
    double duration_s = 10.0;
    double fs = 500.0;
    double bpm_low = 55.0;
    double bpm_high = 95.0;
    double noise_std = 0.05;
    std::vector<ClassMorphology> classes{ClassMorphology{}};
    uint64_t seed = 0;

    void validate() const;
};

// Deterministic per (seed, index); labels assigned round-robin over classes.
std::vector<Recording> synth_generate(const SyntheticSpec& spec);

// Single recording, exposed so callers can stream large datasets.
Recording synth_one(const SyntheticSpec& spec, size_t index);

}  // namespace ecgformer
