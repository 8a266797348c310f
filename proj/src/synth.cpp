#include "ecgformer/synth.hpp"

#include <cmath>
#include <cstdio>

#include "ecgformer/rng.hpp"

namespace ecgformer {

void SyntheticSpec::validate() const {
    if (n_recordings < 1) throw ConfigError("synth: n_recordings must be >= 1");
    if (leads < 1) throw ConfigError("synth: leads must be >= 1");
    if (!(duration_s > 0) || !(fs > 0))
        throw ConfigError("synth: duration and fs must be positive");
    if (!(0 < bpm_low && bpm_low <= bpm_high))
        throw ConfigError("synth: need 0 < bpm_low <= bpm_high");
    if (noise_std < 0) throw ConfigError("synth: noise_std must be >= 0");
    if (classes.empty()) throw ConfigError("synth: at least one class required");
    for (const auto& c : classes)
        for (size_t w = 0; w < kWavelets; ++w)
            if (!(c.width_mult[w] > 0))
                throw ConfigError("synth: width multipliers must be positive");
}

Recording synth_one(const SyntheticSpec& spec, size_t index) {
    spec.validate();
    std::mt19937 rng = derive_rng(spec.seed, "synth", index);
    const size_t cls = index % spec.classes.size();
    const ClassMorphology& morph = spec.classes[cls];

    const double bpm = rng_uniform(rng, spec.bpm_low, spec.bpm_high);
    const double period = 60.0 / bpm;
    const size_t L = static_cast<size_t>(std::llround(spec.duration_s * spec.fs));

    Recording rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%06zu", index);
    rec.id = buf;
    rec.fs = spec.fs;
    rec.leads = spec.leads;
    rec.n_samples = L;
    rec.labels = {static_cast<int>(cls)};
    rec.source_meta["class"] = morph.name;
    rec.source_meta["bpm"] = std::to_string(bpm);
    rec.signal.assign(spec.leads * L, 0.0f);

    const long n_beats =
        static_cast<long>(std::ceil(spec.duration_s / period)) + 1;
    for (size_t c = 0; c < spec.leads; ++c) {
        const double gain = rng_uniform(rng, 0.6, 1.4);
        std::vector<double> lead(L, 0.0);
        for (long k = -1; k <= n_beats; ++k) {
            const double r_center = (0.3 + k) * period;
            for (size_t w = 0; w < kWavelets; ++w) {
                const double amp = kWaveletAmpMv[w] * morph.amp_mult[w] * gain;
                const double width = kWaveletWidthS[w] * morph.width_mult[w];
                const double center = r_center + kWaveletOffsetS[w];
                const long t0 = std::max(
                    0L, static_cast<long>(std::floor((center - 4 * width) * spec.fs)));
                const long t1 = std::min(
                    static_cast<long>(L) - 1,
                    static_cast<long>(std::ceil((center + 4 * width) * spec.fs)));
                for (long t = t0; t <= t1; ++t) {
                    const double dt = t / spec.fs - center;
                    lead[t] += amp * std::exp(-dt * dt / (2 * width * width));
                }
            }
        }
        for (size_t t = 0; t < L; ++t) {
            const double noise =
                spec.noise_std > 0 ? spec.noise_std * rng_gauss(rng) : 0.0;
            rec.at(c, t) = static_cast<float>(lead[t] + noise);
        }
    }
    return rec;
}

std::vector<Recording> synth_generate(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<Recording> out;
    out.reserve(spec.n_recordings);
    for (size_t i = 0; i < spec.n_recordings; ++i)
        out.push_back(synth_one(spec, i));
    return out;
}

}  // namespace ecgformer
