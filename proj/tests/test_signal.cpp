#include <doctest.h>

#include <cmath>

#include "ecgformer/rng.hpp"
#include "ecgformer/signal.hpp"
#include "ecgformer/synth.hpp"

using namespace ecgformer;

namespace {

Recording make_rec(std::vector<float> samples, double fs, size_t leads = 1) {
    Recording rec;
    rec.id = "t";
    rec.fs = fs;
    rec.leads = leads;
    rec.n_samples = samples.size() / leads;
    rec.signal = std::move(samples);
    return rec;
}

// Peak-to-peak amplitude over the central half of a lead.
double central_amplitude(const Recording& rec, size_t lead) {
    const size_t L = rec.n_samples;
    float lo = rec.at(lead, L / 4), hi = lo;
    for (size_t t = L / 4; t < 3 * L / 4; ++t) {
        lo = std::min(lo, rec.at(lead, t));
        hi = std::max(hi, rec.at(lead, t));
    }
    return (hi - lo) / 2.0;
}

std::vector<float> sine(double hz, double fs, size_t n) {
    std::vector<float> out(n);
    for (size_t t = 0; t < n; ++t)
        out[t] = static_cast<float>(std::sin(2.0 * M_PI * hz * t / fs));
    return out;
}

}  // namespace

TEST_CASE("resample: identity, constants, frozen ramp") {
    Recording ramp = make_rec({0, 1, 2, 3}, 250);

    Recording same = resample_linear(ramp, 250);
    CHECK(same.signal == ramp.signal);
    CHECK(same.fs == 250);

    Recording consts = resample_linear(make_rec({2, 2, 2, 2, 2}, 500), 180);
    for (float v : consts.signal) CHECK(v == doctest::Approx(2.0f).epsilon(1e-7));

    Recording up = resample_linear(ramp, 500);
    REQUIRE(up.n_samples == 8);
    const std::vector<float> want{0, 0.5, 1, 1.5, 2, 2.5, 3, 3};
    for (size_t i = 0; i < 8; ++i)
        CHECK(up.signal[i] == doctest::Approx(want[i]).epsilon(1e-7));
}

TEST_CASE("fir_bandpass frequency response") {
    PipelineConfig cfg;
    cfg.target_fs = 500;
    cfg.bandpass_low = 0.5;
    cfg.bandpass_high = 40;
    cfg.fir_taps = 101;

    Recording dc = fir_bandpass(make_rec(std::vector<float>(2000, 1.0f), 500), cfg);
    for (size_t t = 200; t < 1800; ++t) CHECK(std::abs(dc.at(0, t)) < 0.01);

    Recording mid = fir_bandpass(make_rec(sine(10, 500, 2000), 500), cfg);
    CHECK(central_amplitude(mid, 0) == doctest::Approx(1.0).epsilon(0.02));

    Recording high = fir_bandpass(make_rec(sine(100, 500, 2000), 500), cfg);
    CHECK(central_amplitude(high, 0) < 0.05);

    CHECK_THROWS_AS(fir_bandpass(make_rec(std::vector<float>(50, 0.0f), 500), cfg),
                    ValueError);
}

TEST_CASE("zscore: floor, frozen pair, idempotence") {
    Recording flat = zscore_normalize(make_rec({1, 1, 1, 1}, 100));
    for (float v : flat.signal) CHECK(v == 0.0f);

    Recording pair = zscore_normalize(make_rec({0, 2}, 100));
    CHECK(pair.signal[0] == doctest::Approx(-1.0f).epsilon(1e-6));
    CHECK(pair.signal[1] == doctest::Approx(1.0f).epsilon(1e-6));

    std::mt19937 rng = derive_rng(20, "zscore");
    std::vector<float> noise(400);
    for (auto& v : noise) v = static_cast<float>(3.0 + 2.0 * rng_gauss(rng));
    Recording once = zscore_normalize(make_rec(noise, 100, 2));
    Recording twice = zscore_normalize(once);
    for (size_t i = 0; i < once.signal.size(); ++i)
        CHECK(twice.signal[i] == doctest::Approx(once.signal[i]).epsilon(1e-6));
}

TEST_CASE("crop_or_pad") {
    std::vector<float> ten_s(5000);
    for (size_t i = 0; i < ten_s.size(); ++i) ten_s[i] = static_cast<float>(i % 97);

    std::mt19937 rng = derive_rng(21, "crop");
    Recording padded = crop_or_pad(make_rec(ten_s, 500), 15.0, rng);
    REQUIRE(padded.n_samples == 7500);
    for (size_t i = 0; i < 5000; ++i) CHECK(padded.signal[i] == ten_s[i]);
    for (size_t i = 5000; i < 7500; ++i) CHECK(padded.signal[i] == 0.0f);

    Recording exact_in = make_rec(ten_s, 500);
    std::mt19937 rng2 = derive_rng(21, "crop2");
    Recording exact = crop_or_pad(exact_in, 10.0, rng2);
    CHECK(exact.signal == exact_in.signal);

    std::vector<float> twenty_s(10000);
    for (size_t i = 0; i < twenty_s.size(); ++i) twenty_s[i] = static_cast<float>(i);
    std::mt19937 ra = derive_rng(22, "crop3");
    std::mt19937 rb = derive_rng(22, "crop3");
    Recording w1 = crop_or_pad(make_rec(twenty_s, 500), 15.0, ra);
    Recording w2 = crop_or_pad(make_rec(twenty_s, 500), 15.0, rb);
    CHECK(w1.signal == w2.signal);
    CHECK(w1.n_samples == 7500);
}

TEST_CASE("eval_crop_starts tile the recording") {
    CHECK(eval_crop_starts(100, 200) == std::vector<size_t>{0});
    CHECK(eval_crop_starts(200, 200) == std::vector<size_t>{0});

    const auto starts = eval_crop_starts(500, 200);
    REQUIRE(starts.size() == 3);
    CHECK(starts.front() == 0);
    CHECK(starts.back() == 300);
    for (size_t i = 1; i < starts.size(); ++i) CHECK(starts[i] > starts[i - 1]);
}

TEST_CASE("preprocess composes rate, filter, and normalization") {
    std::mt19937 rng = derive_rng(23, "pre");
    std::vector<float> sig(2500 * 3);
    for (auto& v : sig) v = static_cast<float>(rng_gauss(rng));
    PipelineConfig cfg;
    cfg.target_fs = 500;
    Recording out = preprocess(make_rec(sig, 250, 3), cfg);
    CHECK(out.fs == 500);
    CHECK(out.leads == 3);
    CHECK(out.n_samples == 5000);
    for (size_t c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (size_t t = 0; t < out.n_samples; ++t) mean += out.at(c, t);
        mean /= out.n_samples;
        for (size_t t = 0; t < out.n_samples; ++t) {
            const double d = out.at(c, t) - mean;
            var += d * d;
        }
        var /= out.n_samples;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("synth: clean 60 bpm gives 5 R-peaks 500 samples apart") {
    SyntheticSpec spec;
    spec.n_recordings = 1;
    spec.leads = 1;
    spec.duration_s = 5;
    spec.fs = 500;
    spec.bpm_low = 60;
    spec.bpm_high = 60;
    spec.noise_std = 0;
    spec.seed = 4;

    Recording rec = synth_one(spec, 0);
    REQUIRE(rec.n_samples == 2500);
    // The per-lead gain rescales everything, so threshold relative to the
    // tallest sample: T-waves sit near 0.3 of the R amplitude.
    float top = 0;
    for (size_t t = 0; t < rec.n_samples; ++t) top = std::max(top, rec.at(0, t));
    std::vector<size_t> peaks;
    for (size_t t = 1; t + 1 < rec.n_samples; ++t)
        if (rec.at(0, t) > 0.55f * top && rec.at(0, t) >= rec.at(0, t - 1) &&
            rec.at(0, t) > rec.at(0, t + 1))
            peaks.push_back(t);
    REQUIRE(peaks.size() == 5);
    for (size_t i = 1; i < peaks.size(); ++i)
        CHECK(peaks[i] - peaks[i - 1] == 500);
}

TEST_CASE("synth determinism") {
    SyntheticSpec spec;
    spec.n_recordings = 3;
    spec.leads = 4;
    spec.duration_s = 4;
    spec.fs = 250;
    spec.seed = 99;
    const auto a = synth_generate(spec);
    const auto b = synth_generate(spec);
    REQUIRE(a.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].signal == b[i].signal);
        CHECK(a[i].labels == b[i].labels);
    }
    CHECK(a[0].signal != a[1].signal);
}

TEST_CASE("synth two-class morphology: class 1 T-wave about 2x class 0") {
    SyntheticSpec spec;
    spec.n_recordings = 100;
    spec.leads = 2;
    spec.duration_s = 4;
    spec.fs = 500;
    spec.bpm_low = 60;
    spec.bpm_high = 60;
    spec.noise_std = 0;
    spec.seed = 7;
    ClassMorphology base;
    base.name = "normal";
    ClassMorphology peaked;
    peaked.name = "peaked-t";
    peaked.amp_mult[4] = 2.0;
    peaked.width_mult[4] = 0.6;
    spec.classes = {base, peaked};

    // R at 0.3 * period + k * period; the T wavelet peaks 0.30 s after R.
    double mean_t[2] = {0, 0};
    size_t n_t[2] = {0, 0};
    for (const Recording& rec : synth_generate(spec)) {
        const int cls = rec.labels.at(0);
        for (size_t c = 0; c < rec.leads; ++c)
            for (size_t beat = 0; beat < 3; ++beat) {
                const size_t r_peak = 150 + beat * 500;
                mean_t[cls] += rec.at(c, r_peak + 150);
                n_t[cls] += 1;
            }
    }
    mean_t[0] /= n_t[0];
    mean_t[1] /= n_t[1];
    CHECK(mean_t[1] / mean_t[0] == doctest::Approx(2.0).epsilon(0.05));
}
