#pragma once

// Central finite-difference gradient checking. This is the independent
// oracle for every backward rule: analytic gradients come from one taped
// pass, numeric ones from two untaped forward evaluations per coordinate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "ecgformer/tensor.hpp"

namespace ecgformer {

// f rebuilds a scalar loss from the current parameter values. Returns the
// maximum over sampled coordinates of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
//
// A central difference resolves a gradient coordinate only when it clears
// the rounding noise eps_loss / (2h); below that both sides are noise, so
// coordinates with max(|analytic|, |numeric|) < min_grad are skipped.
// Key biases are the extreme case: softmax is invariant to the row-constant
// shift they add, so their true gradient is identically zero.
template <class T>
double finite_diff_check(const std::function<Tensor<T>()>& f,
                         std::vector<Tensor<T>> params, double h,
                         std::mt19937& rng, size_t max_coords_per_param = 12,
                         double min_grad = 0.0) {
    if (h <= 0) throw ConfigError("finite_diff_check step h must be positive");
    TapePause<T> pause;
    for (auto& p : params) p.zero_grad();
    {
        Tape<T> tape;
        Tensor<T> loss = f();
        tape.backward(loss);
    }
    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].values();
        std::vector<size_t> coords(vals.size());
        std::iota(coords.begin(), coords.end(), size_t{0});
        if (coords.size() > max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords_per_param);
        }
        for (size_t c : coords) {
            const T orig = vals[c];
            vals[c] = orig + static_cast<T>(h);
            const double up = static_cast<double>(f().item());
            vals[c] = orig - static_cast<T>(h);
            const double down = static_cast<double>(f().item());
            vals[c] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = static_cast<double>(analytic[pi][c]);
            if (std::max(std::abs(a), std::abs(numeric)) < min_grad) continue;
            const double rel =
                std::abs(a - numeric) /
                std::max({std::abs(a), std::abs(numeric), 1e-12});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace ecgformer
