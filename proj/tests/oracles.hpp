#pragma once

// Deliberately naive metric reimplementations used as independent oracles.
// Everything here favors obviousness over speed: set scans, O(n^2) pair
// counting, no shared code with the library implementations.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace oracle {

inline bool contains(const std::vector<int>& set, int x) {
    return std::find(set.begin(), set.end(), x) != set.end();
}

struct Counts {
    double tp = 0, fp = 0, fn = 0, tn = 0;
};

inline std::vector<Counts> counts(const std::vector<std::vector<int>>& truth,
                                  const std::vector<std::vector<int>>& pred,
                                  size_t n_classes) {
    std::vector<Counts> out(n_classes);
    for (size_t r = 0; r < truth.size(); ++r) {
        for (size_t c = 0; c < n_classes; ++c) {
            const bool t = contains(truth[r], static_cast<int>(c));
            const bool p = contains(pred[r], static_cast<int>(c));
            if (t && p) out[c].tp += 1;
            if (!t && p) out[c].fp += 1;
            if (t && !p) out[c].fn += 1;
            if (!t && !p) out[c].tn += 1;
        }
    }
    return out;
}

inline double fbeta(const Counts& c, double beta) {
    const double num = (1 + beta * beta) * c.tp;
    const double den = num + c.fp + beta * beta * c.fn;
    return den == 0 ? 0 : num / den;
}

inline double gbeta(const Counts& c, double beta) {
    const double den = c.tp + c.fp + beta * c.fn;
    return den == 0 ? 0 : c.tp / den;
}

inline std::vector<double> confusion(const std::vector<std::vector<int>>& truth,
                                     const std::vector<std::vector<int>>& pred,
                                     size_t n) {
    std::vector<double> a(n * n, 0.0);
    for (size_t r = 0; r < truth.size(); ++r) {
        std::vector<int> uni = truth[r];
        for (int x : pred[r])
            if (!contains(uni, x)) uni.push_back(x);
        const double share = 1.0 / std::max<size_t>(1, uni.size());
        for (int i : pred[r])
            for (int j : truth[r]) a[i * n + j] += share;
    }
    return a;
}

inline double raw_score(const std::vector<std::vector<int>>& truth,
                        const std::vector<std::vector<int>>& pred,
                        const std::vector<double>& w, size_t n) {
    const auto a = confusion(truth, pred, n);
    double s = 0;
    for (size_t k = 0; k < n * n; ++k) s += w[k] * a[k];
    return s;
}

inline double normalized_score(const std::vector<std::vector<int>>& truth,
                               const std::vector<std::vector<int>>& pred,
                               const std::vector<double>& w, size_t n) {
    const double s = raw_score(truth, pred, w, n);
    const double s_true = raw_score(truth, truth, w, n);
    const double s_inactive =
        raw_score(truth, std::vector<std::vector<int>>(truth.size()), w, n);
    return s_true == s_inactive ? 0 : (s - s_inactive) / (s_true - s_inactive);
}

// Pairwise concordance with ties at 0.5; classes lacking a positive or a
// negative are skipped.
inline double macro_auc(const std::vector<double>& scores,
                        const std::vector<std::vector<int>>& truth,
                        size_t n_classes) {
    double sum = 0;
    size_t scored = 0;
    const size_t R = truth.size();
    for (size_t c = 0; c < n_classes; ++c) {
        std::vector<double> pos, neg;
        for (size_t r = 0; r < R; ++r) {
            const double s = scores[r * n_classes + c];
            if (contains(truth[r], static_cast<int>(c))) pos.push_back(s);
            else neg.push_back(s);
        }
        if (pos.empty() || neg.empty()) continue;
        double conc = 0;
        for (double p : pos)
            for (double q : neg) conc += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
        sum += conc / (pos.size() * neg.size());
        ++scored;
    }
    return scored == 0 ? 0 : sum / scored;
}

}  // namespace oracle
