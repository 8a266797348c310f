#pragma once

// Challenge evaluation metrics: F_beta and G_beta at beta = 2, the
// similarity-weighted challenge score over a multi-label confusion matrix,
// and macro-averaged AUC. All accumulation rules are the challenge ones:
// each recording contributes 1/|true vee pred| to a_ij for every
// (i in pred, j in true) pair.

#include <cstddef>
#include <string>
#include <vector>

namespace ecgformer {

struct ConfusionCounts {
    double tp = 0, fp = 0, fn = 0, tn = 0;
};

// (1+b^2) TP / ((1+b^2) TP + FP + b^2 FN); 0 when the denominator is 0.
double fbeta(const ConfusionCounts& c, double beta = 2.0);

// TP / (TP + FP + b FN); 0 when the denominator is 0.
double gbeta(const ConfusionCounts& c, double beta = 2.0);

// Per-class binary counts from label sets (one TP/FP/FN/TN unit per
// recording per class).
std::vector<ConfusionCounts> per_class_counts(
    const std::vector<std::vector<int>>& truth,
    const std::vector<std::vector<int>>& pred, size_t n_classes);

// Row-major [N x N]; a[i][j] accumulates mass for predicted class i against
// true class j.
std::vector<double> challenge_confusion(
    const std::vector<std::vector<int>>& truth,
    const std::vector<std::vector<int>>& pred, size_t n_classes);

struct ChallengeScore {
    double raw = 0;         // sum w_ij a_ij
    double normalized = 0;  // (S - S_inactive) / (S_true - S_inactive)
};

// weights: row-major [N x N]. The normalizers are computed on the same
// truth: S_true scores the perfect classifier, S_inactive the one that
// never predicts anything.
ChallengeScore challenge_score(const std::vector<std::vector<int>>& truth,
                               const std::vector<std::vector<int>>& pred,
                               const std::vector<double>& weights,
                               size_t n_classes);

// Rank-statistic AUC with ties counted 0.5. Classes without both a positive
// and a negative are skipped (indices reported via skipped when non-null);
// returns the mean over scored classes, 0 if none qualify.
double macro_auc(const std::vector<double>& scores,  // row-major [R x N]
                 const std::vector<std::vector<int>>& truth, size_t n_classes,
                 std::vector<size_t>* skipped = nullptr);

double binary_auc(const std::vector<double>& scores,
                  const std::vector<int>& labels);

// Class i is predicted when score_i >= threshold_i.
std::vector<std::vector<int>> binarize(const std::vector<double>& scores,
                                       size_t n_classes,
                                       const std::vector<double>& thresholds);

struct EvalReport {
    size_t n_classes = 0;
    size_t n_recordings = 0;
    std::vector<ConfusionCounts> counts;
    std::vector<double> class_fbeta, class_gbeta;
    double macro_fbeta = 0, macro_gbeta = 0;
    double challenge_raw = 0, challenge_normalized = 0;
    double auc = 0;
    std::vector<size_t> auc_skipped;
    std::string weight_source;  // file path or "identity"

    std::string to_json_string() const;
    static EvalReport from_json_string(const std::string& text);
};

// Full report from scores + truth, thresholding at 0.5 for set metrics.
EvalReport evaluate_scores(const std::vector<double>& scores,
                           const std::vector<std::vector<int>>& truth,
                           size_t n_classes, const std::vector<double>& weights,
                           const std::string& weight_source);

}  // namespace ecgformer
