#include "ecgformer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ecgformer/errors.hpp"

namespace ecgformer {

using json = nlohmann::json;

double fbeta(const ConfusionCounts& c, double beta) {
    const double b2 = beta * beta;
    const double den = (1 + b2) * c.tp + c.fp + b2 * c.fn;
    return den > 0 ? (1 + b2) * c.tp / den : 0.0;
}

double gbeta(const ConfusionCounts& c, double beta) {
    const double den = c.tp + c.fp + beta * c.fn;
    return den > 0 ? c.tp / den : 0.0;
}

namespace {

void check_labels(const std::vector<std::vector<int>>& sets, size_t n) {
    for (const auto& s : sets)
        for (int l : s)
            if (l < 0 || static_cast<size_t>(l) >= n)
                throw ValueError("label index " + std::to_string(l) +
                                 " out of range for " + std::to_string(n) +
                                 " classes");
}

}  // namespace

std::vector<ConfusionCounts> per_class_counts(
    const std::vector<std::vector<int>>& truth,
    const std::vector<std::vector<int>>& pred, size_t n_classes) {
    if (truth.size() != pred.size())
        throw ValueError("truth and prediction lists differ in length");
    check_labels(truth, n_classes);
    check_labels(pred, n_classes);
    std::vector<ConfusionCounts> counts(n_classes);
    for (size_t r = 0; r < truth.size(); ++r) {
        const std::set<int> t(truth[r].begin(), truth[r].end());
        const std::set<int> p(pred[r].begin(), pred[r].end());
        for (size_t c = 0; c < n_classes; ++c) {
            const bool in_t = t.count(static_cast<int>(c)) > 0;
            const bool in_p = p.count(static_cast<int>(c)) > 0;
            if (in_t && in_p) counts[c].tp += 1;
            else if (!in_t && in_p) counts[c].fp += 1;
            else if (in_t && !in_p) counts[c].fn += 1;
            else counts[c].tn += 1;
        }
    }
    return counts;
}

std::vector<double> challenge_confusion(
    const std::vector<std::vector<int>>& truth,
    const std::vector<std::vector<int>>& pred, size_t n_classes) {
    if (truth.size() != pred.size())
        throw ValueError("truth and prediction lists differ in length");
    check_labels(truth, n_classes);
    check_labels(pred, n_classes);
    std::vector<double> a(n_classes * n_classes, 0.0);
    for (size_t r = 0; r < truth.size(); ++r) {
        std::set<int> uni(truth[r].begin(), truth[r].end());
        uni.insert(pred[r].begin(), pred[r].end());
        const double share = 1.0 / std::max<size_t>(1, uni.size());
        const std::set<int> t(truth[r].begin(), truth[r].end());
        const std::set<int> p(pred[r].begin(), pred[r].end());
        for (int i : p)
            for (int j : t) a[i * n_classes + j] += share;
    }
    return a;
}

ChallengeScore challenge_score(const std::vector<std::vector<int>>& truth,
                               const std::vector<std::vector<int>>& pred,
                               const std::vector<double>& weights,
                               size_t n_classes) {
    if (weights.size() != n_classes * n_classes)
        throw ValueError("weight matrix size " + std::to_string(weights.size()) +
                         " does not match " + std::to_string(n_classes) +
                         " classes");
    auto apply = [&](const std::vector<std::vector<int>>& p) {
        const auto a = challenge_confusion(truth, p, n_classes);
        double s = 0;
        for (size_t k = 0; k < a.size(); ++k) s += weights[k] * a[k];
        return s;
    };
    ChallengeScore out;
    out.raw = apply(pred);
    const double s_true = apply(truth);
    const double s_inactive =
        apply(std::vector<std::vector<int>>(truth.size()));
    out.normalized = s_true != s_inactive
                         ? (out.raw - s_inactive) / (s_true - s_inactive)
                         : 0.0;
    return out;
}

double binary_auc(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValueError("AUC needs matching score/label lengths");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tie groups, then the Mann-Whitney statistic.
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos = 0, rank_sum = 0;
    for (size_t k = 0; k < n; ++k)
        if (labels[k]) {
            pos += 1;
            rank_sum += rank[k];
        }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0 || neg == 0)
        throw ValueError("AUC undefined without both positives and negatives");
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double macro_auc(const std::vector<double>& scores,
                 const std::vector<std::vector<int>>& truth, size_t n_classes,
                 std::vector<size_t>* skipped) {
    const size_t rows = truth.size();
    if (scores.size() != rows * n_classes)
        throw ValueError("scores size does not match recordings x classes");
    check_labels(truth, n_classes);
    if (skipped) skipped->clear();
    double total = 0;
    size_t scored = 0;
    for (size_t c = 0; c < n_classes; ++c) {
        std::vector<double> s(rows);
        std::vector<int> y(rows);
        size_t pos = 0;
        for (size_t r = 0; r < rows; ++r) {
            s[r] = scores[r * n_classes + c];
            y[r] = std::count(truth[r].begin(), truth[r].end(),
                              static_cast<int>(c)) > 0;
            pos += y[r];
        }
        if (pos == 0 || pos == rows) {
            if (skipped) skipped->push_back(c);
            continue;
        }
        total += binary_auc(s, y);
        ++scored;
    }
    return scored > 0 ? total / scored : 0.0;
}

std::vector<std::vector<int>> binarize(const std::vector<double>& scores,
                                       size_t n_classes,
                                       const std::vector<double>& thresholds) {
    if (thresholds.size() != n_classes)
        throw ValueError("need one threshold per class");
    if (scores.size() % n_classes != 0)
        throw ValueError("scores size is not a multiple of class count");
    const size_t rows = scores.size() / n_classes;
    std::vector<std::vector<int>> pred(rows);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < n_classes; ++c)
            if (scores[r * n_classes + c] >= thresholds[c])
                pred[r].push_back(static_cast<int>(c));
    return pred;
}

EvalReport evaluate_scores(const std::vector<double>& scores,
                           const std::vector<std::vector<int>>& truth,
                           size_t n_classes, const std::vector<double>& weights,
                           const std::string& weight_source) {
    EvalReport rep;
    rep.n_classes = n_classes;
    rep.n_recordings = truth.size();
    rep.weight_source = weight_source;
    const auto pred =
        binarize(scores, n_classes, std::vector<double>(n_classes, 0.5));
    rep.counts = per_class_counts(truth, pred, n_classes);
    for (const auto& c : rep.counts) {
        rep.class_fbeta.push_back(fbeta(c));
        rep.class_gbeta.push_back(gbeta(c));
        rep.macro_fbeta += rep.class_fbeta.back();
        rep.macro_gbeta += rep.class_gbeta.back();
    }
    rep.macro_fbeta /= n_classes;
    rep.macro_gbeta /= n_classes;
    const ChallengeScore cs = challenge_score(truth, pred, weights, n_classes);
    rep.challenge_raw = cs.raw;
    rep.challenge_normalized = cs.normalized;
    rep.auc = macro_auc(scores, truth, n_classes, &rep.auc_skipped);
    return rep;
}

std::string EvalReport::to_json_string() const {
    json counts_j = json::array();
    for (const auto& c : counts)
        counts_j.push_back({{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}});
    const json j{{"n_classes", n_classes},
                 {"n_recordings", n_recordings},
                 {"counts", counts_j},
                 {"class_fbeta", class_fbeta},
                 {"class_gbeta", class_gbeta},
                 {"macro_fbeta", macro_fbeta},
                 {"macro_gbeta", macro_gbeta},
                 {"challenge_raw", challenge_raw},
                 {"challenge_normalized", challenge_normalized},
                 {"auc", auc},
                 {"auc_skipped", auc_skipped},
                 {"weight_source", weight_source}};
    return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json_string(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValueError("malformed evaluation report JSON");
    EvalReport rep;
    try {
        rep.n_classes = j.at("n_classes").get<size_t>();
        rep.n_recordings = j.at("n_recordings").get<size_t>();
        for (const auto& c : j.at("counts")) {
            ConfusionCounts cc;
            cc.tp = c.at("tp").get<double>();
            cc.fp = c.at("fp").get<double>();
            cc.fn = c.at("fn").get<double>();
            cc.tn = c.at("tn").get<double>();
            rep.counts.push_back(cc);
        }
        rep.class_fbeta = j.at("class_fbeta").get<std::vector<double>>();
        rep.class_gbeta = j.at("class_gbeta").get<std::vector<double>>();
        rep.macro_fbeta = j.at("macro_fbeta").get<double>();
        rep.macro_gbeta = j.at("macro_gbeta").get<double>();
        rep.challenge_raw = j.at("challenge_raw").get<double>();
        rep.challenge_normalized = j.at("challenge_normalized").get<double>();
        rep.auc = j.at("auc").get<double>();
        rep.auc_skipped = j.at("auc_skipped").get<std::vector<size_t>>();
        rep.weight_source = j.at("weight_source").get<std::string>();
    } catch (const json::exception& e) {
        throw ValueError(std::string("bad evaluation report: ") + e.what());
    }
    return rep;
}

}  // namespace ecgformer
