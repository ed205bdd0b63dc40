#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kt/errors.hpp"

namespace kt {

struct ConfusionCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t tn = 0;
    int64_t fn = 0;

    int64_t total() const { return tp + fp + tn + fn; }
};

// Label 1 is positive; a prediction is positive iff prob >= threshold.
inline ConfusionCounts confusion(const std::vector<int>& labels, const std::vector<double>& probs,
                                 double threshold = 0.5) {
    check(labels.size() == probs.size(), "confusion: label/prob length mismatch");
    check(!labels.empty(), "confusion: empty input");
    ConfusionCounts c;
    for (size_t i = 0; i < labels.size(); ++i) {
        bool pred = probs[i] >= threshold;
        if (labels[i] == 1) (pred ? c.tp : c.fn)++;
        else (pred ? c.fp : c.tn)++;
    }
    return c;
}

// A metric whose denominator is zero is reported as an explicit undefined
// marker (std::nullopt), never a silent 0.
struct ThresholdMetrics {
    std::optional<double> accuracy, precision, recall, f1, mcc;
};

inline ThresholdMetrics threshold_metrics(const ConfusionCounts& c) {
    ThresholdMetrics m;
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    if (c.total() > 0) m.accuracy = (tp + tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0) m.precision = tp / (tp + fp);
    if (c.tp + c.fn > 0) m.recall = tp / (tp + fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * (*m.precision * *m.recall) / (*m.precision + *m.recall);
    double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom > 0.0) m.mcc = (tp * tn - fp * fn) / std::sqrt(denom);
    return m;
}

// Rank-based AUC with average ranks for ties: equals the probability that a
// random positive outranks a random negative, ties counted 1/2, which is the
// trapezoidal ROC area. Undefined when only one class is present.
inline std::optional<double> auc(const std::vector<int>& labels, const std::vector<double>& probs) {
    check(labels.size() == probs.size(), "auc: label/prob length mismatch");
    int64_t n_pos = 0;
    for (int l : labels) n_pos += l;
    int64_t n_neg = static_cast<int64_t>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return probs[a] < probs[b]; });
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && probs[order[j + 1]] == probs[order[i]]) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Pooled over all targets, computed from raw prediction values.
inline double rmse(const std::vector<int>& labels, const std::vector<double>& probs) {
    check(labels.size() == probs.size() && !labels.empty(), "rmse: bad input");
    double s = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        double d = static_cast<double>(labels[i]) - probs[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(labels.size()));
}

// Mean binary cross-entropy; probabilities clipped to [1e-7, 1-1e-7].
inline double log_loss(const std::vector<int>& labels, const std::vector<double>& probs) {
    check(labels.size() == probs.size() && !labels.empty(), "log_loss: bad input");
    constexpr double kClip = 1e-7;
    double s = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        double y = std::min(std::max(probs[i], kClip), 1.0 - kClip);
        s -= labels[i] == 1 ? std::log(y) : std::log(1.0 - y);
    }
    return s / static_cast<double>(labels.size());
}

// The seven reported metrics plus the training loss.
struct MetricReport {
    std::optional<double> accuracy, auc, precision, recall, f1, mcc, rmse, log_loss;

    static const std::vector<std::string>& names() {
        static const std::vector<std::string> n = {"acc",  "auc", "precision", "recall",
                                                   "f1",   "mcc", "rmse",      "logloss"};
        return n;
    }

    // True for metrics where smaller is better.
    static bool lower_is_better(const std::string& name) { return name == "rmse" || name == "logloss"; }

    std::optional<double> get(const std::string& name) const {
        if (name == "acc") return accuracy;
        if (name == "auc") return auc;
        if (name == "precision") return precision;
        if (name == "recall") return recall;
        if (name == "f1") return f1;
        if (name == "mcc") return mcc;
        if (name == "rmse") return rmse;
        if (name == "logloss") return log_loss;
        throw UsageError("unknown metric '" + name + "'");
    }

    void set(const std::string& name, std::optional<double> v) {
        if (name == "acc") accuracy = v;
        else if (name == "auc") auc = v;
        else if (name == "precision") precision = v;
        else if (name == "recall") recall = v;
        else if (name == "f1") f1 = v;
        else if (name == "mcc") mcc = v;
        else if (name == "rmse") rmse = v;
        else if (name == "logloss") log_loss = v;
        else throw UsageError("unknown metric '" + name + "'");
    }
};

inline MetricReport compute_report(const std::vector<int>& labels, const std::vector<double>& probs) {
    MetricReport r;
    ThresholdMetrics tm = threshold_metrics(confusion(labels, probs));
    r.accuracy = tm.accuracy;
    r.precision = tm.precision;
    r.recall = tm.recall;
    r.f1 = tm.f1;
    r.mcc = tm.mcc;
    r.auc = auc(labels, probs);
    r.rmse = rmse(labels, probs);
    r.log_loss = log_loss(labels, probs);
    return r;
}

}  // namespace kt
