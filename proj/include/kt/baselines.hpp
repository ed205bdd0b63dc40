#pragma once

#include <algorithm>
#include <vector>

#include "kt/dataset.hpp"
#include "kt/predictions.hpp"

namespace kt {

// Mean: one constant, the mean correctness over all training attempts
// (not per student or skill).
struct MeanModel {
    double p = 0.5;

    static MeanModel fit(const Dataset& ds, const std::vector<int>& students) {
        check(!students.empty(), "mean_model: empty training set");
        int64_t total = 0, correct = 0;
        for (int s : students)
            for (const Interaction& a : ds.sequences[s]) {
                ++total;
                correct += a.correct;
            }
        check(total > 0, "mean_model: no training attempts");
        return MeanModel{static_cast<double>(correct) / static_cast<double>(total)};
    }

    PredictionBatch score(const Dataset& ds, const std::vector<int>& students) const {
        PredictionBatch out;
        out.targets = targets_of(ds, students);
        out.probs.assign(out.targets.size(), p);
        return out;
    }
};

// NaP: the prediction for position t+1 is exactly c_t.
inline std::vector<double> nap_predict(const std::vector<Interaction>& seq) {
    check(seq.size() >= 2, "nap: sequence shorter than 2");
    std::vector<double> out;
    out.reserve(seq.size() - 1);
    for (size_t t = 1; t < seq.size(); ++t) out.push_back(static_cast<double>(seq[t - 1].correct));
    return out;
}

// NaPNM: mean of the last min(t, N) correctness values.
inline std::vector<double> napnm_predict(const std::vector<Interaction>& seq, int n) {
    check(n >= 1, "napnm: window must be >= 1");
    check(seq.size() >= 2, "napnm: sequence shorter than 2");
    std::vector<double> out;
    out.reserve(seq.size() - 1);
    for (size_t t = 1; t < seq.size(); ++t) {
        size_t lo = t > static_cast<size_t>(n) ? t - n : 0;
        double sum = 0.0;
        for (size_t i = lo; i < t; ++i) sum += seq[i].correct;
        out.push_back(sum / static_cast<double>(t - lo));
    }
    return out;
}

// window == 0 means plain NaP.
inline PredictionBatch nap_score(const Dataset& ds, const std::vector<int>& students, int window) {
    PredictionBatch out;
    out.targets = targets_of(ds, students);
    out.probs.reserve(out.targets.size());
    for (int s : students) {
        std::vector<double> seq_probs =
            window == 0 ? nap_predict(ds.sequences[s]) : napnm_predict(ds.sequences[s], window);
        out.probs.insert(out.probs.end(), seq_probs.begin(), seq_probs.end());
    }
    return out;
}

}  // namespace kt
