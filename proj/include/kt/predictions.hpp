#pragma once

#include <vector>

#include "kt/dataset.hpp"
#include "kt/metrics.hpp"

namespace kt {

// One scored target: the attempt at `step` (0-based position >= 1) of
// `student`, predicted from information available strictly before it.
struct TargetRef {
    int student = 0;
    int step = 0;
    int skill = 0;
    int label = 0;
};

struct PredictionBatch {
    std::vector<TargetRef> targets;
    std::vector<double> probs;

    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(targets.size());
        for (const TargetRef& t : targets) out.push_back(t.label);
        return out;
    }

    MetricReport report() const { return compute_report(labels(), probs); }
};

// Canonical target enumeration: every model is scored on positions 1..L-1 of
// every listed student, in this order.
inline std::vector<TargetRef> targets_of(const Dataset& ds, const std::vector<int>& students) {
    std::vector<TargetRef> out;
    for (int s : students) {
        const auto& seq = ds.sequences[s];
        for (size_t t = 1; t < seq.size(); ++t)
            out.push_back(TargetRef{s, static_cast<int>(t), seq[t].skill, seq[t].correct});
    }
    return out;
}

}  // namespace kt
