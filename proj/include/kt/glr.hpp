#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "kt/dataset.hpp"
#include "kt/params.hpp"
#include "kt/predictions.hpp"

namespace kt {

// Best-LR feature vector: student one-hot (ability), skill one-hot
// (difficulty), log2(1+x)-rescaled per-skill and total success/failure
// counts, and a bias. Counts use strictly earlier attempts of the same
// student, so features at position t never see positions >= t.

struct GlrFeature {
    int index;
    double value;
};

struct GlrFeatureSpace {
    int n_students = 0;
    int n_skills = 0;

    int dim() const { return n_students + n_skills + 4 + 1; }
    int skill_base() const { return n_students; }
    int count_base() const { return n_students + n_skills; }
    int bias_index() const { return dim() - 1; }
};

// Running per-student history the features are computed from.
struct GlrHistory {
    std::vector<int> skill_success;
    std::vector<int> skill_failure;
    int total_success = 0;
    int total_failure = 0;

    explicit GlrHistory(int n_skills) : skill_success(n_skills, 0), skill_failure(n_skills, 0) {}

    void observe(int skill, int correct) {
        if (correct == 1) {
            ++skill_success[skill];
            ++total_success;
        } else {
            ++skill_failure[skill];
            ++total_failure;
        }
    }
};

inline double glr_rescale(int count) { return std::log2(1.0 + static_cast<double>(count)); }

// `train_student` is the dense train-side index, or -1 for students unseen in
// training (their one-hot block stays zero).
inline std::vector<GlrFeature> build_glr_features(const GlrFeatureSpace& space, int train_student,
                                                  int skill, const GlrHistory& history) {
    std::vector<GlrFeature> f;
    f.reserve(7);
    if (train_student >= 0) f.push_back({train_student, 1.0});
    if (skill >= 0 && skill < space.n_skills) f.push_back({space.skill_base() + skill, 1.0});
    int cb = space.count_base();
    f.push_back({cb + 0, glr_rescale(history.skill_success[skill])});
    f.push_back({cb + 1, glr_rescale(history.skill_failure[skill])});
    f.push_back({cb + 2, glr_rescale(history.total_success)});
    f.push_back({cb + 3, glr_rescale(history.total_failure)});
    f.push_back({space.bias_index(), 1.0});
    return f;
}

struct GlrFitConfig {
    double lambda = 1.0;        // L2 on all weights except the bias
    double learning_rate = 0.05;
    int max_epochs = 5000;
    double grad_tol = 1e-5;
};

struct GlrModel {
    GlrFeatureSpace space;
    std::unordered_map<int, int> student_index;  // dataset student -> one-hot slot
    std::vector<double> weights;
    int epochs_run = 0;

    double predict(const std::vector<GlrFeature>& f) const {
        double z = 0.0;
        for (const GlrFeature& x : f) z += weights[x.index] * x.value;
        return 1.0 / (1.0 + std::exp(-z));
    }

    // Full-batch Nadam on the mean cross-entropy with (lambda/2N)||w||^2,
    // stopping when the gradient norm drops below grad_tol. Reference
    // implementations use L-BFGS; the problem is convex, so a tight
    // first-order fit lands in the same optimum region.
    static GlrModel fit(const Dataset& ds, const std::vector<int>& students, GlrFitConfig cfg = {}) {
        GlrModel model;
        model.space.n_skills = ds.skill_count;
        for (int s : students) {
            int slot = static_cast<int>(model.student_index.size());
            model.student_index.emplace(s, slot);
        }
        model.space.n_students = static_cast<int>(model.student_index.size());

        struct Example {
            std::vector<GlrFeature> f;
            int label;
        };
        std::vector<Example> examples;
        for (int s : students) {
            GlrHistory hist(ds.skill_count);
            for (const Interaction& a : ds.sequences[s]) {
                examples.push_back({build_glr_features(model.space, model.student_index.at(s), a.skill, hist),
                                    a.correct});
                hist.observe(a.skill, a.correct);
            }
        }
        check(!examples.empty(), "glr: no training examples");
        bool has_pos = false, has_neg = false;
        for (const Example& e : examples) (e.label ? has_pos : has_neg) = true;
        check(has_pos && has_neg, "glr: training labels are single-class");

        const int dim = model.space.dim();
        const double n = static_cast<double>(examples.size());
        ParamStore store;
        add_zeros(store, "w", 1, dim);
        for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            const Tensor& w = store.at("w");
            Tensor grad = Tensor::zeros(1, dim);
            double loss = 0.0;
            for (const Example& e : examples) {
                double z = 0.0;
                for (const GlrFeature& x : e.f) z += w.data[x.index] * x.value;
                double p = 1.0 / (1.0 + std::exp(-z));
                double y = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
                loss -= e.label == 1 ? std::log(y) : std::log(1.0 - y);
                double err = p - static_cast<double>(e.label);
                for (const GlrFeature& x : e.f) grad.data[x.index] += err * x.value;
            }
            for (int j = 0; j < dim; ++j) {
                if (j != model.space.bias_index()) {
                    grad.data[j] += cfg.lambda * w.data[j];
                    loss += 0.5 * cfg.lambda * w.data[j] * w.data[j];
                }
                grad.data[j] /= n;
            }
            if (!std::isfinite(loss)) throw DivergenceError("glr: non-finite loss at epoch " + std::to_string(epoch));
            double norm = 0.0;
            for (double g : grad.data) norm += g * g;
            model.epochs_run = epoch + 1;
            if (std::sqrt(norm) < cfg.grad_tol) break;
            std::unordered_map<std::string, Tensor> grads;
            grads.emplace("w", std::move(grad));
            nadam_step(store, grads, cfg.learning_rate);
        }
        model.weights = store.at("w").data;
        return model;
    }

    PredictionBatch score(const Dataset& ds, const std::vector<int>& students) const {
        PredictionBatch out;
        out.targets = targets_of(ds, students);
        out.probs.reserve(out.targets.size());
        for (int s : students) {
            auto it = student_index.find(s);
            int slot = it == student_index.end() ? -1 : it->second;
            GlrHistory hist(space.n_skills);
            const auto& seq = ds.sequences[s];
            for (size_t t = 0; t < seq.size(); ++t) {
                if (t >= 1) out.probs.push_back(predict(build_glr_features(space, slot, seq[t].skill, hist)));
                hist.observe(seq[t].skill, seq[t].correct);
            }
        }
        return out;
    }
};

}  // namespace kt
