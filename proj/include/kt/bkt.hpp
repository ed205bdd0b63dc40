#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kt/dataset.hpp"
#include "kt/predictions.hpp"
#include "kt/rng.hpp"

namespace kt {

// Two-state no-forgetting HMM over skill mastery: prior P(L0), transition
// P(T) applied after each observation, guess P(G), slip P(S).
struct BktParams {
    double prior = 0.3;
    double transit = 0.2;
    double guess = 0.15;
    double slip = 0.1;
};

inline double bkt_clamp(double p) { return std::min(std::max(p, 1e-6), 1.0 - 1e-6); }

struct BktFit {
    BktParams params;
    double log_likelihood = -1e300;
    std::vector<double> ll_trace;  // one entry per EM iteration
    int iterations = 0;
};

// Baum-Welch on the per-skill correctness subsequences. The trace is the
// data log-likelihood under the parameters entering each iteration; EM
// guarantees it never decreases (asserted with 1e-9 relative slack for
// roundoff in the scaled forward-backward).
inline BktFit bkt_em(const std::vector<std::vector<int>>& sequences, BktParams init,
                     int max_iters = 200, double tol = 1e-6) {
    check(!sequences.empty(), "bkt_em: no sequences");
    BktFit fit;
    fit.params = init;
    double prev_ll = -1e300;
    for (int iter = 0; iter < max_iters; ++iter) {
        const double l0 = fit.params.prior, tr = fit.params.transit;
        const double gu = fit.params.guess, sl = fit.params.slip;
        double ll = 0.0;
        double sum_gamma1_known = 0.0;
        double num_t = 0.0, den_t = 0.0;
        double num_g = 0.0, den_g = 0.0, num_s = 0.0, den_s = 0.0;
        for (const auto& seq : sequences) {
            const size_t n = seq.size();
            // state 0 = not mastered, 1 = mastered
            std::vector<double> a0(n), a1(n), scale(n);
            auto emit = [&](size_t t, int state) {
                if (state == 0) return seq[t] == 1 ? gu : 1.0 - gu;
                return seq[t] == 1 ? 1.0 - sl : sl;
            };
            a0[0] = (1.0 - l0) * emit(0, 0);
            a1[0] = l0 * emit(0, 1);
            scale[0] = a0[0] + a1[0];
            a0[0] /= scale[0];
            a1[0] /= scale[0];
            for (size_t t = 1; t < n; ++t) {
                double p0 = a0[t - 1] * (1.0 - tr);
                double p1 = a0[t - 1] * tr + a1[t - 1];
                a0[t] = p0 * emit(t, 0);
                a1[t] = p1 * emit(t, 1);
                scale[t] = a0[t] + a1[t];
                a0[t] /= scale[t];
                a1[t] /= scale[t];
            }
            std::vector<double> b0(n), b1(n);
            b0[n - 1] = 1.0;
            b1[n - 1] = 1.0;
            for (size_t t = n - 1; t-- > 0;) {
                double e0 = emit(t + 1, 0) * b0[t + 1];
                double e1 = emit(t + 1, 1) * b1[t + 1];
                b0[t] = ((1.0 - tr) * e0 + tr * e1) / scale[t + 1];
                b1[t] = e1 / scale[t + 1];
            }
            for (size_t t = 0; t < n; ++t) ll += std::log(scale[t]);
            for (size_t t = 0; t < n; ++t) {
                double g0 = a0[t] * b0[t];
                double g1 = a1[t] * b1[t];
                double z = g0 + g1;
                g0 /= z;
                g1 /= z;
                if (t == 0) sum_gamma1_known += g1;
                if (t + 1 < n) {
                    // xi(t, unknown -> known)
                    double xi01 = a0[t] * tr * emit(t + 1, 1) * b1[t + 1] / scale[t + 1];
                    num_t += xi01;
                    den_t += g0;
                }
                if (seq[t] == 1) num_g += g0;
                else num_s += g1;
                den_g += g0;
                den_s += g1;
            }
        }
        fit.ll_trace.push_back(ll);
        fit.iterations = iter + 1;
        if (iter > 0) {
            check(ll >= prev_ll - 1e-9 * std::fabs(prev_ll),
                  "bkt_em: log-likelihood decreased (" + std::to_string(prev_ll) + " -> " +
                      std::to_string(ll) + ")");
            if (ll - prev_ll < tol) {
                fit.log_likelihood = ll;
                return fit;
            }
        }
        prev_ll = ll;
        fit.params.prior = bkt_clamp(sum_gamma1_known / static_cast<double>(sequences.size()));
        fit.params.transit = bkt_clamp(den_t > 0.0 ? num_t / den_t : 0.0);
        fit.params.guess = bkt_clamp(den_g > 0.0 ? num_g / den_g : 0.0);
        fit.params.slip = bkt_clamp(den_s > 0.0 ? num_s / den_s : 0.0);
    }
    fit.log_likelihood = prev_ll;
    return fit;
}

struct BktFitConfig {
    int max_iters = 200;
    double tol = 1e-6;
    int restarts = 3;
    uint64_t seed = 12345;
};

struct BktModel {
    std::vector<BktParams> skills;
    std::vector<char> skill_fitted;
    double fallback = 0.5;  // global train mean, used for skills unseen in training
    int skill_count = 0;

    // Each skill is fitted separately. Restarts draw initial parameters from
    // the seeded generator (guess/slip starts kept below one half); the
    // restart with the best train log-likelihood wins.
    static BktModel fit(const Dataset& ds, const std::vector<int>& students, BktFitConfig cfg = {}) {
        BktModel model;
        model.skill_count = ds.skill_count;
        model.skills.assign(ds.skill_count, BktParams{});
        model.skill_fitted.assign(ds.skill_count, 0);

        int64_t total = 0, correct = 0;
        std::vector<std::vector<std::vector<int>>> per_skill(ds.skill_count);
        for (int s : students) {
            std::vector<std::vector<int>> mine(ds.skill_count);
            for (const Interaction& a : ds.sequences[s]) {
                mine[a.skill].push_back(a.correct);
                ++total;
                correct += a.correct;
            }
            for (int k = 0; k < ds.skill_count; ++k)
                if (!mine[k].empty()) per_skill[k].push_back(std::move(mine[k]));
        }
        check(total > 0, "bkt: no training attempts");
        model.fallback = static_cast<double>(correct) / static_cast<double>(total);

        Rng rng = Rng(cfg.seed).derive("bkt-init");
        for (int k = 0; k < ds.skill_count; ++k) {
            if (per_skill[k].empty()) continue;  // falls back to the global mean
            BktFit best;
            for (int r = 0; r < cfg.restarts; ++r) {
                BktParams init;
                init.prior = rng.uniform(0.1, 0.6);
                init.transit = rng.uniform(0.05, 0.4);
                init.guess = rng.uniform(0.05, 0.35);
                init.slip = rng.uniform(0.05, 0.3);
                BktFit fit = bkt_em(per_skill[k], init, cfg.max_iters, cfg.tol);
                if (fit.log_likelihood > best.log_likelihood) best = fit;
            }
            model.skills[k] = best.params;
            model.skill_fitted[k] = 1;
        }
        return model;
    }

    // Standard filtering: predict L(1-S) + (1-L)G, then condition L on the
    // observed correctness and apply the transition. Skills are tracked
    // independently within a student.
    PredictionBatch score(const Dataset& ds, const std::vector<int>& students) const {
        PredictionBatch out;
        out.targets = targets_of(ds, students);
        out.probs.reserve(out.targets.size());
        std::vector<double> mastery(skill_count);
        for (int s : students) {
            const auto& seq = ds.sequences[s];
            for (const Interaction& a : seq) mastery[a.skill] = skills[a.skill].prior;
            for (size_t t = 0; t < seq.size(); ++t) {
                int k = seq[t].skill;
                if (!skill_fitted[k]) {
                    if (t >= 1) out.probs.push_back(fallback);
                    continue;
                }
                const BktParams& p = skills[k];
                double l = mastery[k];
                double p_correct = l * (1.0 - p.slip) + (1.0 - l) * p.guess;
                if (t >= 1) out.probs.push_back(p_correct);
                double posterior;
                if (seq[t].correct == 1)
                    posterior = l * (1.0 - p.slip) / std::max(p_correct, 1e-12);
                else
                    posterior = l * p.slip / std::max(1.0 - p_correct, 1e-12);
                mastery[k] = posterior + (1.0 - posterior) * p.transit;
            }
        }
        return out;
    }
};

// One filtering step in isolation (prediction, posterior, next mastery).
struct BktStep {
    double prediction;
    double posterior;
    double next_mastery;
};

inline BktStep bkt_filter_step(const BktParams& p, double mastery, int observed) {
    BktStep s{};
    s.prediction = mastery * (1.0 - p.slip) + (1.0 - mastery) * p.guess;
    s.posterior = observed == 1 ? mastery * (1.0 - p.slip) / s.prediction
                                : mastery * p.slip / (1.0 - s.prediction);
    s.next_mastery = s.posterior + (1.0 - s.posterior) * p.transit;
    return s;
}

// Sampling helper for generate-and-refit checks and the synthetic benchmark.
inline std::vector<std::vector<int>> bkt_sample(const BktParams& p, int n_sequences, int length,
                                                uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> out(n_sequences);
    for (auto& seq : out) {
        bool known = rng.uniform() < p.prior;
        seq.reserve(length);
        for (int t = 0; t < length; ++t) {
            double pc = known ? 1.0 - p.slip : p.guess;
            seq.push_back(rng.uniform() < pc ? 1 : 0);
            if (!known && rng.uniform() < p.transit) known = true;
        }
    }
    return out;
}

}  // namespace kt
