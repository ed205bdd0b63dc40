#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kt/baselines.hpp"
#include "kt/bkt.hpp"
#include "kt/dataset.hpp"
#include "kt/glr.hpp"
#include "kt/metrics.hpp"
#include "kt/models.hpp"
#include "kt/parallel.hpp"

namespace kt {

struct TrainConfig {
    int max_epochs = 100;
    int patience = 10;            // consecutive epochs without val-log-loss improvement
    double val_fraction = 0.1;

    void validate() const {
        check(max_epochs >= 1 && patience >= 1, "train config: epochs and patience must be >= 1");
        check(patience < max_epochs, "train config: patience must be below max_epochs");
        check(val_fraction > 0.0 && val_fraction < 1.0, "train config: val fraction in (0,1)");
    }
};

// Strict-improvement early stopping with best-epoch snapshot bookkeeping.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // Returns true when training should stop after this epoch.
    bool observe(double val_loss, int epoch) {
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch;
            streak_ = 0;
        } else {
            ++streak_;
        }
        return streak_ >= patience_;
    }

    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }

  private:
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int best_epoch_ = -1;
    int streak_ = 0;
};

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainOutcome {
    int epochs_run = 0;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> history;
};

inline double validation_log_loss(ModelState& m, const Dataset& ds, const std::vector<int>& students) {
    PredictionBatch pb = score_model(m, ds, students);
    return log_loss(pb.labels(), pb.probs);
}

// Mini-batch epochs with seeded shuffles; stops when `patience` consecutive
// epochs fail to improve the best validation log loss (strict improvement),
// then restores the best epoch's parameters. `stream_seed` drives shuffle and
// dropout streams; initialization came from hp.seed in build_model.
inline TrainOutcome train_model(ModelState& m, const Dataset& ds, const std::vector<int>& train_students,
                                const std::vector<int>& val_students, const TrainConfig& cfg,
                                uint64_t stream_seed) {
    cfg.validate();
    check(!train_students.empty() && !val_students.empty(), "train_model: empty split");
    Rng base(stream_seed);
    std::vector<SeqView> views = make_views(ds, train_students);
    EarlyStopper stopper(cfg.patience);
    TrainOutcome out;
    std::vector<Tensor> best_snapshot = m.params.snapshot_values();
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = base.derive("shuffle/" + std::to_string(epoch));
        Rng drop_rng = base.derive("dropout/" + std::to_string(epoch));
        shuffle_rng.shuffle(views);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t at = 0; at < views.size(); at += m.hp.batch_size) {
            std::vector<SeqView> chunk(views.begin() + at,
                                       views.begin() + std::min(views.size(), at + m.hp.batch_size));
            SeqBatch batch = make_batch(ds, chunk);
            Graph g;
            BoundParams bp(g, m.params);
            ForwardOut fwd = forward_batch(g, bp, m, ds, batch, /*training=*/true, &drop_rng);
            Var loss = g.bce_masked(fwd.probs, fwd.labels, fwd.mask);
            double loss_value = g.value(loss).data[0];
            if (!std::isfinite(loss_value))
                throw DivergenceError("training loss non-finite at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(batches));
            g.backward(loss);
            nadam_step(m.params, bp.grads(), m.hp.learning_rate);
            epoch_loss += loss_value;
            ++batches;
        }
        double val = validation_log_loss(m, ds, val_students);
        out.history.push_back(EpochRecord{epoch_loss / std::max(batches, 1), val});
        out.epochs_run = epoch;
        bool improved = val < stopper.best();
        bool stop = stopper.observe(val, epoch);
        if (improved) best_snapshot = m.params.snapshot_values();
        if (stop) break;
    }
    m.params.restore_values(best_snapshot);
    out.best_epoch = stopper.best_epoch();
    out.best_val_loss = stopper.best();
    return out;
}

// ---- cross-validation -------------------------------------------------------

// What to run: a baseline tag (mean, nap, nap3m, nap5m, nap9m, bkt, glr) or a
// deep model given by hyperparameters.
struct ModelSpec {
    std::string tag;
    std::optional<HyperParams> hp;

    static ModelSpec baseline(const std::string& tag) { return ModelSpec{tag, std::nullopt}; }
    static ModelSpec deep(const HyperParams& hp) {
        return ModelSpec{architecture_tag(hp.architecture), hp};
    }
};

inline const std::vector<std::string>& baseline_tags() {
    static const std::vector<std::string> tags = {"mean", "nap", "nap3m", "nap5m", "nap9m", "bkt", "glr"};
    return tags;
}

struct FoldResult {
    int fold = 0;
    MetricReport report;
    int64_t n_targets = 0;
    int epochs = 0;
};

// Fitted per-fold models, offered to an optional sink so the CLI can persist
// checkpoints, BKT parameter tables and GLR weights.
struct FoldArtifacts {
    int fold = 0;
    const ModelState* dlkt = nullptr;
    const BktModel* bkt = nullptr;
    const GlrModel* glr = nullptr;
};
using ArtifactSink = std::function<void(const FoldArtifacts&)>;

struct RunResult {
    std::string model_tag;
    std::string dataset_name;
    std::string config;  // compact hyperparameter string; the model tag for baselines
    std::optional<HyperParams> hp;
    std::vector<FoldResult> folds;
    MetricReport mean;
    MetricReport stddev;
    double wall_seconds = 0.0;  // reporting only; never written into result records

    std::string config_id() const {
        if (!config.empty()) return config;
        return hp ? hp->str() : model_tag;
    }
};

namespace detail {

// mean and population std over folds where the metric is defined
inline void aggregate_folds(RunResult& run) {
    for (const std::string& name : MetricReport::names()) {
        std::vector<double> xs;
        for (const FoldResult& f : run.folds)
            if (auto v = f.report.get(name)) xs.push_back(*v);
        if (xs.empty()) {
            run.mean.set(name, std::nullopt);
            run.stddev.set(name, std::nullopt);
            continue;
        }
        double mu = 0.0;
        for (double x : xs) mu += x;
        mu /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mu) * (x - mu);
        var /= static_cast<double>(xs.size());
        run.mean.set(name, mu);
        run.stddev.set(name, std::sqrt(var));
    }
}

inline PredictionBatch run_baseline_fold(const std::string& tag, const Dataset& ds,
                                         const std::vector<int>& train, const std::vector<int>& test,
                                         uint64_t seed, int fold, const ArtifactSink& sink) {
    if (tag == "mean") return MeanModel::fit(ds, train).score(ds, test);
    if (tag == "nap") return nap_score(ds, test, 0);
    if (tag == "nap3m") return nap_score(ds, test, 3);
    if (tag == "nap5m") return nap_score(ds, test, 5);
    if (tag == "nap9m") return nap_score(ds, test, 9);
    if (tag == "bkt") {
        BktFitConfig cfg;
        cfg.seed = seed;
        BktModel model = BktModel::fit(ds, train, cfg);
        if (sink) sink(FoldArtifacts{fold, nullptr, &model, nullptr});
        return model.score(ds, test);
    }
    if (tag == "glr") {
        GlrModel model = GlrModel::fit(ds, train);
        if (sink) sink(FoldArtifacts{fold, nullptr, nullptr, &model});
        return model.score(ds, test);
    }
    throw UsageError("unknown model tag '" + tag + "'");
}

}  // namespace detail

// Student-partitioned k-fold cross-validation. Per fold: the fold is the test
// set; the remainder is split into validation (val_fraction, for DLKT early
// stopping) and train. Baselines train on train+validation, matching the
// evaluation protocol where only the deep models consume a validation set.
// Fold metrics are computed on the pooled test targets; mean +- population
// std aggregates over folds. Deterministic given (spec, dataset, seed).
inline RunResult cross_validate(const ModelSpec& spec, const Dataset& ds,
                                const std::string& dataset_name, int k, uint64_t master_seed,
                                const TrainConfig& cfg = {}, int jobs = 1,
                                const ArtifactSink& sink = {}) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    Rng master(master_seed);
    FoldPlan plan = make_folds(ds, k, master.derive("folds").seed());
    auto fold_students = plan.fold_students();

    std::vector<int> all(ds.student_count());
    std::iota(all.begin(), all.end(), 0);
    int64_t all_targets = static_cast<int64_t>(targets_of(ds, all).size());

    RunResult run;
    run.model_tag = spec.tag;
    run.dataset_name = dataset_name;
    run.hp = spec.hp;
    run.config = spec.hp ? spec.hp->str() : spec.tag;
    run.folds.resize(k);

    parallel_for(k, jobs, [&](int fold) {
        const std::vector<int>& test = fold_students[fold];
        std::vector<int> rest;
        for (int s : all)
            if (plan.assignment[s] != fold) rest.push_back(s);
        auto [train, val] =
            split_validation(rest, cfg.val_fraction, master.derive("val/" + std::to_string(fold)).seed());

        // leakage guard: test never intersects train or validation
        std::set<int> seen(test.begin(), test.end());
        for (int s : train) check(!seen.count(s), "leakage: train student in test fold");
        for (int s : val) check(!seen.count(s), "leakage: validation student in test fold");
        check(train.size() + val.size() + test.size() == static_cast<size_t>(ds.student_count()),
              "leakage: fold partition does not cover the dataset");

        FoldResult& fr = run.folds[fold];
        fr.fold = fold;
        PredictionBatch pb;
        if (spec.hp) {
            const HyperParams& hp = *spec.hp;
            int max_steps = 1;
            for (int s : train) max_steps = std::max(max_steps, static_cast<int>(ds.sequences[s].size()) - 1);
            ModelState model = build_model(hp, ds.skill_count, max_steps);
            TrainOutcome outcome = train_model(
                model, ds, train, val, cfg,
                Rng(hp.seed).derive("train-stream/" + std::to_string(fold)).seed());
            fr.epochs = outcome.epochs_run;
            pb = score_model(model, ds, test);
            if (sink) sink(FoldArtifacts{fold, &model, nullptr, nullptr});
        } else {
            std::vector<int> train_all = rest;  // train + validation
            pb = detail::run_baseline_fold(spec.tag, ds, train_all, test,
                                           master.derive("baseline/" + std::to_string(fold)).seed(),
                                           fold, sink);
        }
        fr.n_targets = static_cast<int64_t>(pb.targets.size());
        fr.report = pb.report();
    });

    int64_t scored = 0;
    for (const FoldResult& f : run.folds) scored += f.n_targets;
    check(scored == all_targets, "cross_validate: targets not scored exactly once");

    detail::aggregate_folds(run);
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

}  // namespace kt
