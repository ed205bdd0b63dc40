#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "kt/train.hpp"

namespace kt {

// Hyperparameter options of the benchmark grid.
struct GridDomain {
    std::vector<int> recurrent_sizes = {50, 100};
    std::vector<int> key_sizes = {20, 50};
    std::vector<int> value_sizes = {20, 50};
    std::vector<int> summary_sizes = {50, 100};
    std::vector<InputVariant> inputs = {InputVariant::OneHot, InputVariant::Embedding};
    std::vector<OutputVariant> outputs = {OutputVariant::OutputPerSkill, OutputVariant::SkillsToScalar};
    std::vector<double> learning_rates = {0.01, 0.001};
    std::vector<double> dropouts = {0.2};
    std::vector<int> attention_heads = {1, 5};
    std::vector<int> batch_sizes = {32};
    std::vector<uint64_t> seeds = {13, 42};
};

// Enumerates the applicable combinations, pruning options that cancel out:
// one-hot input fixes the embedding sizes, output-per-skill drops the summary
// size, only SAKT has attention heads, and key size matters only to
// architectures with key inputs. Ignored fields are pinned to the first
// domain option, which keeps the enumeration duplicate-free. The order is
// deterministic.
inline std::vector<HyperParams> enumerate_grid(Architecture arch, const GridDomain& domain = {}) {
    std::vector<HyperParams> grid;
    const bool keys = uses_keys(arch);
    const std::vector<int> one_head = {1};
    const auto& heads = arch == Architecture::Sakt ? domain.attention_heads : one_head;
    for (int rec : domain.recurrent_sizes)
        for (InputVariant input : domain.inputs) {
            std::vector<int> key_opts = {domain.key_sizes.front()};
            std::vector<int> value_opts = {domain.value_sizes.front()};
            if (input == InputVariant::Embedding) {
                value_opts = domain.value_sizes;
                if (keys) key_opts = domain.key_sizes;
            }
            for (int key : key_opts)
                for (int value : value_opts)
                    for (OutputVariant output : domain.outputs) {
                        std::vector<int> summary_opts = {domain.summary_sizes.front()};
                        if (output == OutputVariant::SkillsToScalar) summary_opts = domain.summary_sizes;
                        for (int summary : summary_opts)
                            for (double lr : domain.learning_rates)
                                for (double drop : domain.dropouts)
                                    for (int head : heads)
                                        for (int batch : domain.batch_sizes)
                                            for (uint64_t seed : domain.seeds) {
                                                HyperParams hp;
                                                hp.architecture = arch;
                                                hp.recurrent_size = rec;
                                                hp.key_embed_size = key;
                                                hp.value_embed_size = value;
                                                hp.summary_size = summary;
                                                hp.input = input;
                                                hp.output = output;
                                                hp.learning_rate = lr;
                                                hp.dropout_rate = drop;
                                                hp.attention_heads = head;
                                                hp.batch_size = batch;
                                                hp.seed = seed;
                                                grid.push_back(hp);
                                            }
                    }
        }
    check(!grid.empty(), "enumerate_grid: empty grid");
    for (size_t i = 0; i < grid.size(); ++i)
        for (size_t j = i + 1; j < grid.size(); ++j)
            check(!(grid[i] == grid[j]), "enumerate_grid: duplicate combination");
    return grid;
}

inline bool on_grid(const HyperParams& hp, const GridDomain& domain = {}) {
    for (const HyperParams& g : enumerate_grid(hp.architecture, domain))
        if (g == hp) return true;
    return false;
}

struct GridSearchResult {
    std::string selection_metric;
    int best_index = -1;
    std::vector<RunResult> runs;
    std::vector<std::string> warnings;

    const RunResult& best() const { return runs.at(best_index); }
};

namespace detail {

// direction-aware comparison; true when a beats b on `metric`
inline bool metric_better(double a, double b, const std::string& metric) {
    return MetricReport::lower_is_better(metric) ? a < b : a > b;
}

inline int select_best(const std::vector<RunResult>& runs, const std::string& metric,
                       std::vector<std::string>* warnings) {
    int best = -1;
    for (size_t i = 0; i < runs.size(); ++i) {
        auto v = runs[i].mean.get(metric);
        if (!v) {
            if (warnings)
                warnings->push_back("config " + runs[i].config_id() + ": " + metric +
                                    " undefined, excluded from selection");
            continue;
        }
        if (best < 0) {
            best = static_cast<int>(i);
            continue;
        }
        double cur = *runs[best].mean.get(metric);
        if (metric_better(*v, cur, metric)) {
            best = static_cast<int>(i);
        } else if (*v == cur) {
            // ties: lower mean log loss, then lexicographic hyperparameters
            auto ll_new = runs[i].mean.get("logloss");
            auto ll_best = runs[best].mean.get("logloss");
            if (ll_new && ll_best && *ll_new != *ll_best) {
                if (*ll_new < *ll_best) best = static_cast<int>(i);
            } else if (runs[i].hp && runs[best].hp &&
                       runs[i].hp->ordering_key() < runs[best].hp->ordering_key()) {
                best = static_cast<int>(i);
            }
        }
    }
    check(best >= 0, "grid selection: no configuration has a defined " + metric);
    return best;
}

}  // namespace detail

// Cross-validates every applicable grid point and selects the winner by the
// mean selection metric. Grid points run in parallel; results stay in
// enumeration order so output is reproducible.
inline GridSearchResult grid_search(Architecture arch, const Dataset& ds,
                                    const std::string& dataset_name,
                                    const std::string& selection_metric, uint64_t master_seed,
                                    const TrainConfig& cfg = {}, int jobs = 1,
                                    const GridDomain& domain = {}) {
    MetricReport().get(selection_metric);  // validates the name
    std::vector<HyperParams> grid = enumerate_grid(arch, domain);
    GridSearchResult result;
    result.selection_metric = selection_metric;
    result.runs.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), jobs, [&](int i) {
        result.runs[i] = cross_validate(ModelSpec::deep(grid[i]), ds, dataset_name, 5, master_seed, cfg,
                                        /*jobs=*/1);
    });
    result.best_index = detail::select_best(result.runs, selection_metric, &result.warnings);
    return result;
}

// ---- selection-metric loss analysis ------------------------------------------

// loss(a,b): how much of metric b is sacrificed when the configuration is
// picked by metric a instead of by b, aggregated over (model, dataset)
// groups. The diagonal is exactly zero and every entry is non-negative.
struct LossMatrix {
    std::vector<std::string> metrics;
    std::vector<std::vector<double>> mean_loss;
    std::vector<std::vector<double>> max_loss;
    std::vector<std::vector<int>> pair_count;  // groups contributing to each cell
    std::vector<std::string> warnings;
};

inline LossMatrix selection_loss_analysis(const std::vector<RunResult>& runs,
                                          const std::vector<std::string>& metrics =
                                              MetricReport::names()) {
    LossMatrix lm;
    lm.metrics = metrics;
    size_t n = metrics.size();
    lm.mean_loss.assign(n, std::vector<double>(n, 0.0));
    lm.max_loss.assign(n, std::vector<double>(n, 0.0));
    lm.pair_count.assign(n, std::vector<int>(n, 0));

    std::map<std::pair<std::string, std::string>, std::vector<const RunResult*>> groups;
    for (const RunResult& r : runs) groups[{r.model_tag, r.dataset_name}].push_back(&r);

    for (auto& [key, group] : groups) {
        if (group.size() < 2) {
            lm.warnings.push_back("group " + key.first + "/" + key.second +
                                  " has fewer than 2 configurations, skipped");
            continue;
        }
        for (size_t a = 0; a < n; ++a) {
            // argbest by metric a within the group
            const RunResult* pick = nullptr;
            for (const RunResult* r : group) {
                auto v = r->mean.get(metrics[a]);
                if (!v) {
                    lm.warnings.push_back("config " + r->config_id() + ": " + metrics[a] +
                                          " undefined, excluded from argbest");
                    continue;
                }
                if (!pick || detail::metric_better(*v, *pick->mean.get(metrics[a]), metrics[a]))
                    pick = r;
            }
            if (!pick) continue;
            for (size_t b = 0; b < n; ++b) {
                auto at_pick = pick->mean.get(metrics[b]);
                const RunResult* best_b = nullptr;
                for (const RunResult* r : group) {
                    auto v = r->mean.get(metrics[b]);
                    if (!v) continue;
                    if (!best_b || detail::metric_better(*v, *best_b->mean.get(metrics[b]), metrics[b]))
                        best_b = r;
                }
                if (!at_pick || !best_b) continue;
                double best_value = *best_b->mean.get(metrics[b]);
                double loss = MetricReport::lower_is_better(metrics[b]) ? *at_pick - best_value
                                                                        : best_value - *at_pick;
                check(loss >= -1e-12, "selection loss must be non-negative");
                loss = std::max(loss, 0.0);
                lm.mean_loss[a][b] += loss;
                lm.max_loss[a][b] = std::max(lm.max_loss[a][b], loss);
                lm.pair_count[a][b] += 1;
            }
        }
    }
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b)
            if (lm.pair_count[a][b] > 0) lm.mean_loss[a][b] /= lm.pair_count[a][b];
    for (size_t a = 0; a < n; ++a) {
        check(lm.mean_loss[a][a] == 0.0, "selection loss diagonal must be zero");
        check(lm.max_loss[a][a] == 0.0, "selection loss diagonal must be zero");
    }
    return lm;
}

}  // namespace kt
