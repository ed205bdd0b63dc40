#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kt/errors.hpp"
#include "kt/graph.hpp"
#include "kt/rng.hpp"
#include "kt/tensor.hpp"

namespace kt {

// Named trainable tensors plus their Nadam moments. Entries keep registration
// order so checkpoints and updates are byte-stable.
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor m;  // first moment
        Tensor v;  // second moment
    };

    Tensor& add(const std::string& name, Tensor init) {
        check(!index_.count(name), "parameter registered twice: " + name);
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(Entry{name, std::move(init), Tensor(), Tensor()});
        Entry& e = entries_.back();
        e.m = Tensor::zeros(e.value.shape);
        e.v = Tensor::zeros(e.value.shape);
        return e.value;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = index_.find(name);
        check(it != index_.end(), "unknown parameter: " + name);
        return entries_[it->second].value;
    }

    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        check(it != index_.end(), "unknown parameter: " + name);
        return entries_[it->second].value;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    int64_t param_count() const {
        int64_t n = 0;
        for (const Entry& e : entries_) n += e.value.size();
        return n;
    }

    // Snapshot/restore of values only (early-stopping best-epoch restore).
    std::vector<Tensor> snapshot_values() const {
        std::vector<Tensor> out;
        out.reserve(entries_.size());
        for (const Entry& e : entries_) out.push_back(e.value);
        return out;
    }

    void restore_values(const std::vector<Tensor>& snap) {
        check(snap.size() == entries_.size(), "restore_values: entry count mismatch");
        for (size_t i = 0; i < snap.size(); ++i) entries_[i].value = snap[i];
    }

    int64_t step = 0;
    double m_schedule = 1.0;  // running product of Nadam momentum schedule

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

// Glorot-uniform: entries drawn uniform in +-sqrt(6/(fan_in+fan_out)).
inline Tensor glorot_uniform(int rows, int cols, Rng& rng) {
    double bound = std::sqrt(6.0 / (rows + cols));
    Tensor t = Tensor::zeros(rows, cols);
    for (double& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

inline void add_glorot(ParamStore& s, const std::string& name, int rows, int cols, Rng& rng) {
    check(rows > 0 && cols > 0, "add_glorot: sizes must be positive");
    s.add(name, glorot_uniform(rows, cols, rng));
}

inline void add_zeros(ParamStore& s, const std::string& name, int rows, int cols) {
    s.add(name, Tensor::zeros(rows, cols));
}

// Per-graph binding of store entries; collects gradients after backward().
class BoundParams {
  public:
    BoundParams(Graph& g, ParamStore& store) : g_(&g), store_(&store) {}

    Var operator()(const std::string& name) {
        auto it = vars_.find(name);
        if (it != vars_.end()) return it->second;
        Var v = g_->leaf(store_->at(name), /*needs_grad=*/true);
        vars_.emplace(name, v);
        return v;
    }

    // name -> accumulated gradient; absent names mean an exactly-zero grad.
    std::unordered_map<std::string, Tensor> grads() const {
        std::unordered_map<std::string, Tensor> out;
        for (const auto& [name, var] : vars_) out.emplace(name, g_->grad(var));
        return out;
    }

  private:
    Graph* g_;
    ParamStore* store_;
    std::unordered_map<std::string, Var> vars_;
};

struct NadamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    double schedule_decay = 0.004;
};

// Nadam update with the momentum schedule of the original publication
// (mu_t = beta1 * (1 - 0.5 * 0.96^(t * schedule_decay))). Parameters without
// a gradient entry are updated with a zero gradient, which leaves them
// unchanged from a zero-moment state.
inline void nadam_step(ParamStore& store, const std::unordered_map<std::string, Tensor>& grads,
                       double learning_rate, const NadamConfig& cfg = {}) {
    const int64_t t = ++store.step;
    const double mu_t = cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, static_cast<double>(t) * cfg.schedule_decay));
    const double mu_t1 =
        cfg.beta1 * (1.0 - 0.5 * std::pow(0.96, static_cast<double>(t + 1) * cfg.schedule_decay));
    const double schedule = store.m_schedule * mu_t;
    const double schedule_next = schedule * mu_t1;
    store.m_schedule = schedule;
    const double v_corr = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    for (ParamStore::Entry& e : store.entries()) {
        auto it = grads.find(e.name);
        const Tensor* g = it == grads.end() ? nullptr : &it->second;
        if (g && !g->same_shape(e.value))
            throw ShapeError("nadam_step: gradient shape " + g->shape_str() + " does not match parameter " +
                             e.name + " " + e.value.shape_str());
        for (int64_t i = 0; i < e.value.size(); ++i) {
            double gi = g ? g->data[i] : 0.0;
            if (!std::isfinite(gi))
                throw DivergenceError("non-finite gradient for parameter " + e.name);
            double m = e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * gi;
            double v = e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            double g_hat = gi / (1.0 - schedule);
            double m_hat = m / (1.0 - schedule_next);
            double m_bar = (1.0 - mu_t) * g_hat + mu_t1 * m_hat;
            double v_hat = v / v_corr;
            e.value.data[i] -= learning_rate * m_bar / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace kt
