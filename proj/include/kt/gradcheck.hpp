#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "kt/params.hpp"

namespace kt {

struct GradCheckResult {
    int64_t checked = 0;
    int64_t over_soft = 0;   // relative error >= soft threshold
    int64_t over_hard = 0;   // relative error >= hard threshold
    double worst = 0.0;
    std::string worst_param;

    double fraction_within_soft() const {
        return checked == 0 ? 1.0 : 1.0 - static_cast<double>(over_soft) / static_cast<double>(checked);
    }
    bool ok(double min_soft_fraction = 0.99) const {
        return over_hard == 0 && fraction_within_soft() >= min_soft_fraction;
    }
};

// Central finite differences against analytic gradients for every element of
// every parameter in `store`. `loss(store)` must be a pure function of the
// parameter values; `grads` are the analytic gradients for the same loss.
// Relative error uses |a-n| / max(|a|+|n|, 1e-6) so that exactly-zero
// gradients compare against finite-difference noise sanely.
inline GradCheckResult gradient_check(ParamStore& store,
                                      const std::function<double(ParamStore&)>& loss,
                                      const std::unordered_map<std::string, Tensor>& grads,
                                      double step = 1e-5, double soft = 1e-4, double hard = 1e-3) {
    GradCheckResult res;
    for (ParamStore::Entry& e : store.entries()) {
        auto it = grads.find(e.name);
        for (int64_t i = 0; i < e.value.size(); ++i) {
            double saved = e.value.data[i];
            e.value.data[i] = saved + step;
            double up = loss(store);
            e.value.data[i] = saved - step;
            double down = loss(store);
            e.value.data[i] = saved;
            double numeric = (up - down) / (2.0 * step);
            double analytic = it == grads.end() ? 0.0 : it->second.data[i];
            double rel = std::fabs(analytic - numeric) /
                         std::max(std::fabs(analytic) + std::fabs(numeric), 1e-6);
            ++res.checked;
            if (rel >= soft) ++res.over_soft;
            if (rel >= hard) ++res.over_hard;
            if (rel > res.worst) {
                res.worst = rel;
                res.worst_param = e.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace kt
