#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kt/grid.hpp"
#include "kt/results_io.hpp"

namespace kt {

// Three decimals in the tables' style: leading zero stripped (".761", "-.123").
inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    std::string s = buf;
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    else if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
    return s;
}

// ".761±.009", or the em dash for undefined values.
inline std::string fmt_mean_std(std::optional<double> mean, std::optional<double> std) {
    if (!mean) return "—";
    return fmt3(*mean) + "±" + (std ? fmt3(*std) : fmt3(0.0));
}

namespace detail {

inline std::map<std::string, std::vector<const RunResult*>> group_by_dataset(
    const std::vector<RunResult>& runs) {
    std::map<std::string, std::vector<const RunResult*>> by_dataset;
    for (const RunResult& r : runs) by_dataset[r.dataset_name].push_back(&r);
    return by_dataset;
}

// winning row per metric column (argmax, argmin for rmse/log loss)
inline std::vector<int> column_winners(const std::vector<const RunResult*>& rows,
                                       const std::vector<std::string>& metrics) {
    std::vector<int> winners(metrics.size(), -1);
    for (size_t c = 0; c < metrics.size(); ++c)
        for (size_t r = 0; r < rows.size(); ++r) {
            auto v = rows[r]->mean.get(metrics[c]);
            if (!v) continue;
            if (winners[c] < 0 || metric_better(*v, *rows[winners[c]]->mean.get(metrics[c]), metrics[c]))
                winners[c] = static_cast<int>(r);
        }
    return winners;
}

inline std::string row_label(const RunResult& r, bool tags_unique) {
    return tags_unique ? r.model_tag : r.config_id();
}

inline bool tags_unique(const std::vector<const RunResult*>& rows) {
    std::map<std::string, int> seen;
    for (const RunResult* r : rows) ++seen[r->model_tag];
    for (auto& [tag, count] : seen)
        if (count > 1) return false;
    return true;
}

}  // namespace detail

// Per-dataset comparison table, models as rows, metrics as columns, column
// winners flagged with '*'.
inline std::string render_report_text(const std::vector<RunResult>& runs) {
    std::ostringstream os;
    for (auto& [dataset, rows] : detail::group_by_dataset(runs)) {
        const auto& metrics = MetricReport::names();
        bool unique = detail::tags_unique(rows);
        size_t label_w = 5;
        for (const RunResult* r : rows)
            label_w = std::max(label_w, detail::row_label(*r, unique).size());
        os << "dataset: " << dataset << "\n";
        os << std::string(label_w, ' ');
        for (const auto& m : metrics) {
            os << "  ";
            os.width(12);
            os << m;
        }
        os << "\n";
        std::vector<int> winners = detail::column_winners(rows, metrics);
        for (size_t r = 0; r < rows.size(); ++r) {
            std::string label = detail::row_label(*rows[r], unique);
            os << label << std::string(label_w - label.size(), ' ');
            for (size_t c = 0; c < metrics.size(); ++c) {
                std::string cell = fmt_mean_std(rows[r]->mean.get(metrics[c]),
                                                rows[r]->stddev.get(metrics[c]));
                if (winners[c] == static_cast<int>(r)) cell += "*";
                os << "  ";
                os.width(12);
                os << cell;
            }
            os << "\n";
        }
        os << "\n";
    }
    return os.str();
}

inline std::string render_report_csv(const std::vector<RunResult>& runs) {
    std::ostringstream os;
    os << "dataset,model,config";
    for (const auto& m : MetricReport::names()) os << "," << m << "_mean," << m << "_std";
    os << "\n";
    for (auto& [dataset, rows] : detail::group_by_dataset(runs))
        for (const RunResult* r : rows) {
            os << dataset << "," << r->model_tag << "," << r->config_id();
            for (const auto& m : MetricReport::names())
                os << "," << format_metric_field(r->mean.get(m)) << ","
                   << format_metric_field(r->stddev.get(m));
            os << "\n";
        }
    return os.str();
}

inline std::string render_report_json(const std::vector<RunResult>& runs) {
    std::ostringstream os;
    os << "[\n";
    bool first = true;
    for (auto& [dataset, rows] : detail::group_by_dataset(runs))
        for (const RunResult* r : rows) {
            if (!first) os << ",\n";
            first = false;
            os << "  {\"dataset\": \"" << json_escape(dataset) << "\", \"model\": \""
               << json_escape(r->model_tag) << "\", \"config\": \"" << json_escape(r->config_id())
               << "\"";
            for (const auto& m : MetricReport::names()) {
                auto mean = r->mean.get(m);
                auto std = r->stddev.get(m);
                os << ", \"" << m << "\": " << (mean ? format_double(*mean) : "null");
                os << ", \"" << m << "_std\": " << (std ? format_double(*std) : "null");
            }
            os << "}";
        }
    os << "\n]\n";
    return os.str();
}

inline std::string render_loss_matrix_text(const LossMatrix& lm) {
    std::ostringstream os;
    os << "selection-metric loss (rows: selection metric, columns: evaluated metric)\n";
    auto table = [&](const char* title, const std::vector<std::vector<double>>& cells) {
        os << title << "\n";
        os << "        ";
        for (const auto& m : lm.metrics) {
            os.width(10);
            os << m;
        }
        os << "\n";
        for (size_t a = 0; a < lm.metrics.size(); ++a) {
            os.width(8);
            os << lm.metrics[a];
            for (size_t b = 0; b < lm.metrics.size(); ++b) {
                os.width(10);
                if (lm.pair_count[a][b] == 0) os << "—";
                else os << fmt3(cells[a][b]);
            }
            os << "\n";
        }
    };
    table("mean loss:", lm.mean_loss);
    table("max loss:", lm.max_loss);
    return os.str();
}

inline std::string render_loss_matrix_csv(const LossMatrix& lm) {
    std::ostringstream os;
    os << "selection_metric,eval_metric,mean_loss,max_loss,groups\n";
    for (size_t a = 0; a < lm.metrics.size(); ++a)
        for (size_t b = 0; b < lm.metrics.size(); ++b)
            os << lm.metrics[a] << "," << lm.metrics[b] << "," << format_double(lm.mean_loss[a][b])
               << "," << format_double(lm.max_loss[a][b]) << "," << lm.pair_count[a][b] << "\n";
    return os.str();
}

}  // namespace kt
