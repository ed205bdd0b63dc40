#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kt/rng.hpp"
#include "kt/train.hpp"

namespace kt {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_metric_field(std::optional<double> v) {
    return v ? format_double(*v) : std::string();
}

// One record per (model, dataset, config, fold); undefined metrics are empty
// fields. Timing is deliberately absent so records are byte-reproducible.
inline void write_results_csv(std::ostream& os, const std::vector<RunResult>& runs) {
    os << "model,dataset,config,fold,n_targets,epochs";
    for (const auto& name : MetricReport::names()) os << "," << name;
    os << "\n";
    for (const RunResult& run : runs)
        for (const FoldResult& f : run.folds) {
            os << run.model_tag << "," << run.dataset_name << "," << run.config_id() << "," << f.fold
               << "," << f.n_targets << "," << f.epochs;
            for (const auto& name : MetricReport::names())
                os << "," << format_metric_field(f.report.get(name));
            os << "\n";
        }
}

inline void write_results_csv_file(const std::string& path, const std::vector<RunResult>& runs) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write results: " + path);
    write_results_csv(f, runs);
}

// Rebuilds RunResults (fold reports re-aggregated) from saved records, so the
// analysis commands can run offline from result directories.
inline std::vector<RunResult> read_results_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw DataError("results: empty file");
    std::string expected = "model,dataset,config,fold,n_targets,epochs";
    for (const auto& name : MetricReport::names()) expected += "," + name;
    if (header != expected) throw DataError("results: unexpected header");

    std::map<std::string, RunResult> by_key;
    std::vector<std::string> order;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        f.push_back(cur);
        if (f.size() != 6 + MetricReport::names().size())
            throw DataError("results: malformed record: " + line);
        std::string key = f[0] + "\x1f" + f[1] + "\x1f" + f[2];
        auto [it, fresh] = by_key.try_emplace(key);
        if (fresh) {
            it->second.model_tag = f[0];
            it->second.dataset_name = f[1];
            it->second.config = f[2];
            order.push_back(key);
        }
        FoldResult fr;
        fr.fold = std::stoi(f[3]);
        fr.n_targets = std::stoll(f[4]);
        fr.epochs = std::stoi(f[5]);
        for (size_t i = 0; i < MetricReport::names().size(); ++i) {
            const std::string& field = f[6 + i];
            fr.report.set(MetricReport::names()[i],
                          field.empty() ? std::nullopt : std::optional<double>(std::stod(field)));
        }
        it->second.folds.push_back(fr);
    }
    std::vector<RunResult> runs;
    for (const std::string& key : order) {
        RunResult& r = by_key[key];
        detail::aggregate_folds(r);
        runs.push_back(std::move(r));
    }
    return runs;
}

inline std::vector<RunResult> read_results_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read results: " + path);
    return read_results_csv(f);
}

// Collects results.csv files from result directories (or direct file paths).
inline std::vector<RunResult> load_results(const std::vector<std::string>& paths) {
    std::vector<RunResult> all;
    for (const std::string& p : paths) {
        std::filesystem::path fp(p);
        if (std::filesystem::is_directory(fp)) fp /= "results.csv";
        auto runs = read_results_csv_file(fp.string());
        all.insert(all.end(), runs.begin(), runs.end());
    }
    return all;
}

// ---- manifests -----------------------------------------------------------------

inline uint64_t fnv1a_of_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot digest file: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!f) break;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

// Every output directory gets exactly one manifest. Timestamps and wall-clock
// live here and only here; result files stay byte-reproducible.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    if (!f) throw DataError("cannot write manifest in " + dir.string());
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    f << "{\n";
    f << "  \"artifact\": \"ktbench 0.1.0\",\n";
    f << "  \"command\": \"" << json_escape(command) << "\",\n";
    for (const auto& [k, v] : fields) f << "  \"" << json_escape(k) << "\": \"" << json_escape(v) << "\",\n";
    f << "  \"timestamp_unix\": " << secs << "\n";
    f << "}\n";
}

}  // namespace kt
