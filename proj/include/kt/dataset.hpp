#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kt/errors.hpp"
#include "kt/rng.hpp"

namespace kt {

// One student attempt. `student` and `order` are redundant with the position
// inside Dataset::sequences but kept explicit so flat record processing does
// not need back-pointers.
struct Interaction {
    int student = 0;
    int skill = 0;
    int correct = 0;
    int order = 0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct Dataset {
    std::vector<std::vector<Interaction>> sequences;  // index == student
    int skill_count = 0;
    std::vector<std::string> skill_names;    // internal index -> original label
    std::vector<std::string> student_names;  // internal index -> original label
    std::map<std::string, std::string> metadata;

    int student_count() const { return static_cast<int>(sequences.size()); }

    int64_t total_attempts() const {
        int64_t n = 0;
        for (const auto& s : sequences) n += static_cast<int64_t>(s.size());
        return n;
    }

    int64_t total_correct() const {
        int64_t n = 0;
        for (const auto& s : sequences)
            for (const auto& a : s) n += a.correct;
        return n;
    }

    double percent_correct() const {
        int64_t n = total_attempts();
        return n == 0 ? 0.0 : 100.0 * static_cast<double>(total_correct()) / static_cast<double>(n);
    }

    int max_attempts() const {
        size_t m = 0;
        for (const auto& s : sequences) m = std::max(m, s.size());
        return static_cast<int>(m);
    }

    void validate() const {
        check(static_cast<int>(student_names.size()) == student_count(), "dataset: student name table size");
        check(static_cast<int>(skill_names.size()) == skill_count, "dataset: skill name table size");
        for (int s = 0; s < student_count(); ++s) {
            check(sequences[s].size() >= 2, "dataset: sequence shorter than 2 for student " + std::to_string(s));
            for (size_t t = 0; t < sequences[s].size(); ++t) {
                const Interaction& a = sequences[s][t];
                check(a.student == s, "dataset: student index mismatch");
                check(a.order == static_cast<int>(t), "dataset: order not dense from 0");
                check(a.correct == 0 || a.correct == 1, "dataset: correctness not binary");
                check(a.skill >= 0 && a.skill < skill_count, "dataset: skill index out of range");
            }
        }
    }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.sequences == b.sequences && a.skill_count == b.skill_count &&
               a.skill_names == b.skill_names && a.student_names == b.student_names;
    }
};

// ---- attempt encoding ------------------------------------------------------

// (skill, correct) -> 2*skill + correct, the joint input id in [0, 2S).
inline int encode_attempt(int skill, int correct, int skill_count) {
    if (skill < 0 || skill >= skill_count)
        throw DataError("encode_attempt: skill " + std::to_string(skill) + " out of range [0," +
                        std::to_string(skill_count) + ")");
    check(correct == 0 || correct == 1, "encode_attempt: correctness must be 0 or 1");
    return 2 * skill + correct;
}

// ---- parsing ---------------------------------------------------------------

struct ColumnMapping {
    std::string student = "student";
    std::string skill = "skill";
    std::string correct = "correct";
    char delimiter = 0;  // 0 = sniff from header (tab, semicolon, else comma)
};

// Simple key=value mapping files; '#' starts a comment.
inline ColumnMapping load_mapping_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read mapping config: " + path);
    ColumnMapping m;
    std::string line;
    while (std::getline(f, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "student_column") m.student = value;
        else if (key == "skill_column") m.skill = value;
        else if (key == "correct_column") m.correct = value;
        else if (key == "delimiter") {
            if (value == "tab") m.delimiter = '\t';
            else if (value == "comma") m.delimiter = ',';
            else if (value == "semicolon") m.delimiter = ';';
            else if (value.size() == 1) m.delimiter = value[0];
            else throw DataError("mapping: unknown delimiter '" + value + "'");
        } else {
            throw DataError("mapping: unknown key '" + key + "'");
        }
    }
    return m;
}

struct ParseStats {
    int64_t rows_read = 0;
    int64_t rows_missing_field = 0;
    int64_t rows_non_binary = 0;
    int64_t rows_kept = 0;
    int64_t students_dropped = 0;  // students left with fewer than 2 attempts
};

namespace detail {
inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trimmed(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// "0"/"1" possibly spelled as a number; anything else non-empty is non-binary.
inline std::optional<int> parse_binary(const std::string& raw) {
    std::string s = trimmed(raw);
    if (s == "0" || s == "1") return s[0] - '0';
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size() && (v == 0.0 || v == 1.0)) return static_cast<int>(v);
    } catch (...) {
    }
    return std::nullopt;
}
}  // namespace detail

// Builds a Dataset from delimiter-separated text with a header row. Rows with
// a missing student/skill/correct value or a non-binary correctness are
// dropped and counted; students left with fewer than 2 attempts are removed.
// Input row order is preserved per student (raw files carry no order column).
inline std::pair<Dataset, ParseStats> parse_dataset(std::istream& in, const ColumnMapping& mapping = {}) {
    std::string header;
    if (!std::getline(in, header)) throw DataError("parse error at row 1: empty input");
    char delim = mapping.delimiter;
    if (delim == 0)
        delim = header.find('\t') != std::string::npos ? '\t'
              : header.find(';') != std::string::npos  ? ';'
                                                        : ',';
    std::vector<std::string> cols = detail::split_line(header, delim);
    int c_student = -1, c_skill = -1, c_correct = -1;
    for (size_t i = 0; i < cols.size(); ++i) {
        std::string name = detail::trimmed(cols[i]);
        if (name == mapping.student) c_student = static_cast<int>(i);
        else if (name == mapping.skill) c_skill = static_cast<int>(i);
        else if (name == mapping.correct) c_correct = static_cast<int>(i);
    }
    if (c_student < 0 || c_skill < 0 || c_correct < 0)
        throw DataError("parse error at row 1: header lacks mapped columns (" + mapping.student + ", " +
                        mapping.skill + ", " + mapping.correct + ")");

    ParseStats stats;
    struct Row {
        int student;
        int skill;
        int correct;
    };
    std::vector<Row> rows;
    std::unordered_map<std::string, int> student_ids;
    std::unordered_map<std::string, int> skill_ids;
    std::vector<std::string> student_labels, skill_labels;

    std::string line;
    int64_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        ++stats.rows_read;
        std::vector<std::string> f = detail::split_line(line, delim);
        if (f.size() > cols.size())
            throw DataError("parse error at row " + std::to_string(lineno) + ": " +
                            std::to_string(f.size()) + " fields, header has " + std::to_string(cols.size()));
        auto field = [&](int c) {
            return c < static_cast<int>(f.size()) ? detail::trimmed(f[c]) : std::string();
        };
        std::string s_student = field(c_student);
        std::string s_skill = field(c_skill);
        std::string s_correct = field(c_correct);
        if (s_student.empty() || s_skill.empty() || s_correct.empty()) {
            ++stats.rows_missing_field;
            continue;
        }
        std::optional<int> correct = detail::parse_binary(s_correct);
        if (!correct) {
            ++stats.rows_non_binary;
            continue;
        }
        auto intern = [](std::unordered_map<std::string, int>& ids, std::vector<std::string>& labels,
                         const std::string& key) {
            auto it = ids.find(key);
            if (it != ids.end()) return it->second;
            int id = static_cast<int>(labels.size());
            ids.emplace(key, id);
            labels.push_back(key);
            return id;
        };
        rows.push_back(Row{intern(student_ids, student_labels, s_student),
                           intern(skill_ids, skill_labels, s_skill), *correct});
        ++stats.rows_kept;
    }

    std::vector<int64_t> per_student(student_labels.size(), 0);
    for (const Row& r : rows) ++per_student[r.student];

    // Re-map surviving students/skills to dense indices in first-appearance order.
    std::vector<int> student_map(student_labels.size(), -1);
    std::vector<int> skill_map(skill_labels.size(), -1);
    Dataset ds;
    for (const Row& r : rows) {
        if (per_student[r.student] < 2) continue;
        if (student_map[r.student] < 0) {
            student_map[r.student] = static_cast<int>(ds.student_names.size());
            ds.student_names.push_back(student_labels[r.student]);
            ds.sequences.emplace_back();
        }
        if (skill_map[r.skill] < 0) {
            skill_map[r.skill] = static_cast<int>(ds.skill_names.size());
            ds.skill_names.push_back(skill_labels[r.skill]);
        }
        int s = student_map[r.student];
        ds.sequences[s].push_back(Interaction{s, skill_map[r.skill], r.correct,
                                              static_cast<int>(ds.sequences[s].size())});
    }
    for (size_t i = 0; i < per_student.size(); ++i)
        if (per_student[i] > 0 && per_student[i] < 2) ++stats.students_dropped;
    ds.skill_count = static_cast<int>(ds.skill_names.size());

    if (ds.sequences.empty()) throw DataError("empty dataset: no usable attempt sequences after filtering");
    ds.validate();
    return {std::move(ds), stats};
}

inline std::pair<Dataset, ParseStats> parse_dataset_file(const std::string& path,
                                                         const ColumnMapping& mapping = {}) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read dataset: " + path);
    return parse_dataset(f, mapping);
}

// Canonical preprocessed form: one attempt per line, dense indices.
inline void write_canonical(const Dataset& ds, std::ostream& os) {
    os << "student,skill,correct\n";
    for (const auto& seq : ds.sequences)
        for (const Interaction& a : seq) os << a.student << "," << a.skill << "," << a.correct << "\n";
}

inline void write_canonical_file(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write dataset: " + path);
    write_canonical(ds, f);
}

// ---- maximum-attempt policies ----------------------------------------------

enum class MaxAttemptMode { None, Cut, Split };

struct MaxAttemptPolicy {
    MaxAttemptMode mode = MaxAttemptMode::None;
    int limit = 0;

    // "none" | "cut:L" | "split:L"
    static MaxAttemptPolicy parse(const std::string& s) {
        if (s == "none") return {};
        auto colon = s.find(':');
        std::string kind = s.substr(0, colon);
        MaxAttemptPolicy p;
        if (kind == "cut") p.mode = MaxAttemptMode::Cut;
        else if (kind == "split") p.mode = MaxAttemptMode::Split;
        else throw UsageError("unknown max-attempt policy '" + s + "' (use none|cut:L|split:L)");
        if (colon == std::string::npos)
            throw UsageError("max-attempt policy '" + s + "' needs a limit, e.g. " + kind + ":200");
        p.limit = std::stoi(s.substr(colon + 1));
        if (p.limit < 2) throw UsageError("max-attempt limit must be >= 2");
        return p;
    }

    std::string str() const {
        switch (mode) {
            case MaxAttemptMode::None: return "none";
            case MaxAttemptMode::Cut: return "cut:" + std::to_string(limit);
            case MaxAttemptMode::Split: return "split:" + std::to_string(limit);
        }
        return "none";
    }
};

// Cut truncates to the first `limit` attempts. Split partitions a length-L
// sequence, in order, into ceil(L/limit) pseudo-students (the last one gets
// L mod limit attempts); a length-1 leftover is removed to keep the
// length->=2 invariant. Pseudo-students get fresh indices named
// "<label>#<part>".
inline Dataset apply_max_attempt(const Dataset& ds, MaxAttemptPolicy policy) {
    if (policy.mode == MaxAttemptMode::None) return ds;
    Dataset out;
    out.skill_count = ds.skill_count;
    out.skill_names = ds.skill_names;
    out.metadata = ds.metadata;
    auto append_sequence = [&out](const std::string& name, auto begin, auto end) {
        if (std::distance(begin, end) < 2) return;
        int s = static_cast<int>(out.sequences.size());
        out.student_names.push_back(name);
        out.sequences.emplace_back();
        auto& seq = out.sequences.back();
        for (auto it = begin; it != end; ++it) {
            Interaction a = *it;
            a.student = s;
            a.order = static_cast<int>(seq.size());
            seq.push_back(a);
        }
    };
    for (int s = 0; s < ds.student_count(); ++s) {
        const auto& seq = ds.sequences[s];
        if (policy.mode == MaxAttemptMode::Cut) {
            size_t keep = std::min<size_t>(seq.size(), static_cast<size_t>(policy.limit));
            append_sequence(ds.student_names[s], seq.begin(), seq.begin() + keep);
        } else {
            if (seq.size() <= static_cast<size_t>(policy.limit)) {
                append_sequence(ds.student_names[s], seq.begin(), seq.end());
                continue;
            }
            int part = 0;
            for (size_t off = 0; off < seq.size(); off += policy.limit, ++part) {
                size_t end = std::min(seq.size(), off + policy.limit);
                append_sequence(ds.student_names[s] + "#" + std::to_string(part), seq.begin() + off,
                                seq.begin() + end);
            }
        }
    }
    if (out.sequences.empty()) throw DataError("empty dataset: max-attempt policy removed every sequence");
    out.validate();
    return out;
}

// ---- folds and validation splits --------------------------------------------

struct FoldPlan {
    int fold_count = 0;
    std::vector<int> assignment;  // student -> fold

    std::vector<std::vector<int>> fold_students() const {
        std::vector<std::vector<int>> out(fold_count);
        for (size_t s = 0; s < assignment.size(); ++s) out[assignment[s]].push_back(static_cast<int>(s));
        return out;
    }
};

// Students shuffled with the seeded generator, then dealt round-robin, so
// fold sizes differ by at most one.
inline FoldPlan make_folds(const Dataset& ds, int k, uint64_t seed) {
    if (k < 2) throw UsageError("make_folds: need k >= 2");
    if (ds.student_count() < k)
        throw UsageError("make_folds: " + std::to_string(ds.student_count()) + " students < " +
                         std::to_string(k) + " folds");
    std::vector<int> order(ds.student_count());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    FoldPlan plan;
    plan.fold_count = k;
    plan.assignment.assign(order.size(), -1);
    for (size_t i = 0; i < order.size(); ++i) plan.assignment[order[i]] = static_cast<int>(i % k);
    return plan;
}

// Moves ceil(fraction * N) students to validation via a seeded shuffle.
inline std::pair<std::vector<int>, std::vector<int>> split_validation(const std::vector<int>& students,
                                                                      double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw UsageError("split_validation: fraction must be in (0,1)");
    size_t n_val = static_cast<size_t>(std::ceil(fraction * static_cast<double>(students.size())));
    if (n_val == 0 || n_val >= students.size())
        throw UsageError("split_validation: fraction " + std::to_string(fraction) + " leaves an empty side for " +
                         std::to_string(students.size()) + " students");
    std::vector<int> order = students;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> val(order.begin(), order.begin() + n_val);
    std::vector<int> train(order.begin() + n_val, order.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    return {train, val};
}

// ---- synthetic data ----------------------------------------------------------

// IRT-flavoured stand-in for the synthetic student simulation: exercises get
// round-robin concepts and N(0, difficulty_sd) difficulties, students get
// N(0, ability_sd) per-concept abilities that grow by `learn_increment` per
// attempt on the concept, and
//   P(correct) = guess + (1 - guess) * sigmoid(ability - difficulty).
// Every student answers exercises 0..n-1 in order; skill id == exercise id.
struct SyntheticConfig {
    int students = 0;
    int exercises = 0;
    int concepts = 0;
    uint64_t seed = 0;
    double guess = 0.25;
    double ability_sd = 3.0;
    double difficulty_sd = 1.0;
    double learn_increment = 0.02;
};

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.students <= 0 || cfg.exercises <= 0 || cfg.concepts <= 0)
        throw UsageError("generate_synthetic: sizes must be positive");
    if (cfg.concepts > cfg.exercises)
        throw UsageError("generate_synthetic: more concepts than exercises");
    if (cfg.exercises < 2) throw UsageError("generate_synthetic: need at least 2 exercises");
    Rng rng(cfg.seed);
    Rng diff_rng = rng.derive("difficulty");
    Rng student_rng = rng.derive("students");

    std::vector<int> concept_of(cfg.exercises);
    for (int e = 0; e < cfg.exercises; ++e) concept_of[e] = e % cfg.concepts;
    std::vector<double> beta(cfg.exercises);
    for (double& b : beta) b = cfg.difficulty_sd * diff_rng.normal();

    Dataset ds;
    ds.skill_count = cfg.exercises;
    for (int e = 0; e < cfg.exercises; ++e) ds.skill_names.push_back(std::to_string(e));
    for (int s = 0; s < cfg.students; ++s) {
        std::vector<double> ability(cfg.concepts);
        for (double& a : ability) a = cfg.ability_sd * student_rng.normal();
        ds.student_names.push_back(std::to_string(s));
        ds.sequences.emplace_back();
        auto& seq = ds.sequences.back();
        for (int e = 0; e < cfg.exercises; ++e) {
            int c = concept_of[e];
            double p = cfg.guess + (1.0 - cfg.guess) / (1.0 + std::exp(-(ability[c] - beta[e])));
            int correct = student_rng.uniform() < p ? 1 : 0;
            seq.push_back(Interaction{s, e, correct, e});
            ability[c] += cfg.learn_increment;
        }
    }
    auto fmt = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    ds.metadata["generator"] = "irt-synthetic";
    ds.metadata["students"] = std::to_string(cfg.students);
    ds.metadata["exercises"] = std::to_string(cfg.exercises);
    ds.metadata["concepts"] = std::to_string(cfg.concepts);
    ds.metadata["seed"] = std::to_string(cfg.seed);
    ds.metadata["guess"] = fmt(cfg.guess);
    ds.metadata["ability_sd"] = fmt(cfg.ability_sd);
    ds.metadata["difficulty_sd"] = fmt(cfg.difficulty_sd);
    ds.metadata["learn_increment"] = fmt(cfg.learn_increment);
    ds.validate();
    return ds;
}

// ---- summary -----------------------------------------------------------------

// Mirrors the dataset-summary table columns (students, attempts, percent
// correct, skills, max attempts).
inline std::string dataset_summary_json(const Dataset& ds, const ParseStats* stats = nullptr) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"students\": " << ds.student_count() << ",\n";
    os << "  \"attempts\": " << ds.total_attempts() << ",\n";
    os << "  \"correct\": " << ds.total_correct() << ",\n";
    char pc[32];
    std::snprintf(pc, sizeof(pc), "%.2f", ds.percent_correct());
    os << "  \"percent_correct\": " << pc << ",\n";
    os << "  \"skills\": " << ds.skill_count << ",\n";
    os << "  \"max_attempts\": " << ds.max_attempts();
    if (stats) {
        os << ",\n  \"rows_read\": " << stats->rows_read;
        os << ",\n  \"rows_dropped_missing_field\": " << stats->rows_missing_field;
        os << ",\n  \"rows_dropped_non_binary\": " << stats->rows_non_binary;
        os << ",\n  \"students_dropped_short\": " << stats->students_dropped;
    }
    if (!ds.metadata.empty()) {
        os << ",\n  \"metadata\": {";
        bool first = true;
        for (const auto& [k, v] : ds.metadata) {
            os << (first ? "" : ", ") << "\"" << k << "\": \"" << v << "\"";
            first = false;
        }
        os << "}";
    }
    os << "\n}\n";
    return os.str();
}

}  // namespace kt
