// Knowledge-tracing benchmark CLI: dataset preprocessing, synthetic data,
// cross-validated training, grid search, selection-metric analysis and
// reporting. Exit codes: 0 ok, 2 usage, 3 data, 4 training divergence,
// 5 internal check failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>

#include "kt/checkpoint.hpp"
#include "kt/gradcheck.hpp"
#include "kt/grid.hpp"
#include "kt/report.hpp"
#include "kt/results_io.hpp"
#include "kt/train.hpp"

namespace fs = std::filesystem;
using namespace kt;

namespace {

constexpr const char* kVersion = "ktbench 0.1.0";

struct CommonOpts {
    int jobs = default_jobs();
    uint64_t seed = 42;
};

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

std::string dataset_csv_path(const std::string& spec) {
    fs::path p(spec);
    if (fs::is_directory(p)) p /= "dataset.csv";
    if (!fs::exists(p)) throw DataError("dataset not found: " + p.string());
    return p.string();
}

Dataset load_dataset(const std::string& spec) {
    return parse_dataset_file(dataset_csv_path(spec)).first;
}

std::string dataset_label(const std::string& spec) {
    fs::path p(spec);
    std::string name = fs::is_directory(p) ? p.filename().string() : p.stem().string();
    return name.empty() ? "dataset" : name;
}

void write_dataset_dir(const Dataset& ds, const fs::path& dir, const std::string& command,
                       const ParseStats* stats, uint64_t seed) {
    write_canonical_file(ds, (dir / "dataset.csv").string());
    std::ofstream summary(dir / "summary.json");
    summary << dataset_summary_json(ds, stats);
    write_manifest(dir, command,
                   {{"dataset_digest", hex64(fnv1a_of_file((dir / "dataset.csv").string()))},
                    {"master_seed", std::to_string(seed)},
                    {"students", std::to_string(ds.student_count())},
                    {"attempts", std::to_string(ds.total_attempts())}});
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read config: " + path);
    std::map<std::string, std::string> kv;
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
        if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

// Per-fold fitted-model artifacts for --save-models.
void save_fold_artifacts(const fs::path& dir, const FoldArtifacts& a, const Dataset& ds) {
    std::string fold = std::to_string(a.fold);
    if (a.dlkt) {
        std::map<std::string, std::string> meta = {
            {"architecture", architecture_tag(a.dlkt->hp.architecture)},
            {"hyperparams", a.dlkt->hp.str()},
            {"skill_count", std::to_string(a.dlkt->skill_count)},
            {"max_steps", std::to_string(a.dlkt->max_steps)},
            {"seed", std::to_string(a.dlkt->hp.seed)}};
        save_checkpoint_file((dir / ("model-fold" + fold + ".ckpt")).string(), a.dlkt->params, meta);
    }
    if (a.bkt) {
        std::ofstream f(dir / ("bkt-params-fold" + fold + ".csv"));
        f << "skill,prior,transit,guess,slip\n";
        for (int k = 0; k < a.bkt->skill_count; ++k) {
            if (!a.bkt->skill_fitted[k]) continue;
            const BktParams& p = a.bkt->skills[k];
            f << ds.skill_names[k] << "," << format_double(p.prior) << "," << format_double(p.transit)
              << "," << format_double(p.guess) << "," << format_double(p.slip) << "\n";
        }
    }
    if (a.glr) {
        ParamStore store;
        store.add("w", Tensor::row(a.glr->weights));
        save_checkpoint_file((dir / ("glr-weights-fold" + fold + ".ckpt")).string(), store,
                             {{"model", "glr"},
                              {"students", std::to_string(a.glr->space.n_students)},
                              {"skills", std::to_string(a.glr->space.n_skills)}});
    }
}

// ---- selftest ------------------------------------------------------------------
// Independent mini-oracles: pairwise AUC and direct confusion formulas coded
// here, apart from the metrics module they check.

bool selftest_metrics(std::ostream& os) {
    Rng rng(20240501);
    for (int round = 0; round < 200; ++round) {
        int n = 2 + static_cast<int>(rng.below(19));
        std::vector<int> labels(n);
        std::vector<double> probs(n);
        for (int i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(2));
            probs[i] = static_cast<double>(rng.below(9)) / 8.0;
        }
        double wins = 0.0;
        long pairs = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (labels[i] == 1 && labels[j] == 0) {
                    ++pairs;
                    wins += probs[i] > probs[j] ? 1.0 : probs[i] == probs[j] ? 0.5 : 0.0;
                }
        auto fast = auc(labels, probs);
        if (pairs == 0) {
            if (fast) return false;
            continue;
        }
        if (!fast || std::fabs(*fast - wins / pairs) > 1e-9) return false;
    }
    os << "pass metric-oracle: rank auc equals pairwise auc on 200 random instances\n";

    ThresholdMetrics tm = threshold_metrics(ConfusionCounts{2, 1, 3, 2});
    bool ok = std::fabs(*tm.accuracy - 0.625) < 1e-12 && std::fabs(*tm.precision - 2.0 / 3.0) < 1e-12 &&
              std::fabs(*tm.recall - 0.5) < 1e-12 && std::fabs(*tm.f1 - 4.0 / 7.0) < 1e-9 &&
              std::fabs(*tm.mcc - 4.0 / std::sqrt(240.0)) < 1e-9;
    if (!ok) return false;
    os << "pass metric-oracle: confusion formulas reproduce the frozen example\n";

    if (std::fabs(log_loss({1, 0}, {0.8, 0.4}) - (-std::log(0.8) - std::log(0.6)) / 2.0) > 1e-12)
        return false;
    if (std::fabs(rmse({1, 0, 1}, {0.9, 0.2, 0.6}) - std::sqrt(0.21 / 3.0)) > 1e-12) return false;
    os << "pass metric-oracle: rmse and log loss match direct evaluation\n";
    return true;
}

bool selftest_gradients(std::ostream& os) {
    Rng data_rng(31);
    for (Architecture arch :
         {Architecture::VanillaDkt, Architecture::LstmDkt, Architecture::LstmDktSPlus,
          Architecture::Dkvmn, Architecture::DkvmnPaper, Architecture::Sakt}) {
        HyperParams hp;
        hp.architecture = arch;
        hp.recurrent_size = 8;
        hp.key_embed_size = 6;
        hp.value_embed_size = 6;
        hp.summary_size = 8;
        hp.input = InputVariant::Embedding;
        hp.output = OutputVariant::SkillsToScalar;
        hp.seed = 17;
        hp.batch_size = 2;
        const int skills = 5, seq_len = 6;
        Dataset ds;
        ds.skill_count = skills;
        for (int k = 0; k < skills; ++k) ds.skill_names.push_back(std::to_string(k));
        for (int s = 0; s < 2; ++s) {
            ds.student_names.push_back(std::to_string(s));
            ds.sequences.emplace_back();
            for (int t = 0; t < seq_len; ++t)
                ds.sequences.back().push_back(Interaction{s, static_cast<int>(data_rng.below(skills)),
                                                          static_cast<int>(data_rng.below(2)), t});
        }
        ModelState m = build_model(hp, skills, seq_len - 1);
        SeqBatch batch = make_batch(ds, make_views(ds, {0, 1}));
        auto loss_fn = [&](ParamStore&) {
            Graph g;
            BoundParams bp(g, m.params);
            Rng drop(99);
            ForwardOut out = forward_batch(g, bp, m, ds, batch, true, &drop);
            return g.value(g.bce_masked(out.probs, out.labels, out.mask)).data[0];
        };
        Graph g;
        BoundParams bp(g, m.params);
        Rng drop(99);
        ForwardOut out = forward_batch(g, bp, m, ds, batch, true, &drop);
        g.backward(g.bce_masked(out.probs, out.labels, out.mask));
        GradCheckResult res = gradient_check(m.params, loss_fn, bp.grads());
        if (!res.ok()) {
            os << "fail gradient-check " << architecture_tag(arch) << ": worst " << res.worst << " at "
               << res.worst_param << "\n";
            return false;
        }
        os << "pass gradient-check " << architecture_tag(arch) << " (" << res.checked
           << " parameters, worst rel. err. " << res.worst << ")\n";
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) + " — knowledge-tracing benchmark"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value config with a [subcommand] section; flags override it");
    std::ostringstream cmdline;
    for (int i = 0; i < argc; ++i) cmdline << (i ? " " : "") << argv[i];

    // preprocess
    auto* cmd_pre = app.add_subcommand("preprocess", "ingest a raw delimiter-separated export");
    std::string pre_raw, pre_mapping, pre_out;
    cmd_pre->add_option("raw", pre_raw, "raw input file")->required();
    cmd_pre->add_option("--mapping", pre_mapping, "column-mapping config (key=value)");
    cmd_pre->add_option("--out", pre_out, "output directory")->required();

    // synth
    auto* cmd_synth = app.add_subcommand("synth", "generate the synthetic IRT-style dataset");
    int synth_students = 1000, synth_exercises = 50, synth_concepts = 2;
    SyntheticConfig synth_cfg;
    std::string synth_out;
    cmd_synth->add_option("--students", synth_students, "number of students")->required();
    cmd_synth->add_option("--exercises", synth_exercises, "exercises per student")->required();
    cmd_synth->add_option("--concepts", synth_concepts, "hidden concepts")->required();
    uint64_t synth_seed = 42;
    cmd_synth->add_option("--seed", synth_seed, "generator seed");
    cmd_synth->add_option("--guess", synth_cfg.guess, "guess floor");
    cmd_synth->add_option("--ability-sd", synth_cfg.ability_sd, "per-concept ability spread");
    cmd_synth->add_option("--difficulty-sd", synth_cfg.difficulty_sd, "exercise difficulty spread");
    cmd_synth->add_option("--increment", synth_cfg.learn_increment,
                          "ability gain per attempt on a concept");
    cmd_synth->add_option("--out", synth_out, "output directory")->required();

    // train
    auto* cmd_train = app.add_subcommand("train", "single cross-validated run of one model");
    std::string train_model_tag, train_dataset, train_hyper, train_out, train_policy = "none";
    CommonOpts train_common;
    int train_folds = 5, train_max_epochs = 100, train_patience = 10;
    bool train_off_grid = false, train_save_models = false;
    cmd_train->add_option("--model", train_model_tag, "model tag")->required();
    cmd_train->add_option("--dataset", train_dataset, "dataset directory or csv")->required();
    cmd_train->add_option("--hyper", train_hyper, "hyperparameter config (key=value)");
    cmd_train->add_option("--max-attempt", train_policy, "none|cut:L|split:L");
    cmd_train->add_option("--seed", train_common.seed, "master seed");
    cmd_train->add_option("--folds", train_folds, "cross-validation folds");
    cmd_train->add_option("--max-epochs", train_max_epochs, "epoch budget");
    cmd_train->add_option("--patience", train_patience, "early-stopping patience");
    cmd_train->add_option("--jobs", train_common.jobs, "parallel workers");
    cmd_train->add_flag("--off-grid", train_off_grid, "allow hyperparameters outside the benchmark grid");
    cmd_train->add_flag("--save-models", train_save_models, "write per-fold fitted-model artifacts");
    cmd_train->add_option("--out", train_out, "output directory")->required();

    // gridsearch
    auto* cmd_grid = app.add_subcommand("gridsearch", "grid search over the benchmark hyperparameters");
    std::string grid_model, grid_dataset, grid_select = "auc", grid_out, grid_policy = "none";
    CommonOpts grid_common;
    int grid_max_epochs = 100, grid_patience = 10;
    cmd_grid->add_option("--model", grid_model, "deep model tag")->required();
    cmd_grid->add_option("--dataset", grid_dataset, "dataset directory or csv")->required();
    cmd_grid->add_option("--select", grid_select, "selection metric");
    cmd_grid->add_option("--max-attempt", grid_policy, "none|cut:L|split:L");
    cmd_grid->add_option("--seed", grid_common.seed, "master seed");
    cmd_grid->add_option("--max-epochs", grid_max_epochs, "epoch budget");
    cmd_grid->add_option("--patience", grid_patience, "early-stopping patience");
    cmd_grid->add_option("--jobs", grid_common.jobs, "parallel workers");
    cmd_grid->add_option("--out", grid_out, "output directory")->required();

    // analyze selection-loss
    auto* cmd_analyze = app.add_subcommand("analyze", "offline analyses over saved results");
    auto* cmd_loss = cmd_analyze->add_subcommand("selection-loss", "selection-metric loss matrix");
    std::vector<std::string> loss_results;
    std::string loss_out;
    cmd_loss->add_option("--results", loss_results, "result directories or files")->required();
    cmd_loss->add_option("--out", loss_out, "output directory")->required();

    // report
    auto* cmd_report = app.add_subcommand("report", "render comparison tables from saved results");
    std::vector<std::string> report_results;
    std::string report_format = "text", report_out;
    cmd_report->add_option("--results", report_results, "result directories or files")->required();
    cmd_report->add_option("--format", report_format, "text|csv|json");
    cmd_report->add_option("--out", report_out, "optional output directory");

    // selftest
    auto* cmd_selftest = app.add_subcommand("selftest", "gradient and metric oracle checks");

    try {
        app.parse(argc, argv);

        if (cmd_pre->parsed()) {
            ColumnMapping mapping;
            if (!pre_mapping.empty()) mapping = load_mapping_file(pre_mapping);
            auto [ds, stats] = parse_dataset_file(pre_raw, mapping);
            fs::path dir = ensure_out_dir(pre_out);
            write_dataset_dir(ds, dir, cmdline.str(), &stats, 0);
            std::cout << dataset_summary_json(ds, &stats);
            std::cout << "wrote " << (dir / "dataset.csv").string() << "\n";
            return 0;
        }

        if (cmd_synth->parsed()) {
            synth_cfg.students = synth_students;
            synth_cfg.exercises = synth_exercises;
            synth_cfg.concepts = synth_concepts;
            synth_cfg.seed = synth_seed;
            Dataset ds = generate_synthetic(synth_cfg);
            fs::path dir = ensure_out_dir(synth_out);
            write_dataset_dir(ds, dir, cmdline.str(), nullptr, synth_seed);
            std::cout << dataset_summary_json(ds);
            std::cout << "wrote " << (dir / "dataset.csv").string() << "\n";
            return 0;
        }

        if (cmd_train->parsed()) {
            bool is_baseline = false;
            for (const auto& tag : baseline_tags()) is_baseline = is_baseline || tag == train_model_tag;
            if (!is_baseline) architecture_from_tag(train_model_tag);  // usage error for unknown tags
            Dataset ds = load_dataset(train_dataset);
            MaxAttemptPolicy policy = MaxAttemptPolicy::parse(train_policy);
            if (policy.mode != MaxAttemptMode::None) {
                int before = ds.student_count();
                ds = apply_max_attempt(ds, policy);
                std::cout << "max-attempt " << policy.str() << ": " << before << " -> "
                          << ds.student_count() << " sequences\n";
            }
            ModelSpec spec;
            if (is_baseline) {
                spec = ModelSpec::baseline(train_model_tag);
                if (!train_hyper.empty()) throw UsageError("--hyper applies only to deep models");
            } else {
                Architecture arch = architecture_from_tag(train_model_tag);
                HyperParams hp = hyperparams_from_config(
                    train_hyper.empty() ? std::map<std::string, std::string>{} : read_kv_file(train_hyper),
                    arch);
                validate_structure(hp);
                if (!train_off_grid && !on_grid(hp))
                    throw UsageError(
                        "hyperparameters are off the benchmark grid (pass --off-grid to allow): " +
                        hp.str());
                spec = ModelSpec::deep(hp);
            }
            TrainConfig cfg;
            cfg.max_epochs = train_max_epochs;
            cfg.patience = train_patience;
            fs::path dir = ensure_out_dir(train_out);
            std::mutex sink_mutex;
            ArtifactSink sink;
            if (train_save_models)
                sink = [&](const FoldArtifacts& a) {
                    std::lock_guard<std::mutex> lock(sink_mutex);
                    save_fold_artifacts(dir, a, ds);
                };
            RunResult run = cross_validate(spec, ds, dataset_label(train_dataset), train_folds,
                                           train_common.seed, cfg, train_common.jobs, sink);
            write_results_csv_file((dir / "results.csv").string(), {run});
            std::ofstream report(dir / "report.txt");
            report << render_report_text({run});
            write_manifest(dir, cmdline.str(),
                           {{"dataset_digest", hex64(fnv1a_of_file(dataset_csv_path(train_dataset)))},
                            {"config_digest", hex64(fnv1a64(run.config_id() + "|" + policy.str()))},
                            {"master_seed", std::to_string(train_common.seed)},
                            {"model", train_model_tag},
                            {"max_attempt", policy.str()},
                            {"wall_seconds", format_double(run.wall_seconds)}});
            std::cout << render_report_text({run});
            return 0;
        }

        if (cmd_grid->parsed()) {
            Dataset ds = load_dataset(grid_dataset);
            MaxAttemptPolicy policy = MaxAttemptPolicy::parse(grid_policy);
            if (policy.mode != MaxAttemptMode::None) ds = apply_max_attempt(ds, policy);
            Architecture arch = architecture_from_tag(grid_model);
            TrainConfig cfg;
            cfg.max_epochs = grid_max_epochs;
            cfg.patience = grid_patience;
            GridSearchResult res = grid_search(arch, ds, dataset_label(grid_dataset), grid_select,
                                               grid_common.seed, cfg, grid_common.jobs);
            fs::path dir = ensure_out_dir(grid_out);
            write_results_csv_file((dir / "results.csv").string(), res.runs);
            std::ofstream best(dir / "best.txt");
            best << "selection_metric " << grid_select << "\n";
            best << "best_config " << res.best().config_id() << "\n";
            best << "best_" << grid_select << " " << format_double(*res.best().mean.get(grid_select))
                 << "\n";
            for (const auto& w : res.warnings) best << "warning " << w << "\n";
            write_manifest(dir, cmdline.str(),
                           {{"dataset_digest", hex64(fnv1a_of_file(dataset_csv_path(grid_dataset)))},
                            {"master_seed", std::to_string(grid_common.seed)},
                            {"model", grid_model},
                            {"selection_metric", grid_select},
                            {"grid_size", std::to_string(res.runs.size())}});
            std::cout << "grid points: " << res.runs.size() << "\n";
            std::cout << "best by " << grid_select << ": " << res.best().config_id() << " ("
                      << format_double(*res.best().mean.get(grid_select)) << ")\n";
            return 0;
        }

        if (cmd_loss->parsed()) {
            std::vector<RunResult> runs = load_results(loss_results);
            LossMatrix lm = selection_loss_analysis(runs);
            fs::path dir = ensure_out_dir(loss_out);
            std::ofstream csv(dir / "selection_loss.csv");
            csv << render_loss_matrix_csv(lm);
            std::ofstream txt(dir / "selection_loss.txt");
            txt << render_loss_matrix_text(lm);
            write_manifest(dir, cmdline.str(), {{"runs", std::to_string(runs.size())}});
            std::cout << render_loss_matrix_text(lm);
            for (const auto& w : lm.warnings) std::cout << "warning: " << w << "\n";
            return 0;
        }

        if (cmd_report->parsed()) {
            std::vector<RunResult> runs = load_results(report_results);
            std::string rendered;
            if (report_format == "text") rendered = render_report_text(runs);
            else if (report_format == "csv") rendered = render_report_csv(runs);
            else if (report_format == "json") rendered = render_report_json(runs);
            else throw UsageError("unknown report format '" + report_format + "' (use text|csv|json)");
            if (!report_out.empty()) {
                fs::path dir = ensure_out_dir(report_out);
                std::ofstream f(dir /
                                ("report." + (report_format == "text" ? std::string("txt") : report_format)));
                f << rendered;
                write_manifest(dir, cmdline.str(), {{"runs", std::to_string(runs.size())}});
            }
            std::cout << rendered;
            return 0;
        }

        if (cmd_selftest->parsed()) {
            bool ok = selftest_metrics(std::cout) && selftest_gradients(std::cout);
            if (!ok) {
                std::cout << "selftest: FAIL\n";
                return 5;
            }
            std::cout << "selftest: all checks pass\n";
            return 0;
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error[data]: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error[data]: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error[divergence]: " << e.what() << "\n";
        return 4;
    } catch (const InternalError& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 5;
    }
}
