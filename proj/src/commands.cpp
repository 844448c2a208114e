#include "gcnc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "gcnc/bounds.hpp"
#include "gcnc/errors.hpp"
#include "gcnc/report.hpp"
#include "gcnc/transfer.hpp"
#include "gcnc/verify.hpp"

namespace gcnc {

namespace fs = std::filesystem;

std::string_view to_string(Command c) {
    switch (c) {
        case Command::train: return "train";
        case Command::sweep: return "sweep";
        case Command::transfer: return "transfer";
        case Command::estimate_gc: return "estimate-gc";
        case Command::bounds: return "bounds";
        case Command::verify: return "verify";
    }
    return "unknown";
}

Command command_from_string(std::string_view name) {
    for (Command c : {Command::train, Command::sweep, Command::transfer, Command::estimate_gc,
                      Command::bounds, Command::verify})
        if (name == to_string(c)) return c;
    throw ConfigError("command", "unknown command '" + std::string(name) + "'");
}

ExperimentData build_data(const DatasetConfig& cfg) {
    LabeledDataset all;
    if (cfg.kind == "idx") {
        IdxLoadReport report;
        all = load_idx(cfg.images, cfg.labels, &report);
        if (report.rows_trimmed > 0)
            std::clog << "idx: trimmed " << report.rows_trimmed << " of " << report.rows_read
                      << " rows to balance classes\n";
    } else {
        all = gen_gaussian_mixture(cfg.k, cfg.d, cfg.mean_scale, cfg.sigma, cfg.m_per_class,
                                   cfg.seed);
    }
    all.validate();

    ExperimentData data;
    LabeledDataset pool;
    if (!cfg.source_classes.empty()) {
        auto [source, target] = split_classes(all, {cfg.source_classes, cfg.target_classes});
        pool = std::move(source);
        data.target = std::move(target);
    } else {
        pool = std::move(all);
    }
    auto [train, test] = stratified_split(pool, cfg.test_fraction, derive_seed(cfg.seed, 7));
    data.train = std::move(train);
    data.test = std::move(test);
    return data;
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommandOptions& opts) {
    if (opts.out_dir) cfg.output.dir = opts.out_dir->string();
    if (opts.seed) {
        cfg.train.seed = *opts.seed;
        cfg.sweep.seeds = {*opts.seed};
    }
    return cfg;
}

namespace {

std::vector<std::string> summary_header() {
    std::vector<std::string> h = {"run_id", "lr", "batch_size", "l2", "gc_reg", "seed", "status"};
    const auto& f = metrics_record_fields();
    h.insert(h.end(), f.begin(), f.end());
    return h;
}

std::vector<std::string> summary_row(const std::string& run_id, const RunLog& log) {
    const TrainConfig& c = log.config;
    std::vector<std::string> row = {run_id,
                                    format_csv_number(c.lr),
                                    std::to_string(c.batch_size),
                                    format_csv_number(c.l2),
                                    format_csv_number(c.gc_reg),
                                    std::to_string(c.seed),
                                    log.diverged ? "diverged@" + std::to_string(log.divergence_step)
                                                 : "ok"};
    const auto cells = to_csv_cells(log.records.back());
    row.insert(row.end(), cells.begin(), cells.end());
    return row;
}

std::optional<TransferTarget> make_target(const ExperimentConfig& cfg, const ExperimentData& data) {
    if (!data.target) return std::nullopt;
    return TransferTarget{*data.target, cfg.transfer.episodes, cfg.transfer.lambda};
}

void write_resolved_config(const ExperimentConfig& cfg, const fs::path& dir) {
    std::ofstream out(dir / (cfg.output.run_id + ".config"));
    out << format_config(cfg);
}

double run_max_c(const RunLog& log) {
    double c = 0.0;
    for (const auto& r : log.records)
        if (std::isfinite(r.c_lower_bound)) c = std::max(c, r.c_lower_bound);
    return c;
}

int single_run(const ExperimentConfig& cfg, const ExperimentData& data, const fs::path& dir,
               std::ostream& log, RunLog* out_log = nullptr) {
    const auto target = make_target(cfg, data);
    JsonlWriter jsonl(dir / (cfg.output.run_id + ".jsonl"));
    RunLog run = train_run(cfg.train, data.train, data.test, target,
                           [&](const MetricsRecord& r) { jsonl.write(r); });
    CsvWriter summary(dir / "summary.csv", summary_header());
    summary.row(summary_row(cfg.output.run_id, run));
    const MetricsRecord& last = run.records.back();
    log << "run " << cfg.output.run_id << ": " << run.records.size() << " records, final step "
        << last.step << ", train_acc " << last.train_acc << ", test_acc " << last.test_acc
        << ", embedding_gc " << last.embedding_gc << ", nc " << last.nc << "\n";
    const bool diverged = run.diverged;
    if (diverged) log << "diverged at step " << run.divergence_step << "\n";
    if (out_log) *out_log = std::move(run);
    return diverged ? exit_code::divergence : exit_code::ok;
}

int cmd_transfer(const ExperimentConfig& cfg, const ExperimentData& data, const fs::path& dir,
                 std::ostream& log) {
    if (!data.target)
        throw ConfigError("dataset.target_classes", "transfer needs source and target classes");
    RunLog run;
    const int status = single_run(cfg, data, dir, log, &run);
    Rng rng(derive_seed(cfg.train.seed, 3));
    const FewShotSummary fs = few_shot_eval(run.final_network, *data.target, cfg.transfer.episodes,
                                            cfg.transfer.lambda, rng);
    CsvWriter out(dir / (cfg.output.run_id + "_fewshot.csv"),
                  {"episodes", "n_way", "n_shot", "n_query", "lambda", "ridge_acc_mean",
                   "ridge_acc_std", "nearest_mean_acc_mean", "nearest_mean_acc_std",
                   "target_nc_mean", "target_nc_std", "degenerate_episodes",
                   "max_normal_residual"});
    const auto& e = cfg.transfer.episodes;
    out.row({std::to_string(fs.episodes), std::to_string(e.n_way), std::to_string(e.n_shot),
             std::to_string(e.n_query),
             cfg.transfer.lambda < 0.0 ? "auto" : format_csv_number(cfg.transfer.lambda),
             format_csv_number(fs.ridge_accuracy.mean), format_csv_number(fs.ridge_accuracy.std),
             format_csv_number(fs.nearest_mean_accuracy.mean),
             format_csv_number(fs.nearest_mean_accuracy.std), format_csv_number(fs.target_nc.mean),
             format_csv_number(fs.target_nc.std), std::to_string(fs.degenerate_episodes),
             format_csv_number(fs.max_normal_residual)});
    log << "few-shot (" << e.n_way << "-way " << e.n_shot << "-shot, " << fs.episodes
        << " episodes): ridge " << fs.ridge_accuracy.mean << " +- " << fs.ridge_accuracy.std
        << ", nearest-mean " << fs.nearest_mean_accuracy.mean << ", target NC "
        << fs.target_nc.mean << "\n";
    return status;
}

TrainConfig with_axis(TrainConfig c, const std::string& axis, double value) {
    if (axis == "lr") c.lr = value;
    else if (axis == "l2") c.l2 = value;
    else if (axis == "gc_reg") c.gc_reg = value;
    else if (axis == "batch_size") {
        if (value != std::floor(value) || value < 1)
            throw ConfigError("sweep.values", "batch sizes must be positive integers");
        c.batch_size = static_cast<int>(value);
    }
    return c;
}

int cmd_sweep(const ExperimentConfig& cfg, const ExperimentData& data, const fs::path& dir,
              std::ostream& log) {
    std::vector<TrainConfig> configs;
    std::vector<std::string> ids;
    std::vector<double> values = cfg.sweep.values;
    const bool has_axis = !values.empty();
    if (!has_axis) values.push_back(0.0);
    for (std::size_t v = 0; v < values.size(); ++v)
        for (std::uint64_t seed : cfg.sweep.seeds) {
            TrainConfig c = has_axis ? with_axis(cfg.train, cfg.sweep.axis, values[v]) : cfg.train;
            c.seed = seed;
            configs.push_back(c);
            ids.push_back(cfg.output.run_id + (has_axis ? "_" + cfg.sweep.axis + std::to_string(v) : "") +
                          "_seed" + std::to_string(seed));
        }

    std::vector<std::unique_ptr<JsonlWriter>> writers;
    for (const auto& id : ids) writers.push_back(std::make_unique<JsonlWriter>(dir / (id + ".jsonl")));
    const auto logs = run_sweep(configs, data.train, data.test, make_target(cfg, data),
                                cfg.sweep.max_parallel, [&](std::size_t i) -> RecordSink {
                                    JsonlWriter* w = writers[i].get();
                                    return [w](const MetricsRecord& r) { w->write(r); };
                                });

    CsvWriter summary(dir / "summary.csv", summary_header());
    bool any_diverged = false;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        summary.row(summary_row(ids[i], logs[i]));
        const auto& last = logs[i].records.back();
        log << ids[i] << ": " << (logs[i].diverged ? "diverged" : "ok") << ", embedding_gc "
            << last.embedding_gc << ", nc " << last.nc << ", geometric_collapse "
            << last.geometric_collapse << "\n";
        any_diverged = any_diverged || logs[i].diverged;
    }
    return any_diverged ? exit_code::divergence : exit_code::ok;
}

int cmd_estimate_gc(const ExperimentConfig& cfg, const ExperimentData& data, const fs::path& dir,
                    std::ostream& log) {
    RunLog run;
    const int status = single_run(cfg, data, dir, log, &run);
    const Network& net = run.final_network;
    const Subnet subnet = subnet_from_string(cfg.estimate.subnet);

    std::vector<std::size_t> rows(data.train.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng pick(derive_seed(cfg.train.seed, 5));
    std::shuffle(rows.begin(), rows.end(), pick);
    rows.resize(std::min<std::size_t>(rows.size(), static_cast<std::size_t>(cfg.estimate.batch)));
    const Matrix X = select_rows(data.train, rows).X;
    const double full = empirical_gc(net, X, subnet).value;

    CsvWriter out(dir / (cfg.output.run_id + "_gc_sampling.csv"),
                  {"subnet", "mode", "fraction", "sample_size", "trials", "mean", "std", "full_gc",
                   "relative_error"});
    Rng rng(derive_seed(cfg.train.seed, 6));
    for (GcMode mode : {GcMode::sample_examples, GcMode::sample_entries, GcMode::sample_outputs}) {
        const int n = full_sample_size(net, X, subnet, mode);
        for (double frac : cfg.estimate.fractions) {
            const int size = std::clamp(static_cast<int>(std::lround(frac * n)), 1, n);
            const GcEstimate est = sampled_gc(net, X, subnet, mode, size, cfg.estimate.trials, rng);
            const double rel = std::abs(est.value - full) / full;
            out.row({cfg.estimate.subnet, std::string(to_string(mode)), format_csv_number(frac),
                     std::to_string(size), std::to_string(est.trials), format_csv_number(est.value),
                     format_csv_number(est.std_across_trials), format_csv_number(full),
                     format_csv_number(rel)});
            log << to_string(mode) << " @" << frac << ": " << est.value << " +- "
                << est.std_across_trials << " (full " << full << ", rel err " << rel << ")\n";
        }
    }
    return status;
}

int cmd_bounds(const ExperimentConfig& cfg, const ExperimentData& data, const fs::path& dir,
               std::ostream& log) {
    std::vector<TrainConfig> configs;
    for (std::uint64_t seed : cfg.sweep.seeds) {
        TrainConfig c = cfg.train;
        c.seed = seed;
        configs.push_back(c);
    }
    std::vector<std::unique_ptr<JsonlWriter>> writers;
    for (std::uint64_t seed : cfg.sweep.seeds)
        writers.push_back(std::make_unique<JsonlWriter>(
            dir / (cfg.output.run_id + "_seed" + std::to_string(seed) + ".jsonl")));
    const auto logs = run_sweep(configs, data.train, data.test, std::nullopt,
                                cfg.sweep.max_parallel, [&](std::size_t i) -> RecordSink {
                                    JsonlWriter* w = writers[i].get();
                                    return [w](const MetricsRecord& r) { w->write(r); };
                                });

    CsvWriter out(dir / (cfg.output.run_id + "_bounds.csv"),
                  {"seed", "step", "nc", "geometric_collapse", "c", "nc_bound", "nc_holds",
                   "gen_bound_lhs", "gen_bound_rhs", "gen_holds"});
    std::size_t checkpoints = 0, nc_holds = 0, gen_holds = 0;
    const double m_test = static_cast<double>(data.test.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double c = cfg.bounds.c > 0.0 ? cfg.bounds.c : run_max_c(logs[i]);
        for (const auto& r : logs[i].records) {
            if (!std::isfinite(r.gen_bound_rhs)) continue;
            const double nc_bound = c * r.geometric_collapse;
            const double rhs = r.gen_bound_rhs / cfg.train.bounds.c * c;
            // Relative slack absorbs the rounding of (nc / g) * g at the maximizer.
            const bool a = r.nc <= nc_bound * (1.0 + 1e-12);
            const bool b = r.gen_bound_lhs <= rhs;
            ++checkpoints;
            nc_holds += a;
            gen_holds += b;
            out.row({std::to_string(configs[i].seed), std::to_string(r.step),
                     format_csv_number(r.nc), format_csv_number(r.geometric_collapse),
                     format_csv_number(c), format_csv_number(nc_bound), a ? "1" : "0",
                     format_csv_number(r.gen_bound_lhs), format_csv_number(rhs), b ? "1" : "0"});
        }
        const auto& last = logs[i].records.back();
        const double rhs = last.gen_bound_rhs / cfg.train.bounds.c * c;
        log << "seed " << configs[i].seed << ": c* " << c << ", final RHS/max(LHS, 1/m_test) "
            << rhs / std::max(last.gen_bound_lhs, 1.0 / m_test) << "\n";
    }
    log << "NC bound holds at " << nc_holds << "/" << checkpoints << " checkpoints; "
        << "generalization bound holds at " << gen_holds << "/" << checkpoints << "\n";

    if (data.target) {
        std::vector<Network> ensemble;
        for (const auto& l : logs) ensemble.push_back(l.final_network);
        Rng rng(derive_seed(cfg.train.seed, 8));
        const EnsembleStats ens =
            ensemble_stats(ensemble, data.train, cfg.bounds.rademacher_trials, rng);
        double c_target = 0.0;
        for (const Network& f : ensemble) {
            const ClassStats ts = class_stats(embed(f, data.target->X), data.target->y, data.target->k);
            const double gc_t = empirical_gc(f, data.target->X, Subnet::embedding).value;
            c_target = std::max(c_target, poincare_lower_bound(nc_measure(ts), gc_t, ts));
        }
        c_target *= cfg.bounds.safety;
        CsvWriter tb(dir / (cfg.output.run_id + "_transfer_bound.csv"),
                     {"seed", "c_source", "c_target", "term1", "term2", "term3", "total",
                      "empirical_target_cdnv", "holds"});
        for (std::size_t i = 0; i < ensemble.size(); ++i) {
            const Network& f = ensemble[i];
            const ClassStats ss = class_stats(embed(f, data.train.X), data.train.y, data.train.k);
            const double gc_s = empirical_gc(f, data.train.X, Subnet::embedding).value;
            const double c_source =
                (cfg.bounds.c > 0.0 ? cfg.bounds.c : run_max_c(logs[i])) * cfg.bounds.safety;
            const TransferBound t = transfer_bound_rhs(gc_s, ss, ens, c_source, c_target,
                                                       cfg.bounds.delta, data.train.k);
            const ClassStats ts = class_stats(embed(f, data.target->X), data.target->y, data.target->k);
            const double cdnv_mean = nc_measure(ts);
            tb.row({std::to_string(configs[i].seed), format_csv_number(c_source),
                    format_csv_number(c_target), format_csv_number(t.term1),
                    format_csv_number(t.term2), format_csv_number(t.term3),
                    format_csv_number(t.total), format_csv_number(cdnv_mean),
                    cdnv_mean <= t.total ? "1" : "0"});
            log << "transfer bound seed " << configs[i].seed << ": total " << t.total
                << " (terms " << t.term1 << ", " << t.term2 << ", " << t.term3
                << "), empirical target CDNV " << cdnv_mean << "\n";
        }
    }
    bool diverged = false;
    for (const auto& l : logs) diverged = diverged || l.diverged;
    return diverged ? exit_code::divergence : exit_code::ok;
}

}  // namespace

int run_command(const ExperimentConfig& cfg_in, Command command, const CommandOptions& opts,
                std::ostream& log) {
    const ExperimentConfig cfg = apply_overrides(cfg_in, opts);
    try {
        if (command == Command::verify) {
            const auto results = run_verification(cfg, log);
            const bool ok = std::all_of(results.begin(), results.end(),
                                        [](const CheckResult& r) { return r.passed; });
            return ok ? exit_code::ok : exit_code::verification_failed;
        }
        const fs::path dir = cfg.output.dir;
        fs::create_directories(dir);
        write_resolved_config(cfg, dir);
        const ExperimentData data = build_data(cfg.dataset);
        log << "data: " << data.train.size() << " train / " << data.test.size() << " test rows, "
            << data.train.k << " classes, d = " << data.train.dim();
        if (data.target) log << ", target pool " << data.target->size() << " rows";
        log << "\n";
        switch (command) {
            case Command::train: return single_run(cfg, data, dir, log);
            case Command::transfer: return cmd_transfer(cfg, data, dir, log);
            case Command::sweep: return cmd_sweep(cfg, data, dir, log);
            case Command::estimate_gc: return cmd_estimate_gc(cfg, data, dir, log);
            case Command::bounds: return cmd_bounds(cfg, data, dir, log);
            case Command::verify: break;
        }
    } catch (const ConfigError& e) {
        log << e.what() << "\n";
        return exit_code::config_error;
    } catch (const DivergenceError& e) {
        log << e.what() << "\n";
        return exit_code::divergence;
    } catch (const ContractError& e) {
        // Contract failures on user-supplied data surface as configuration errors.
        log << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    }
    return exit_code::failure;
}

}  // namespace gcnc
