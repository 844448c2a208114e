// End-to-end checks on desk-scale synthetic benchmarks. Prints one line per
// criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gcnc/bounds.hpp"
#include "gcnc/commands.hpp"
#include "gcnc/config.hpp"
#include "gcnc/metrics.hpp"
#include "gcnc/train.hpp"
#include "gcnc/transfer.hpp"
#include "support/oracles.hpp"

using namespace gcnc;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-6;
constexpr double kJacobianTol = 1e-6;
constexpr double kGcRegTol = 1e-4;
constexpr double kLinearGcTol = 1e-12;
constexpr double kSampled200Tol = 0.02;
constexpr double kSampled20Tol = 0.05;
constexpr double kConcentrationLo = 2.8;
constexpr double kConcentrationHi = 5.7;
constexpr double kCdnvTol = 1e-12;
constexpr double kIsometryTol = 1e-9;
constexpr double kNcBoundSlack = 1e-12;  // rounding of (nc / g) * g at the maximizer
constexpr double kGenBoundFraction = 0.95;
constexpr double kTransferCorr = 0.7;
constexpr double kTransferSafety = 10.0;
constexpr double kRidgeTol = 1e-8;

// Benchmark shared by the single-task criteria.
constexpr int kSteps = 5000;
const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};

DatasetConfig benchmark_data(int k) {
    DatasetConfig d;
    d.k = k;
    d.d = 20;
    d.mean_scale = 8.0;
    d.sigma = 2.0;
    d.m_per_class = 500;
    d.seed = 0;
    return d;
}

TrainConfig benchmark_train(int k) {
    TrainConfig c;
    c.network = NetworkSpec{{20, 64, 32, k}, Activation::tanh};
    c.lr = 0.05;
    c.batch_size = 32;
    c.steps = kSteps;
    c.log_every = kSteps;
    c.sharpness_probes = 1;
    return c;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double run_max_c(const RunLog& log) {
    double c = 0.0;
    for (const auto& r : log.records)
        if (std::isfinite(r.c_lower_bound)) c = std::max(c, r.c_lower_bound);
    return c;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------

Outcome differentiation() {
    Rng rng(101);
    const std::vector<int> caps{16, 32, 16, 8, 4};
    double worst_grad = 0, worst_jac = 0, worst_reg = 0;
    int rejected = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<int> widths;
        for (int cap : caps) widths.push_back(2 + static_cast<int>(rng() % static_cast<std::uint64_t>(cap - 1)));
        const Activation act = t % 2 ? Activation::relu : Activation::tanh;
        const Network net = init_network(NetworkSpec{widths, act}, rng());
        const auto n = static_cast<Eigen::Index>(1 + rng() % 8);
        Matrix X = oracle::gaussian(n, widths[0], rng);
        // Finite differences are meaningless across a relu kink.
        while (act == Activation::relu && oracle::min_hidden_preactivation(net, X) < 1e-3) {
            X = oracle::gaussian(n, widths[0], rng);
            ++rejected;
        }
        const auto y = oracle::labels(static_cast<std::size_t>(n), widths.back(), rng);

        const Vector g = loss_and_grad(net, X, y).grads.flatten();
        const Vector g_fd = oracle::param_gradient(
            net, [&](const Network& m) { return loss_and_grad(m, X, y).loss; }, 1e-6);
        worst_grad = std::max(worst_grad, oracle::rel_error(g, g_fd));

        for (Eigen::Index i = 0; i < n; ++i) {
            const Vector x = X.row(i).transpose();
            for (bool logit : {false, true}) {
                const Matrix J = input_jacobian(net, x, logit ? Subnet::logit : Subnet::embedding);
                worst_jac = std::max(worst_jac,
                                     oracle::rel_error(J, oracle::input_jacobian(net, x, logit, 1e-6)));
            }
        }

        const Vector r = gc_reg_grad(net, X).flatten();
        const Vector r_fd = oracle::param_gradient(
            net, [&](const Network& m) { return empirical_gc(m, X, Subnet::logit).value; }, 1e-5);
        worst_reg = std::max(worst_reg, oracle::rel_error(r, r_fd));
    }
    return {worst_grad < kGradTol && worst_jac < kJacobianTol && worst_reg < kGcRegTol,
            fmt("max rel error grad %.2e (< %.0e), jacobian %.2e (< %.0e), gc_reg %.2e (< %.0e); "
                "%d relu batches redrawn near kinks",
                worst_grad, kGradTol, worst_jac, kJacobianTol, worst_reg, kGcRegTol, rejected)};
}

Outcome gc_exactness() {
    Rng rng(202);
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
        const int d = 2 + static_cast<int>(rng() % 12), h = 2 + static_cast<int>(rng() % 12),
                  p = 2 + static_cast<int>(rng() % 8);
        const Network net = init_network(NetworkSpec{{d, h, p, 3}, Activation::identity}, rng());
        const Matrix A = net.params.weights[1] * net.params.weights[0];
        const Matrix X = oracle::gaussian(9, d, rng, 3.0);
        const double gc = empirical_gc(net, X, Subnet::embedding).value;
        worst = std::max(worst, std::abs(gc - A.squaredNorm()) / A.squaredNorm());
    }
    const int d = 7;
    const NetworkSpec spec{{d, d, 3}, Activation::identity};
    Network id{spec, Parameters::zeros(spec)};
    id.params.weights[0] = Matrix::Identity(d, d);
    const double gc_id = empirical_gc(id, oracle::gaussian(5, d, rng), Subnet::embedding).value;
    return {worst < kLinearGcTol && gc_id == d,
            fmt("max rel error vs ||A||_F^2 %.2e (< %.0e); identity on R^%d gives %.17g", worst,
                kLinearGcTol, d, gc_id)};
}

struct Benchmark {
    ExperimentData data;
    std::vector<RunLog> runs;  // one per seed, logged every 50 steps
};

Outcome sampling(const Benchmark& b) {
    const RunLog& run = b.runs.front();
    const Network& net = run.final_network;
    const double train_acc = run.records.back().train_acc;
    const Matrix& X = b.data.train.X;
    const double full = empirical_gc(net, X, Subnet::embedding).value;
    bool ok = train_acc == 1.0;
    std::string detail = fmt("train acc %.4f, full GC %.5g;", train_acc, full);
    for (GcMode mode : {GcMode::sample_examples, GcMode::sample_entries, GcMode::sample_outputs}) {
        const int size = full_sample_size(net, X, Subnet::embedding, mode) / 4;
        Rng r200(derive_seed(303, static_cast<std::uint64_t>(mode)));
        Rng r20(derive_seed(304, static_cast<std::uint64_t>(mode)));
        const double e200 = std::abs(sampled_gc(net, X, Subnet::embedding, mode, size, 200, r200).value - full) / full;
        const double e20 = std::abs(sampled_gc(net, X, Subnet::embedding, mode, size, 20, r20).value - full) / full;
        ok = ok && e200 < kSampled200Tol && e20 < kSampled20Tol;
        detail += fmt(" %s n=%d err200 %.4f err20 %.4f;", std::string(to_string(mode)).c_str(), size, e200, e20);
    }
    detail += fmt(" limits %.2f / %.2f", kSampled200Tol, kSampled20Tol);
    return {ok, detail};
}

Outcome concentration(const Benchmark& b) {
    const Network& net = b.runs.front().final_network;
    const DatasetConfig dc = benchmark_data(5);
    Rng mix_rng(dc.seed);
    const GaussianMixture mix = GaussianMixture::random(dc.k, dc.d, dc.mean_scale, dc.sigma, mix_rng);
    Rng pool_rng(derive_seed(dc.seed, 404));
    const int batches = 50, small = 64, large = 1024;
    const LabeledDataset pool = mix.sample(batches * large / dc.k + 1, pool_rng);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(pool.X.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), pool_rng);

    auto batch_stds = [&](int m) {
        std::vector<double> gcs;
        for (int i = 0; i < batches; ++i) {
            Matrix Xb(m, pool.X.cols());
            for (int j = 0; j < m; ++j) Xb.row(j) = pool.X.row(order[static_cast<std::size_t>(i * m + j)]);
            gcs.push_back(empirical_gc(net, Xb, Subnet::embedding).value);
        }
        return sample_std(gcs);
    };
    const double s_small = batch_stds(small), s_large = batch_stds(large);
    const double ratio = s_small / s_large;
    return {ratio >= kConcentrationLo && ratio <= kConcentrationHi,
            fmt("std at m=%d %.4g, at m=%d %.4g, ratio %.3f in [%.1f, %.1f] (expected 4)", small,
                s_small, large, s_large, ratio, kConcentrationLo, kConcentrationHi)};
}

Outcome cdnv_oracles() {
    double worst = 0;
    auto check = [&](double got, double want) {
        worst = std::max(worst, std::abs(got - want) / std::abs(want));
    };
    {
        Matrix Z(4, 2);
        Z << 0, 0, 2, 0, 0, 4, 0, 6;
        const std::vector<int> y{0, 0, 1, 1};
        const ClassStats s = class_stats(Z, y, 2);
        check(cdnv(s, 0, 1), 1.0 / 26.0);
        check(nc_measure(s), 1.0 / 26.0);
    }
    {
        Matrix Z(6, 1);
        Z << -1, 1, 9, 11, 17, 23;
        const std::vector<int> y{0, 0, 1, 1, 2, 2};
        const ClassStats s = class_stats(Z, y, 3);
        check(cdnv(s, 0, 1), 0.01);
        check(cdnv(s, 0, 2), 0.0125);
        check(cdnv(s, 2, 1), 0.05);
        check(nc_measure(s), 0.0725 / 3.0);
        check(geometric_collapse(2.0, s), 0.045);
    }
    Rng rng(505);
    for (int t = 0; t < 10; ++t) {
        const int k = 2 + t % 4;
        std::vector<int> y;
        for (int c = 0; c < k; ++c)
            for (int i = 0; i < 7; ++i) y.push_back(c);
        Matrix Z = oracle::gaussian(static_cast<Eigen::Index>(y.size()), 5, rng);
        for (std::size_t i = 0; i < y.size(); ++i) Z(static_cast<Eigen::Index>(i), y[i] % 5) += 3.0 * y[i];
        check(nc_measure(class_stats(Z, y, k)), oracle::brute_nc(Z, y, k));
    }

    double worst_iso = 0;
    std::vector<int> y;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 15; ++i) y.push_back(c);
    Matrix Z = oracle::gaussian(60, 6, rng);
    for (std::size_t i = 0; i < y.size(); ++i) Z(static_cast<Eigen::Index>(i), y[i]) += 2.5;
    const double base = nc_measure(class_stats(Z, y, 4));
    for (int t = 0; t < 20; ++t) {
        const Matrix R = oracle::random_rotation(6, rng);
        const Vector shift = 10.0 * oracle::gaussian(6, 1, rng);
        const Matrix moved = (Z * R).rowwise() + shift.transpose();
        worst_iso = std::max(worst_iso, std::abs(nc_measure(class_stats(moved, y, 4)) - base) / base);
    }
    return {worst < kCdnvTol && worst_iso < kIsometryTol,
            fmt("hand and direct cases max rel error %.2e (< %.0e); isometry drift %.2e (< %.0e)",
                worst, kCdnvTol, worst_iso, kIsometryTol)};
}

Outcome nc_bound(const Benchmark& b) {
    std::size_t total = 0, held = 0, held_exact = 0;
    std::string cs;
    for (const RunLog& run : b.runs) {
        const double c = run_max_c(run);
        cs += fmt(" %.4g", c);
        for (const auto& r : run.records) {
            ++total;
            held += r.nc <= c * r.geometric_collapse * (1.0 + kNcBoundSlack);
            held_exact += r.nc <= c * r.geometric_collapse;
        }
    }
    return {held == total && total > 0,
            fmt("nc <= c* geometric_collapse at %zu/%zu checkpoints over %zu seeds (%zu without the "
                "%.0e rounding slack); c* per seed:%s",
                held, total, b.runs.size(), held_exact, kNcBoundSlack, cs.c_str())};
}

Outcome gen_bound(const Benchmark& b) {
    std::size_t total = 0, held = 0;
    const double m_test = static_cast<double>(b.data.test.size());
    std::string ratios;
    for (const RunLog& run : b.runs) {
        const double c = run_max_c(run);
        const double scale = c / run.config.bounds.c;
        for (const auto& r : run.records) {
            ++total;
            held += r.gen_bound_lhs <= r.gen_bound_rhs * scale;
        }
        const auto& last = run.records.back();
        ratios += fmt(" %.4g", last.gen_bound_rhs * scale / std::max(last.gen_bound_lhs, 1.0 / m_test));
    }
    const double frac = static_cast<double>(held) / static_cast<double>(total);
    return {frac >= kGenBoundFraction,
            fmt("holds at %zu/%zu checkpoints (%.1f%%, need %.0f%%); final RHS/max(LHS, 1/m_test) per "
                "seed:%s",
                held, total, 100.0 * frac, 100.0 * kGenBoundFraction, ratios.c_str())};
}

Outcome sweep_directions(const Benchmark& b) {
    struct Axis {
        const char* name;
        std::vector<double> values;
        double sign;  // expected direction of GC
        void (*apply)(TrainConfig&, double);
    };
    const std::vector<Axis> axes{
        {"lr", {0.01, 0.05, 0.25}, -1, [](TrainConfig& c, double v) { c.lr = v; }},
        {"batch", {8, 32, 128}, +1, [](TrainConfig& c, double v) { c.batch_size = static_cast<int>(v); }},
        {"l2", {0, 1e-4, 1e-3}, -1, [](TrainConfig& c, double v) { c.l2 = v; }},
        {"gc_reg", {0, 1e-5, 1e-3}, -1, [](TrainConfig& c, double v) { c.gc_reg = v; }},
    };
    bool ok = true;
    std::string detail;
    for (const Axis& axis : axes) {
        std::vector<TrainConfig> grid;
        for (double v : axis.values)
            for (std::uint64_t s : kSeeds) {
                TrainConfig c = benchmark_train(5);
                c.seed = s;
                axis.apply(c, v);
                grid.push_back(c);
            }
        const auto logs = run_sweep(grid, b.data.train, b.data.test, std::nullopt, 1);
        std::vector<double> gc, nc, gcoll;
        for (std::size_t i = 0; i < axis.values.size(); ++i) {
            double a = 0, n = 0, g = 0;
            for (std::size_t s = 0; s < kSeeds.size(); ++s) {
                const RunLog& l = logs[i * kSeeds.size() + s];
                if (l.diverged) throw std::runtime_error(std::string("diverged on ") + axis.name);
                a += l.records.back().embedding_gc;
                n += l.records.back().nc;
                g += l.records.back().geometric_collapse;
            }
            const double ns = static_cast<double>(kSeeds.size());
            gc.push_back(a / ns);
            nc.push_back(n / ns);
            gcoll.push_back(g / ns);
        }
        const double r_gc = oracle::spearman(axis.values, gc);
        const double r_nc = oracle::spearman(axis.values, nc);
        const double r_gcoll = oracle::spearman(axis.values, gcoll);
        const bool axis_ok = r_gc == axis.sign && r_nc * axis.sign > 0;
        ok = ok && axis_ok;
        detail += fmt(" %s%s GC [%.4g %.4g %.4g] rho %+.1f, NC [%.4g %.4g %.4g] rho %+.1f, "
                      "geometric collapse rho %+.1f;",
                      axis.name, axis_ok ? "" : " (wrong)", gc[0], gc[1], gc[2], r_gc, nc[0], nc[1],
                      nc[2], r_nc, r_gcoll);
    }
    return {ok, "seed means:" + detail};
}

struct TransferRuns {
    ExperimentData data;
    std::vector<RunLog> logs;  // lr-major, seeds inner
    std::vector<FewShotSummary> fewshot;
    std::vector<double> lrs{0.01, 0.05, 0.25};
};

TransferRuns transfer_runs() {
    TransferRuns t;
    DatasetConfig dc = benchmark_data(12);
    dc.source_classes = {0, 1, 2, 3, 4, 5, 6, 7};
    dc.target_classes = {8, 9, 10, 11};
    t.data = build_data(dc);
    std::vector<TrainConfig> grid;
    for (double lr : t.lrs)
        for (std::uint64_t s : kSeeds) {
            TrainConfig c = benchmark_train(8);
            c.lr = lr;
            c.seed = s;
            c.log_every = 500;
            grid.push_back(c);
        }
    t.logs = run_sweep(grid, t.data.train, t.data.test, std::nullopt, 1);
    EpisodeSpec ep;
    ep.n_way = 4;
    ep.n_shot = 5;
    ep.n_query = 15;
    ep.n_episodes = 100;
    for (const RunLog& l : t.logs) {
        Rng rng(derive_seed(l.config.seed, 909));
        t.fewshot.push_back(few_shot_eval(l.final_network, *t.data.target, ep, -1.0, rng));
    }
    return t;
}

Outcome transfer_correlation(const TransferRuns& t) {
    std::vector<double> gc, nc, ridge;
    const double ns = static_cast<double>(kSeeds.size());
    for (std::size_t i = 0; i < t.lrs.size(); ++i) {
        double a = 0, n = 0, r = 0;
        for (std::size_t s = 0; s < kSeeds.size(); ++s) {
            const std::size_t j = i * kSeeds.size() + s;
            if (t.logs[j].diverged) throw std::runtime_error("transfer run diverged");
            a += t.logs[j].records.back().embedding_gc;
            n += t.fewshot[j].target_nc.mean;
            r += t.fewshot[j].ridge_accuracy.mean;
        }
        gc.push_back(a / ns);
        nc.push_back(n / ns);
        ridge.push_back(r / ns);
    }
    const double p_nc = oracle::pearson(gc, nc), p_ridge = oracle::pearson(gc, ridge);
    return {p_nc >= kTransferCorr && p_ridge <= -kTransferCorr,
            fmt("source GC [%.4g %.4g %.4g], target NC [%.4g %.4g %.4g], ridge acc [%.4g %.4g %.4g]; "
                "pearson(GC, NC) %+.3f (>= %.1f), pearson(GC, ridge) %+.3f (<= -%.1f)",
                gc[0], gc[1], gc[2], nc[0], nc[1], nc[2], ridge[0], ridge[1], ridge[2], p_nc,
                kTransferCorr, p_ridge, kTransferCorr)};
}

Outcome transfer_bound(const TransferRuns& t) {
    std::vector<const RunLog*> members;
    for (std::size_t j = 0; j < t.logs.size(); ++j)
        if (t.logs[j].config.lr == 0.05) members.push_back(&t.logs[j]);
    std::vector<Network> ensemble;
    for (const RunLog* l : members) ensemble.push_back(l->final_network);

    const LabeledDataset& src = t.data.train;
    const LabeledDataset& tgt = *t.data.target;
    Rng rng(derive_seed(0, 1010));
    const EnsembleStats ens = ensemble_stats(ensemble, src, 1000, rng);
    double c_target = 0.0;
    for (const Network& f : ensemble) {
        const ClassStats ts = class_stats(embed(f, tgt.X), tgt.y, tgt.k);
        c_target = std::max(c_target, poincare_lower_bound(nc_measure(ts),
                                                           empirical_gc(f, tgt.X, Subnet::embedding).value, ts));
    }
    c_target *= kTransferSafety;

    bool finite = true, exact = true, holds = true;
    std::string rows;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const Network& f = ensemble[i];
        const ClassStats ss = class_stats(embed(f, src.X), src.y, src.k);
        const double gc_s = empirical_gc(f, src.X, Subnet::embedding).value;
        const double c_source = run_max_c(*members[i]) * kTransferSafety;
        const TransferBound b = transfer_bound_rhs(gc_s, ss, ens, c_source, c_target, 0.05, src.k);
        const double cdnv_mean = nc_measure(class_stats(embed(f, tgt.X), tgt.y, tgt.k));
        finite = finite && std::isfinite(b.total);
        exact = exact && b.term1 == c_source * geometric_collapse(gc_s, ss);
        holds = holds && cdnv_mean <= b.total;
        rows += fmt(" [%.3g + %.3g + %.3g = %.3g vs %.3g]", b.term1, b.term2, b.term3, b.total, cdnv_mean);
    }
    return {finite && exact && holds,
            fmt("finite %s, term1 exact %s, target CDNV <= bound %s (c x %.0f); per member "
                "[terms = total vs target CDNV]:%s",
                finite ? "yes" : "no", exact ? "yes" : "no", holds ? "yes" : "no", kTransferSafety,
                rows.c_str())};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "gcnc_acceptance_determinism";
    fs::remove_all(root);
    const std::string base = R"(
dataset.mean_scale = 8
dataset.sigma = 2
dataset.k = 12
dataset.source_classes = [0, 1, 2, 3, 4, 5, 6, 7]
dataset.target_classes = [8, 9, 10, 11]
network.layer_widths = [20, 64, 32, 8]
network.activation = tanh
train.steps = 300
train.log_every = 50
transfer.n_way = 4
transfer.n_episodes = 20
sweep.values = [0.01, 0.05, 0.25]
sweep.seeds = [0, 1]
)";
    std::ostringstream log;
    auto run = [&](const std::string& text, Command cmd, const std::string& dir) {
        CommandOptions opts;
        opts.out_dir = root / dir;
        const int code = run_command(parse_config(text), cmd, opts, log);
        if (code != exit_code::ok) throw std::runtime_error("command failed: " + log.str());
        return root / dir;
    };
    std::size_t compared = 0, identical = 0;
    auto compare_dirs = [&](const fs::path& a, const fs::path& b) {
        for (const auto& e : fs::directory_iterator(a)) {
            if (e.path().extension() != ".jsonl") continue;
            ++compared;
            const std::string x = read_file(e.path());
            identical += !x.empty() && x == read_file(b / e.path().filename());
        }
    };
    compare_dirs(run(base, Command::train, "train_a"), run(base, Command::train, "train_b"));
    compare_dirs(run(base, Command::transfer, "transfer_a"), run(base, Command::transfer, "transfer_b"));
    compare_dirs(run(base + "sweep.max_parallel = 1\n", Command::sweep, "serial"),
                 run(base + "sweep.max_parallel = 4\n", Command::sweep, "parallel"));
    fs::remove_all(root);
    return {compared > 0 && identical == compared,
            fmt("%zu/%zu JSONL files byte-identical across repeat train, repeat transfer and serial vs "
                "parallel sweep",
                identical, compared)};
}

Matrix explicit_ridge(const Matrix& Z, const std::vector<int>& y, int l, double lambda) {
    const Eigen::Index n = Z.rows(), p = Z.cols();
    Matrix A(n, p + 1);
    A << Z, Vector::Ones(n);
    Matrix Y = Matrix::Zero(n, l);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, y[static_cast<std::size_t>(i)]) = 1.0;
    Matrix reg = lambda * Matrix::Identity(p + 1, p + 1);
    reg(p, p) = 0.0;
    return (A.transpose() * A + reg).inverse() * (A.transpose() * Y);
}

Outcome ridge_oracle(const TransferRuns& t) {
    Rng rng(1212);
    double worst = 0;
    for (int i = 0; i < 50; ++i) {
        const int p = 2 + static_cast<int>(rng() % 10), l = 2 + static_cast<int>(rng() % 4);
        const int n = p + 2 + static_cast<int>(rng() % 20);
        const Matrix Z = oracle::gaussian(n, p, rng);
        const auto y = oracle::labels(static_cast<std::size_t>(n), l, rng);
        const double lambda = i % 5 == 0 ? 0.0 : std::uniform_real_distribution<double>(0.0, 2.0)(rng);
        const RidgeHead head = ridge_fit(Z, y, l, lambda);
        worst = std::max(worst, (head.weights - explicit_ridge(Z, y, l, lambda)).cwiseAbs().maxCoeff());
    }
    double residual = 0;
    int fits = 0;
    for (const FewShotSummary& s : t.fewshot) {
        residual = std::max(residual, s.max_normal_residual);
        fits += s.episodes;
    }
    return {worst < kRidgeTol && residual < kRidgeTol,
            fmt("50 systems max-norm gap to explicit inverse %.2e (< %.0e); max normal-equation "
                "residual over %d transfer fits %.2e (< %.0e)",
                worst, kRidgeTol, fits, residual, kRidgeTol)};
}

}  // namespace

int main() {
    report(1, "differentiation oracles", differentiation);
    report(2, "GC exactness on linear maps", gc_exactness);

    Benchmark bench;
    {
        const auto t0 = std::chrono::steady_clock::now();
        bench.data = build_data(benchmark_data(5));
        std::vector<TrainConfig> grid;
        for (std::uint64_t s : kSeeds) {
            TrainConfig c = benchmark_train(5);
            c.seed = s;
            c.log_every = 50;
            c.sharpness_probes = 4;
            grid.push_back(c);
        }
        bench.runs = run_sweep(grid, bench.data.train, bench.data.test, std::nullopt, 1);
        std::printf("benchmark: k=5, d=20, 5 seeds x %d steps, %zu checkpoints each (%.1fs)\n", kSteps,
                    bench.runs.front().records.size(),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    report(3, "sampled GC unbiasedness", [&] { return sampling(bench); });
    report(4, "GC concentration", [&] { return concentration(bench); });
    report(5, "CDNV and NC oracles", cdnv_oracles);
    report(6, "NC bounded by geometric collapse", [&] { return nc_bound(bench); });
    report(7, "sweep directions", [&] { return sweep_directions(bench); });
    report(8, "generalization bound", [&] { return gen_bound(bench); });

    TransferRuns xfer;
    {
        const auto t0 = std::chrono::steady_clock::now();
        xfer = transfer_runs();
        std::printf("transfer benchmark: 12 classes (8 source / 4 target), 3 lr x 5 seeds (%.1fs)\n",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    report(9, "transfer correlation", [&] { return transfer_correlation(xfer); });
    report(10, "transfer bound sanity", [&] { return transfer_bound(xfer); });
    report(11, "determinism", determinism);
    report(12, "ridge oracle", [&] { return ridge_oracle(xfer); });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
