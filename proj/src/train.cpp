#include "gcnc/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "gcnc/bounds.hpp"
#include "gcnc/errors.hpp"
#include "gcnc/transfer.hpp"

namespace gcnc {

namespace {

constexpr double kDivergenceLoss = 1e6;

// Sub-stream ids for derive_seed.
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kSharpnessStream = 2;
constexpr std::uint64_t kEpisodeStream = 3;
constexpr std::uint64_t kLipschitzStream = 4;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Shuffled passes over the training rows; a partial tail batch is dropped
// and the order reshuffled.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
        : order_(n), batch_(batch), rng_(seed) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        reshuffle();
    }

    std::span<const std::size_t> next() {
        if (pos_ + batch_ > order_.size()) reshuffle();
        std::span<const std::size_t> out(order_.data() + pos_, batch_);
        pos_ += batch_;
        return out;
    }

private:
    void reshuffle() {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }

    std::vector<std::size_t> order_;
    std::size_t batch_;
    std::size_t pos_ = 0;
    Rng rng_;
};

// Full-dataset mean loss and gradient, accumulated over eval-sized chunks.
LossAndGrad full_loss_and_grad(const Network& net, const LabeledDataset& ds, int eval_batch) {
    LossAndGrad total{0.0, Parameters::zeros_like(net.params)};
    const auto m = static_cast<Eigen::Index>(ds.size());
    for (Eigen::Index start = 0; start < m; start += eval_batch) {
        const Eigen::Index n = std::min<Eigen::Index>(eval_batch, m - start);
        const LossAndGrad part =
            loss_and_grad(net, ds.X.middleRows(start, n),
                          std::span<const int>(ds.y).subspan(static_cast<std::size_t>(start),
                                                             static_cast<std::size_t>(n)));
        total.loss += part.loss * static_cast<double>(n);
        total.grads += part.grads * static_cast<double>(n);
    }
    total.loss /= static_cast<double>(m);
    total.grads *= 1.0 / static_cast<double>(m);
    return total;
}

void check_network_matches(const NetworkSpec& spec, const LabeledDataset& ds) {
    if (spec.input_dim() != ds.dim())
        throw ContractError("network input width " + std::to_string(spec.input_dim()) +
                            " does not match data dimension " + std::to_string(ds.dim()));
    if (spec.num_classes() != ds.k)
        throw ContractError("network output width " + std::to_string(spec.num_classes()) +
                            " does not match class count " + std::to_string(ds.k));
}

}  // namespace

void TrainConfig::validate(std::size_t train_size) const {
    network.validate();
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractError("lr must be positive");
    if (batch_size < 1) throw ContractError("batch_size must be positive");
    if (static_cast<std::size_t>(batch_size) > train_size)
        throw ContractError("batch_size exceeds the training-set size");
    if (!(l2 >= 0.0)) throw ContractError("l2 must be nonnegative");
    if (!(gc_reg >= 0.0)) throw ContractError("gc_reg must be nonnegative");
    if (steps < 0) throw ContractError("steps must be nonnegative");
    if (log_every < 1) throw ContractError("log_every must be positive");
    if (steps > 0 && log_every > steps) throw ContractError("log_every exceeds steps");
    if (eval_batch < 1) throw ContractError("eval_batch must be positive");
    if (sharpness_probes < 1) throw ContractError("sharpness_probes must be positive");
}

Parameters sgd_update(const Parameters& theta, const Parameters& grad, double lr, double l2,
                      std::size_t step) {
    if (lr == 0.0) return theta;
    Parameters next = theta;
    for (std::size_t l = 0; l < next.weights.size(); ++l) {
        next.weights[l] -= lr * (grad.weights[l] + 2.0 * l2 * theta.weights[l]);
        next.biases[l] -= lr * (grad.biases[l] + 2.0 * l2 * theta.biases[l]);
    }
    if (!next.all_finite()) throw DivergenceError(step, "non-finite parameters");
    return next;
}

Parameters sgd_step(const Network& net, const Matrix& X, std::span<const int> y,
                    const TrainConfig& config, std::size_t step) {
    LossAndGrad lg = loss_and_grad(net, X, y);
    if (!std::isfinite(lg.loss) || lg.loss > kDivergenceLoss)
        throw DivergenceError(step, "loss " + std::to_string(lg.loss));
    if (config.gc_reg > 0.0) lg.grads += gc_reg_grad(net, X) * config.gc_reg;
    return sgd_update(net.params, lg.grads, config.lr, config.l2, step);
}

double accuracy(const Network& net, const LabeledDataset& ds) {
    if (ds.size() == 0) throw ContractError("accuracy of an empty dataset");
    const Matrix z = logits(net, ds.X);
    std::size_t right = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < z.cols(); ++c)
            if (z(i, c) > z(i, best)) best = c;
        if (best == ds.y[static_cast<std::size_t>(i)]) ++right;
    }
    return static_cast<double>(right) / static_cast<double>(ds.size());
}

MetricsRecord evaluate(const Network& net, const TrainConfig& config, const LabeledDataset& train,
                       const LabeledDataset& test, const std::optional<TransferTarget>& target,
                       std::size_t step) {
    MetricsRecord r;
    r.step = step;

    const LossAndGrad full = full_loss_and_grad(net, train, config.eval_batch);
    r.train_loss = full.loss;
    r.slope = loss_slope(full.grads);
    r.train_acc = accuracy(net, train);
    r.test_acc = accuracy(net, test);

    Rng sharp_rng(derive_seed(config.seed, kSharpnessStream + 16 * step));
    const GradientFn grad = [&](const Parameters& theta) {
        return full_loss_and_grad(Network{net.spec, theta}, train, config.eval_batch).grads;
    };
    r.sharpness = sharpness_estimate(grad, net.params, config.sharpness_probes, sharp_rng);

    const GcPair gc = empirical_gc_both(net, train.X);
    r.embedding_gc = gc.embedding;
    r.logit_gc = gc.logit;

    const ClassStats stats = class_stats(embed(net, train.X), train.y, train.k);
    try {
        r.nc = nc_measure(stats);
        r.inv_sq_dist_sum = inv_sq_dist_sum(stats);
        r.geometric_collapse = geometric_collapse(r.embedding_gc, stats);
        r.c_lower_bound =
            r.embedding_gc > 0.0 ? poincare_lower_bound(r.nc, r.embedding_gc, stats) : nan();
        BoundInputs in;
        in.c = config.bounds.c;
        in.delta = config.bounds.delta;
        in.p = config.network.embedding_dim();
        in.m_c = static_cast<int>(train.per_class());
        in.k = train.k;
        in.include_lipschitz_term = config.bounds.include_lipschitz;
        if (in.include_lipschitz_term) {
            Rng lip_rng(derive_seed(config.seed, kLipschitzStream));
            in.L = lipschitz_lower_bound(net, train.X, lip_rng);
        }
        r.gen_bound_rhs = generalization_bound_rhs(r.embedding_gc, stats, in);
    } catch (const DegenerateError&) {
        r.nc = r.inv_sq_dist_sum = r.geometric_collapse = r.c_lower_bound = r.gen_bound_rhs = nan();
    }
    r.gen_bound_lhs = nearest_mean_error(stats.means, embed(net, test.X), test.y);

    if (target) {
        Rng ep_rng(derive_seed(config.seed, kEpisodeStream));
        const FewShotSummary fs =
            few_shot_eval(net, target->data, target->episodes, target->lambda, ep_rng);
        r.target_nc = fs.target_nc.mean;
        r.ridge_acc = fs.ridge_accuracy.mean;
        r.nearest_mean_acc = fs.nearest_mean_accuracy.mean;
    }
    return r;
}

RunLog train_run(const TrainConfig& config, const LabeledDataset& train, const LabeledDataset& test,
                 const std::optional<TransferTarget>& target, const RecordSink& sink) {
    config.validate(train.size());
    train.validate();
    test.validate();
    check_network_matches(config.network, train);
    if (test.k != train.k || test.dim() != train.dim())
        throw ContractError("test set does not match the training set");
    if (target && target->data.dim() != train.dim())
        throw ContractError("target set dimension does not match the training set");

    RunLog log;
    log.config = config;
    Network net = init_network(config.network, config.seed);

    auto record = [&](std::size_t step) {
        log.records.push_back(evaluate(net, config, train, test, target, step));
        if (sink) sink(log.records.back());
    };

    record(0);
    BatchSampler sampler(train.size(), static_cast<std::size_t>(config.batch_size),
                         derive_seed(config.seed, kBatchStream));
    Matrix Xb(config.batch_size, train.dim());
    std::vector<int> yb(static_cast<std::size_t>(config.batch_size));
    for (int step = 1; step <= config.steps; ++step) {
        const auto rows = sampler.next();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Xb.row(static_cast<Eigen::Index>(i)) = train.X.row(static_cast<Eigen::Index>(rows[i]));
            yb[i] = train.y[rows[i]];
        }
        try {
            net.params = sgd_step(net, Xb, yb, config, static_cast<std::size_t>(step));
        } catch (const DivergenceError& e) {
            log.diverged = true;
            log.divergence_step = e.step();
            break;
        }
        if (step % config.log_every == 0) record(static_cast<std::size_t>(step));
    }
    log.final_network = std::move(net);
    return log;
}

std::vector<RunLog> run_sweep(const std::vector<TrainConfig>& configs, const LabeledDataset& train,
                              const LabeledDataset& test,
                              const std::optional<TransferTarget>& target, int max_parallel,
                              const std::function<RecordSink(std::size_t)>& sink_for) {
    if (configs.empty()) throw ContractError("sweep needs at least one config");
    std::vector<RunLog> logs(configs.size());
    auto run_one = [&](std::size_t i) {
        const RecordSink sink = sink_for ? sink_for(i) : RecordSink{};
        logs[i] = train_run(configs[i], train, test, target, sink);
    };
    const std::size_t workers =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(max_parallel, 1)), 1, configs.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) run_one(i);
        return logs;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < configs.size(); i = next++) {
                try {
                    run_one(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return logs;
}

}  // namespace gcnc
