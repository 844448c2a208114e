#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gcnc/data.hpp"
#include "gcnc/metrics.hpp"
#include "gcnc/nn.hpp"

namespace gcnc {

/// Settings for the generalization-bound columns of each record.
struct BoundSettings {
    double c = 1.0;
    double delta = 0.05;
    bool include_lipschitz = false;
};

/// Plain SGD. The L2 coefficient multiplies ||theta||^2 in the loss, so it
/// contributes 2 * l2 * theta to the gradient. gc_reg multiplies the logit GC.
struct TrainConfig {
    NetworkSpec network;
    double lr = 0.01;
    int batch_size = 32;
    double l2 = 0.0;
    double gc_reg = 0.0;
    int steps = 1000;
    int log_every = 10;
    std::uint64_t seed = 0;
    int eval_batch = 512;
    int sharpness_probes = 4;
    BoundSettings bounds;

    /// Throws ContractError for out-of-range fields or a batch larger than
    /// the training set.
    void validate(std::size_t train_size) const;
};

/// Few-shot target evaluated at every logged step.
struct TransferTarget {
    const LabeledDataset& data;
    EpisodeSpec episodes;
    double lambda = -1.0;  // < 0: per-episode default
};

struct RunLog {
    TrainConfig config;
    std::vector<MetricsRecord> records;
    Network final_network;
    bool diverged = false;
    std::size_t divergence_step = 0;
};

/// theta - lr * (grad + 2 * l2 * theta). Throws DivergenceError if the
/// result is not finite.
Parameters sgd_update(const Parameters& theta, const Parameters& grad, double lr, double l2,
                      std::size_t step);

/// One SGD step on a mini-batch, including the explicit GC penalty.
/// Throws DivergenceError on a non-finite or exploding (> 1e6) loss.
Parameters sgd_step(const Network& net, const Matrix& X, std::span<const int> y,
                    const TrainConfig& config, std::size_t step = 0);

/// Fraction of rows whose argmax logit (ties to the smallest index) is the label.
double accuracy(const Network& net, const LabeledDataset& ds);

/// Computes every field of a MetricsRecord for the current network.
MetricsRecord evaluate(const Network& net, const TrainConfig& config, const LabeledDataset& train,
                       const LabeledDataset& test, const std::optional<TransferTarget>& target,
                       std::size_t step);

using RecordSink = std::function<void(const MetricsRecord&)>;

/// Trains from init_params(config.network, config.seed) and logs a record
/// at step 0 and every log_every steps. A divergence stops training and
/// returns the partial log with `diverged` set.
RunLog train_run(const TrainConfig& config, const LabeledDataset& train, const LabeledDataset& test,
                 const std::optional<TransferTarget>& target = std::nullopt,
                 const RecordSink& sink = {});

/// Independent runs over shared read-only data; results follow input order.
/// max_parallel <= 1 runs serially. `sink_for(i)`, when given, supplies the
/// record sink of run i; each run writes only to its own sink.
std::vector<RunLog> run_sweep(const std::vector<TrainConfig>& configs, const LabeledDataset& train,
                              const LabeledDataset& test,
                              const std::optional<TransferTarget>& target, int max_parallel,
                              const std::function<RecordSink(std::size_t)>& sink_for = {});

}  // namespace gcnc
