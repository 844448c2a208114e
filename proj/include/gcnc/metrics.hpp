#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gcnc/data.hpp"
#include "gcnc/linalg.hpp"
#include "gcnc/nn.hpp"

namespace gcnc {

/// Per-class embedding statistics: means, population variances
/// (mean squared distance to the class mean) and mean-to-mean distances.
struct ClassStats {
    int k = 0;
    Matrix means;      // k x p
    Vector variances;  // k
    Matrix dist;       // k x k, symmetric, zero diagonal
    std::vector<std::size_t> counts;
};

ClassStats class_stats(const Matrix& Z, std::span<const int> y, int k);

/// (Var_i + Var_j) / (2 d_ij^2). Throws DegenerateError when d_ij == 0.
double cdnv(const ClassStats& stats, int i, int j);

/// Average CDNV over ordered pairs i != j.
double nc_measure(const ClassStats& stats);

/// Sum over ordered pairs i != j of 1 / d_ij^2.
double inv_sq_dist_sum(const ClassStats& stats);

/// gc / (k - 1) * inv_sq_dist_sum(stats).
double geometric_collapse(double gc, const ClassStats& stats);

/// Smallest Poincare constant consistent with nc <= c * geometric_collapse.
double poincare_lower_bound(double nc, double gc, const ClassStats& stats);

Matrix embed_dataset(const Network& net, const LabeledDataset& ds);

enum class GcMode { full, sample_examples, sample_entries, sample_outputs };

std::string_view to_string(GcMode m);
GcMode gc_mode_from_string(std::string_view name);

struct GcEstimate {
    double value = 0.0;
    GcMode mode = GcMode::full;
    int sample_size = 0;
    int trials = 1;
    double std_across_trials = 0.0;
};

/// Mean over rows of X of ||J(x)||_F^2 for the chosen sub-network.
GcEstimate empirical_gc(const Network& net, const Matrix& X, Subnet subnet);

/// Embedding and logit GC in one sweep over X.
struct GcPair {
    double embedding = 0.0;
    double logit = 0.0;
};
GcPair empirical_gc_both(const Network& net, const Matrix& X);

/// Largest valid sample_size for a mode: rows of X, Jacobian entries, or outputs.
int full_sample_size(const Network& net, const Matrix& X, Subnet subnet, GcMode mode);

/// Unbiased sub-sampled estimates of empirical_gc. Each trial either keeps
/// sample_size rows, sample_size Jacobian entries per row (rescaled by
/// entries / sample_size), or sample_size output coordinates shared by all
/// rows (rescaled by outputs / sample_size). Reports the mean and the
/// sample standard deviation across trials.
GcEstimate sampled_gc(const Network& net, const Matrix& X, Subnet subnet, GcMode mode,
                      int sample_size, int trials, Rng& rng);

double loss_slope(const Parameters& grad);
double loss_slope(const Network& net, const Matrix& X, std::span<const int> y);

/// Hutchinson estimate of trace(H) / n with Rademacher probes.
double sharpness_estimate(const GradientFn& grad, const Parameters& theta, int n_probes, Rng& rng,
                          double eps = 0.0);
double sharpness_estimate(const Network& net, const Matrix& X, std::span<const int> y,
                          int n_probes, Rng& rng);

/// One logged evaluation. Target fields are present only for runs that
/// carry a few-shot target set.
struct MetricsRecord {
    std::size_t step = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double embedding_gc = 0.0;
    double logit_gc = 0.0;
    double nc = 0.0;
    double geometric_collapse = 0.0;
    double inv_sq_dist_sum = 0.0;
    double slope = 0.0;
    double sharpness = 0.0;
    double c_lower_bound = 0.0;
    double gen_bound_lhs = 0.0;
    double gen_bound_rhs = 0.0;
    std::optional<double> target_nc;
    std::optional<double> ridge_acc;
    std::optional<double> nearest_mean_acc;

    bool operator==(const MetricsRecord&) const = default;
};

}  // namespace gcnc
