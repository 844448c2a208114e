#pragma once

#include <vector>

#include "gcnc/data.hpp"
#include "gcnc/metrics.hpp"
#include "gcnc/nn.hpp"

namespace gcnc {

struct BoundInputs {
    double c = 1.0;        // Poincare constant estimate
    double L = 0.0;        // Lipschitz lower-bound estimate
    double delta = 0.05;   // confidence
    int p = 1;             // embedding width
    int m_c = 1;           // samples per class
    int k = 2;             // classes
    bool include_lipschitz_term = false;

    void validate() const;
};

/// Index of the nearest row of `means` to z; ties go to the smallest index.
int nearest_mean(const Matrix& means, const Eigen::Ref<const Vector>& z);

/// Error rate on `test` of the nearest-class-mean classifier whose means
/// come from the embeddings of `train`.
double nearest_mean_error(const Network& net, const LabeledDataset& train,
                          const LabeledDataset& test);

/// Same rule on precomputed embeddings.
double nearest_mean_error(const Matrix& means, const Matrix& Z_test, std::span<const int> y_test);

/// Largest ||f(x) - f(x')|| / ||x - x'|| over row pairs of X: all pairs
/// when X has <= 256 rows, otherwise 256^2 random pairs drawn with `rng`.
/// Always a lower bound on the Lipschitz constant of f.
double lipschitz_lower_bound(const Network& net, const Matrix& X, Rng& rng);

/// Pair-ratio maximum for an arbitrary map, given the mapped rows.
double lipschitz_lower_bound(const Matrix& X, const Matrix& FX, Rng& rng);

/// 16 c (1/p + 1/m_c) (gc_hat + lipschitz term) * sum_{i != j} 1/d_ij^2.
double generalization_bound_rhs(double gc_hat, const ClassStats& stats, const BoundInputs& in);

struct RademacherEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo E_eps sup_{a in set} <eps, a> with eps uniform on {-1, 1}^n.
RademacherEstimate rademacher_estimate(const std::vector<Vector>& set, int trials, Rng& rng);

struct EnsembleStats {
    double delta_fstar = 0.0;       // min class-mean distance over members and class pairs
    double sup_gc_per_class = 0.0;  // max embedding GC over members and classes
    double sup_embed_norm = 0.0;    // max ||f(x)|| over members and samples (a lower bound)
    double rademacher_h = 0.0;      // restricted to the trained members
    double rademacher_h_std_error = 0.0;
    int ensemble_size = 0;
};

/// Statistics of a finite ensemble of trained feature maps over the classes
/// of `data`. Throws DegenerateError when two class means coincide.
EnsembleStats ensemble_stats(const std::vector<Network>& ensemble, const LabeledDataset& data,
                             int rademacher_trials, Rng& rng);

struct TransferBound {
    double total = 0.0;
    double term1 = 0.0;
    double term2 = 0.0;
    double term3 = 0.0;
};

/// Three-term bound on the expected CDNV of two target classes.
/// k is the number of source classes.
TransferBound transfer_bound_rhs(double source_gc, const ClassStats& source_stats,
                                 const EnsembleStats& ens, double c_source, double c_target,
                                 double delta, int k);

}  // namespace gcnc
