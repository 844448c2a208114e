#pragma once

#include <span>

#include "gcnc/data.hpp"
#include "gcnc/linalg.hpp"
#include "gcnc/nn.hpp"

namespace gcnc {

/// Linear head on [z, 1]: weights are (p + 1) x l with the bias in the last row.
struct RidgeHead {
    Matrix weights;
    double lambda = 0.0;
};

/// 1e-3 * trace(Z^T Z) / p.
double default_ridge_lambda(const Matrix& Z);

/// Solves (A^T A + lambda * I') W = A^T Y with A = [Z, 1], one-hot Y and I'
/// the identity with a zero in the bias position. Throws
/// SingularSystemError when the system cannot be factored.
RidgeHead ridge_fit(const Matrix& Z, std::span<const int> labels, int n_classes, double lambda);

/// max |(A^T A + lambda I') W - A^T Y| for a fitted head.
double normal_equation_residual(const RidgeHead& head, const Matrix& Z, std::span<const int> labels);

/// Argmax class of [z, 1] * W per row; ties go to the smallest index.
std::vector<int> ridge_predict(const RidgeHead& head, const Matrix& Z);
double ridge_predict_accuracy(const RidgeHead& head, const Matrix& Z, std::span<const int> labels);

struct EpisodeResult {
    double ridge_accuracy = 0.0;
    double nearest_mean_accuracy = 0.0;
    double target_nc = 0.0;
    bool degenerate = false;  // coincident class means; target_nc undefined
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

struct FewShotSummary {
    MeanStd ridge_accuracy;
    MeanStd nearest_mean_accuracy;
    MeanStd target_nc;  // over non-degenerate episodes
    int episodes = 0;
    int degenerate_episodes = 0;
    double max_normal_residual = 0.0;
    std::vector<EpisodeResult> per_episode;
};

/// Episodic evaluation of a frozen feature map. lambda < 0 selects
/// default_ridge_lambda of each episode's support embeddings, or 1 when
/// those embeddings are all zero.
FewShotSummary few_shot_eval(const Network& net, const LabeledDataset& target,
                             const EpisodeSpec& spec, double lambda, Rng& rng);

/// Same protocol on precomputed target embeddings (rows aligned with target).
FewShotSummary few_shot_eval(const Matrix& Z_target, const LabeledDataset& target,
                             const EpisodeSpec& spec, double lambda, Rng& rng);

}  // namespace gcnc
