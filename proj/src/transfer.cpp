#include "gcnc/transfer.hpp"

#include <cmath>

#include "gcnc/bounds.hpp"
#include "gcnc/errors.hpp"
#include "gcnc/metrics.hpp"

namespace gcnc {

namespace {

Matrix augment(const Matrix& Z) {
    Matrix A(Z.rows(), Z.cols() + 1);
    A.leftCols(Z.cols()) = Z;
    A.col(Z.cols()).setOnes();
    return A;
}

Matrix one_hot(std::span<const int> labels, int n_classes) {
    Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) throw ContractError("label out of range");
        Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return Y;
}

Matrix regularized_gram(const Matrix& A, double lambda) {
    Matrix G = A.transpose() * A;
    G.diagonal().head(A.cols() - 1).array() += lambda;
    return G;
}

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) {
        out.mean = std::nan("");
        out.std = std::nan("");
        return out;
    }
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size()));
    return out;
}

}  // namespace

double default_ridge_lambda(const Matrix& Z) {
    if (Z.cols() == 0) return 0.0;
    return 1e-3 * Z.squaredNorm() / static_cast<double>(Z.cols());
}

RidgeHead ridge_fit(const Matrix& Z, std::span<const int> labels, int n_classes, double lambda) {
    if (Z.rows() < 1) throw ContractError("ridge fit needs at least one example");
    if (static_cast<Eigen::Index>(labels.size()) != Z.rows())
        throw ContractError("label count does not match rows");
    if (!(lambda >= 0.0)) throw ContractError("ridge lambda must be nonnegative");
    const Matrix A = augment(Z);
    const Matrix G = regularized_gram(A, lambda);
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success || (lambda == 0.0 && llt.rcond() < 1e-14))
        throw SingularSystemError(
            "normal equations are singular; use a positive ridge coefficient");
    RidgeHead head;
    head.lambda = lambda;
    head.weights = llt.solve(A.transpose() * one_hot(labels, n_classes));
    if (!head.weights.allFinite())
        throw SingularSystemError("ridge solution is not finite; use a positive ridge coefficient");
    return head;
}

double normal_equation_residual(const RidgeHead& head, const Matrix& Z,
                                std::span<const int> labels) {
    const Matrix A = augment(Z);
    const Matrix lhs = regularized_gram(A, head.lambda) * head.weights;
    const Matrix rhs = A.transpose() * one_hot(labels, static_cast<int>(head.weights.cols()));
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

std::vector<int> ridge_predict(const RidgeHead& head, const Matrix& Z) {
    if (Z.cols() + 1 != head.weights.rows()) throw ContractError("embedding width mismatch");
    const Matrix scores = augment(Z) * head.weights;
    std::vector<int> out(static_cast<std::size_t>(Z.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double ridge_predict_accuracy(const RidgeHead& head, const Matrix& Z, std::span<const int> labels) {
    if (Z.rows() == 0) throw ContractError("empty query set");
    const auto pred = ridge_predict(head, Z);
    std::size_t right = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == labels[i]) ++right;
    return static_cast<double>(right) / static_cast<double>(pred.size());
}

FewShotSummary few_shot_eval(const Matrix& Z_target, const LabeledDataset& target,
                             const EpisodeSpec& spec, double lambda, Rng& rng) {
    spec.validate();
    if (Z_target.rows() != static_cast<Eigen::Index>(target.size()))
        throw ContractError("embeddings do not match the target dataset");

    FewShotSummary out;
    std::vector<double> ridge, nm, nc;
    for (int e = 0; e < spec.n_episodes; ++e) {
        const EpisodeIndices ep = sample_episode_indices(target, spec, rng);
        auto gather = [&](const std::vector<std::size_t>& rows, int per_class,
                          Matrix& Z, std::vector<int>& y) {
            Z.resize(static_cast<Eigen::Index>(rows.size()), Z_target.cols());
            y.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Z.row(static_cast<Eigen::Index>(i)) = Z_target.row(static_cast<Eigen::Index>(rows[i]));
                y[i] = static_cast<int>(i / static_cast<std::size_t>(per_class));
            }
        };
        Matrix Zs, Zq;
        std::vector<int> ys, yq;
        gather(ep.support, spec.n_shot, Zs, ys);
        gather(ep.query, spec.n_query, Zq, yq);

        EpisodeResult r;
        double lam = lambda < 0.0 ? default_ridge_lambda(Zs) : lambda;
        // An all-zero support set makes the automatic coefficient zero; any
        // positive value then yields the same bias-only head.
        if (lambda < 0.0 && lam == 0.0) lam = 1.0;
        const RidgeHead head = ridge_fit(Zs, ys, spec.n_way, lam);
        out.max_normal_residual =
            std::max(out.max_normal_residual, normal_equation_residual(head, Zs, ys));
        r.ridge_accuracy = ridge_predict_accuracy(head, Zq, yq);

        const ClassStats support_stats = class_stats(Zs, ys, spec.n_way);
        r.nearest_mean_accuracy = 1.0 - nearest_mean_error(support_stats.means, Zq, yq);

        try {
            r.target_nc = nc_measure(class_stats(Zq, yq, spec.n_way));
        } catch (const DegenerateError&) {
            r.degenerate = true;
            r.target_nc = std::nan("");
            ++out.degenerate_episodes;
        }

        ridge.push_back(r.ridge_accuracy);
        nm.push_back(r.nearest_mean_accuracy);
        if (!r.degenerate) nc.push_back(r.target_nc);
        out.per_episode.push_back(r);
    }
    out.episodes = spec.n_episodes;
    out.ridge_accuracy = mean_std(ridge);
    out.nearest_mean_accuracy = mean_std(nm);
    out.target_nc = mean_std(nc);
    return out;
}

FewShotSummary few_shot_eval(const Network& net, const LabeledDataset& target,
                             const EpisodeSpec& spec, double lambda, Rng& rng) {
    return few_shot_eval(embed(net, target.X), target, spec, lambda, rng);
}

}  // namespace gcnc
