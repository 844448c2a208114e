#include "gcnc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gcnc/errors.hpp"

namespace gcnc {

void BoundInputs::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ContractError("delta must lie in (0, 1)");
    if (p < 1 || m_c < 1 || k < 1) throw ContractError("p, m_c and k must be >= 1");
    if (c < 0.0 || L < 0.0) throw ContractError("c and L must be nonnegative");
}

int nearest_mean(const Matrix& means, const Eigen::Ref<const Vector>& z) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        const double d = (means.row(c).transpose() - z).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

double nearest_mean_error(const Matrix& means, const Matrix& Z_test, std::span<const int> y_test) {
    if (Z_test.rows() == 0) throw ContractError("empty test set");
    std::size_t wrong = 0;
    for (Eigen::Index i = 0; i < Z_test.rows(); ++i)
        if (nearest_mean(means, Z_test.row(i).transpose()) != y_test[static_cast<std::size_t>(i)])
            ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(Z_test.rows());
}

double nearest_mean_error(const Network& net, const LabeledDataset& train,
                          const LabeledDataset& test) {
    if (train.k != test.k) throw ContractError("train and test must share class indexing");
    const ClassStats stats = class_stats(embed(net, train.X), train.y, train.k);
    return nearest_mean_error(stats.means, embed(net, test.X), test.y);
}

double lipschitz_lower_bound(const Matrix& X, const Matrix& FX, Rng& rng) {
    if (X.rows() < 2) throw ContractError("Lipschitz estimate needs at least two rows");
    if (FX.rows() != X.rows()) throw ContractError("mapped rows do not match inputs");
    constexpr Eigen::Index kExhaustive = 256;
    double best = 0.0;
    bool any = false;
    auto visit = [&](Eigen::Index i, Eigen::Index j) {
        const double dx = (X.row(i) - X.row(j)).norm();
        if (dx == 0.0) return;
        any = true;
        best = std::max(best, (FX.row(i) - FX.row(j)).norm() / dx);
    };
    if (X.rows() <= kExhaustive) {
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = i + 1; j < X.rows(); ++j) visit(i, j);
    } else {
        std::uniform_int_distribution<Eigen::Index> pick(0, X.rows() - 1);
        for (Eigen::Index t = 0; t < kExhaustive * kExhaustive; ++t) {
            const Eigen::Index i = pick(rng);
            const Eigen::Index j = pick(rng);
            if (i != j) visit(i, j);
        }
    }
    if (!any) throw ContractError("all sampled rows are duplicates");
    return best;
}

double lipschitz_lower_bound(const Network& net, const Matrix& X, Rng& rng) {
    return lipschitz_lower_bound(X, embed(net, X), rng);
}

double generalization_bound_rhs(double gc_hat, const ClassStats& stats, const BoundInputs& in) {
    in.validate();
    double complexity = gc_hat;
    if (in.include_lipschitz_term)
        complexity += in.L * std::sqrt(std::log(2.0 / in.delta) /
                                       (2.0 * static_cast<double>(in.m_c) * in.k));
    return 16.0 * in.c * (1.0 / in.p + 1.0 / in.m_c) * complexity * inv_sq_dist_sum(stats);
}

RademacherEstimate rademacher_estimate(const std::vector<Vector>& set, int trials, Rng& rng) {
    if (set.empty()) throw ContractError("Rademacher estimate needs a non-empty set");
    if (trials < 1) throw ContractError("Rademacher estimate needs at least one trial");
    const Eigen::Index n = set.front().size();
    std::bernoulli_distribution coin(0.5);
    Vector eps(n);
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < trials; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) eps(i) = coin(rng) ? 1.0 : -1.0;
        double best = -std::numeric_limits<double>::infinity();
        for (const Vector& a : set) best = std::max(best, eps.dot(a));
        sum += best;
        sum_sq += best * best;
    }
    RademacherEstimate r;
    r.mean = sum / trials;
    if (trials > 1) {
        const double var = std::max(0.0, (sum_sq - trials * r.mean * r.mean) / (trials - 1));
        r.std_error = std::sqrt(var / trials);
    }
    return r;
}

EnsembleStats ensemble_stats(const std::vector<Network>& ensemble, const LabeledDataset& data,
                             int rademacher_trials, Rng& rng) {
    if (ensemble.empty()) throw ContractError("ensemble is empty");
    data.validate();
    if (data.k < 2) throw ContractError("ensemble statistics need at least two classes");

    EnsembleStats out;
    out.ensemble_size = static_cast<int>(ensemble.size());
    out.delta_fstar = std::numeric_limits<double>::infinity();
    const auto by_class = data.class_indices();
    std::vector<Vector> points;

    for (const Network& net : ensemble) {
        const Matrix Z = embed(net, data.X);
        const ClassStats stats = class_stats(Z, data.y, data.k);
        for (int i = 0; i < data.k; ++i)
            for (int j = i + 1; j < data.k; ++j)
                out.delta_fstar = std::min(out.delta_fstar, stats.dist(i, j));
        out.sup_embed_norm = std::max(out.sup_embed_norm, Z.rowwise().norm().maxCoeff());
        for (int c = 0; c < data.k; ++c) {
            const LabeledDataset cls = select_rows(data, by_class[static_cast<std::size_t>(c)]);
            out.sup_gc_per_class = std::max(
                out.sup_gc_per_class, empirical_gc(net, cls.X, Subnet::embedding).value);
            Vector point(Z.cols() + 1);
            point.head(Z.cols()) = stats.means.row(c).transpose();
            point(Z.cols()) = stats.variances(c);
            points.push_back(std::move(point));
        }
    }
    if (!(out.delta_fstar > 0.0))
        throw DegenerateError("two class means coincide under an ensemble member");

    const RademacherEstimate h = rademacher_estimate(points, rademacher_trials, rng);
    out.rademacher_h = h.mean;
    out.rademacher_h_std_error = h.std_error;
    return out;
}

TransferBound transfer_bound_rhs(double source_gc, const ClassStats& source_stats,
                                 const EnsembleStats& ens, double c_source, double c_target,
                                 double delta, int k) {
    if (!(delta > 0.0 && delta < 1.0)) throw ContractError("delta must lie in (0, 1)");
    if (k < 2) throw ContractError("transfer bound needs at least two source classes");
    if (!(ens.delta_fstar > 0.0))
        throw DegenerateError("delta_fstar is zero; the transfer bound is infinite");
    const double kd = static_cast<double>(k);
    const double D = ens.delta_fstar;

    TransferBound t;
    t.term1 = c_source * geometric_collapse(source_gc, source_stats);
    t.term2 = (8.0 + 16.0 * c_target * ens.sup_gc_per_class / D) *
              (std::sqrt(2.0 * std::numbers::pi * std::log(kd)) * ens.rademacher_h /
               ((kd - 1.0) * D));
    t.term3 = (1.0 + 4.0 * ens.sup_embed_norm / (D * D)) *
              (2.0 * std::sqrt(std::log(1.0 / delta)) * c_target * ens.sup_gc_per_class /
               (std::sqrt(kd) * D * D));
    t.total = t.term1 + t.term2 + t.term3;
    return t;
}

}  // namespace gcnc
