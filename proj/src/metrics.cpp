#include "gcnc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gcnc/errors.hpp"

namespace gcnc {

ClassStats class_stats(const Matrix& Z, std::span<const int> y, int k) {
    if (static_cast<Eigen::Index>(y.size()) != Z.rows())
        throw ContractError("label count does not match embedding rows");
    if (k < 1) throw ContractError("class count must be positive");
    ClassStats s;
    s.k = k;
    s.means = Matrix::Zero(k, Z.cols());
    s.variances = Vector::Zero(k);
    s.counts.assign(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int c = y[i];
        if (c < 0 || c >= k) throw ContractError("label out of range");
        s.means.row(c) += Z.row(static_cast<Eigen::Index>(i));
        ++s.counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
        if (s.counts[static_cast<std::size_t>(c)] == 0)
            throw ContractError("class " + std::to_string(c) + " has no examples");
        s.means.row(c) /= static_cast<double>(s.counts[static_cast<std::size_t>(c)]);
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int c = y[i];
        s.variances(c) += (Z.row(static_cast<Eigen::Index>(i)) - s.means.row(c)).squaredNorm();
    }
    for (int c = 0; c < k; ++c) s.variances(c) /= static_cast<double>(s.counts[static_cast<std::size_t>(c)]);

    s.dist = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            const double d = (s.means.row(i) - s.means.row(j)).norm();
            s.dist(i, j) = d;
            s.dist(j, i) = d;
        }
    return s;
}

namespace {

void require_pairs(const ClassStats& stats) {
    if (stats.k < 2) throw ContractError("at least two classes are required");
}

double checked_sq_dist(const ClassStats& stats, int i, int j) {
    const double d = stats.dist(i, j);
    if (!(d > 0.0))
        throw DegenerateError("class means " + std::to_string(i) + " and " + std::to_string(j) +
                              " coincide");
    return d * d;
}

}  // namespace

double cdnv(const ClassStats& stats, int i, int j) {
    if (i == j) throw ContractError("cdnv needs two distinct classes");
    if (i < 0 || j < 0 || i >= stats.k || j >= stats.k) throw ContractError("class index out of range");
    return (stats.variances(i) + stats.variances(j)) / (2.0 * checked_sq_dist(stats, i, j));
}

double nc_measure(const ClassStats& stats) {
    require_pairs(stats);
    double sum = 0.0;
    for (int i = 0; i < stats.k; ++i)
        for (int j = 0; j < stats.k; ++j)
            if (i != j) sum += cdnv(stats, i, j);
    return sum / (static_cast<double>(stats.k) * (stats.k - 1));
}

double inv_sq_dist_sum(const ClassStats& stats) {
    require_pairs(stats);
    double sum = 0.0;
    for (int i = 0; i < stats.k; ++i)
        for (int j = 0; j < stats.k; ++j)
            if (i != j) sum += 1.0 / checked_sq_dist(stats, i, j);
    return sum;
}

double geometric_collapse(double gc, const ClassStats& stats) {
    return gc / static_cast<double>(stats.k - 1) * inv_sq_dist_sum(stats);
}

double poincare_lower_bound(double nc, double gc, const ClassStats& stats) {
    if (!(gc > 0.0)) throw DegenerateError("Poincare lower bound needs a positive GC");
    return nc / geometric_collapse(gc, stats);
}

Matrix embed_dataset(const Network& net, const LabeledDataset& ds) { return embed(net, ds.X); }

std::string_view to_string(GcMode m) {
    switch (m) {
        case GcMode::full: return "full";
        case GcMode::sample_examples: return "sample_examples";
        case GcMode::sample_entries: return "sample_entries";
        case GcMode::sample_outputs: return "sample_outputs";
    }
    return "unknown";
}

GcMode gc_mode_from_string(std::string_view name) {
    for (GcMode m : {GcMode::full, GcMode::sample_examples, GcMode::sample_entries,
                     GcMode::sample_outputs})
        if (name == to_string(m)) return m;
    throw ContractError("unknown GC sampling mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Geometric complexity

GcEstimate empirical_gc(const Network& net, const Matrix& X, Subnet subnet) {
    if (X.rows() == 0) throw ContractError("GC needs a non-empty batch");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        sum += input_jacobian(net, X.row(i).transpose(), subnet).squaredNorm();
    GcEstimate est;
    est.value = sum / static_cast<double>(X.rows());
    est.mode = GcMode::full;
    est.sample_size = static_cast<int>(X.rows());
    return est;
}

GcPair empirical_gc_both(const Network& net, const Matrix& X) {
    if (X.rows() == 0) throw ContractError("GC needs a non-empty batch");
    GcPair out;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const InputJacobians j = input_jacobians(net, X.row(i).transpose());
        out.embedding += j.embedding.squaredNorm();
        out.logit += j.logit.squaredNorm();
    }
    out.embedding /= static_cast<double>(X.rows());
    out.logit /= static_cast<double>(X.rows());
    return out;
}

int full_sample_size(const Network& net, const Matrix& X, Subnet subnet, GcMode mode) {
    const int outputs =
        subnet == Subnet::embedding ? net.spec.embedding_dim() : net.spec.num_classes();
    switch (mode) {
        case GcMode::full:
        case GcMode::sample_examples: return static_cast<int>(X.rows());
        case GcMode::sample_entries: return outputs * net.spec.input_dim();
        case GcMode::sample_outputs: return outputs;
    }
    return 0;
}

GcEstimate sampled_gc(const Network& net, const Matrix& X, Subnet subnet, GcMode mode,
                      int sample_size, int trials, Rng& rng) {
    if (X.rows() == 0) throw ContractError("GC needs a non-empty batch");
    if (trials < 1) throw ContractError("sampled GC needs at least one trial");
    if (mode == GcMode::full) return empirical_gc(net, X, subnet);
    const int full = full_sample_size(net, X, subnet, mode);
    if (sample_size < 1 || sample_size > full)
        throw ContractError("sample_size " + std::to_string(sample_size) + " outside [1, " +
                            std::to_string(full) + "] for mode " + std::string(to_string(mode)));

    std::vector<Matrix> jac;
    jac.reserve(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        jac.push_back(input_jacobian(net, X.row(i).transpose(), subnet));
    const auto m = jac.size();
    const double scale = static_cast<double>(full) / sample_size;

    std::vector<std::size_t> pool(static_cast<std::size_t>(full));
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<std::size_t> pick;
    pick.reserve(static_cast<std::size_t>(sample_size));

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        double v = 0.0;
        switch (mode) {
            case GcMode::sample_examples: {
                pick.clear();
                std::sample(pool.begin(), pool.end(), std::back_inserter(pick), sample_size, rng);
                for (std::size_t i : pick) v += jac[i].squaredNorm();
                v /= static_cast<double>(sample_size);
                break;
            }
            case GcMode::sample_entries: {
                for (const Matrix& J : jac) {
                    pick.clear();
                    std::sample(pool.begin(), pool.end(), std::back_inserter(pick), sample_size,
                                rng);
                    double s = 0.0;
                    for (std::size_t e : pick) {
                        const double entry = J.data()[e];
                        s += entry * entry;
                    }
                    v += scale * s;
                }
                v /= static_cast<double>(m);
                break;
            }
            case GcMode::sample_outputs: {
                pick.clear();
                std::sample(pool.begin(), pool.end(), std::back_inserter(pick), sample_size, rng);
                for (const Matrix& J : jac) {
                    double s = 0.0;
                    for (std::size_t r : pick) s += J.row(static_cast<Eigen::Index>(r)).squaredNorm();
                    v += scale * s;
                }
                v /= static_cast<double>(m);
                break;
            }
            case GcMode::full: break;
        }
        values.push_back(v);
    }

    GcEstimate est;
    est.mode = mode;
    est.sample_size = sample_size;
    est.trials = trials;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(trials);
    est.value = mean;
    if (trials > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        est.std_across_trials = std::sqrt(ss / (trials - 1));
    }
    return est;
}

// ---------------------------------------------------------------------------
// Flatness

double loss_slope(const Parameters& grad) { return grad.squared_norm(); }

double loss_slope(const Network& net, const Matrix& X, std::span<const int> y) {
    return loss_slope(loss_and_grad(net, X, y).grads);
}

double sharpness_estimate(const GradientFn& grad, const Parameters& theta, int n_probes, Rng& rng,
                          double eps) {
    if (n_probes < 1) throw ContractError("sharpness needs at least one probe");
    if (eps <= 0.0) eps = default_hvp_eps(theta);
    const auto n = static_cast<Eigen::Index>(theta.size());
    std::bernoulli_distribution coin(0.5);
    Parameters v = Parameters::zeros_like(theta);
    Vector flat(n);
    double acc = 0.0;
    for (int t = 0; t < n_probes; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) flat(i) = coin(rng) ? 1.0 : -1.0;
        v.assign_flat(flat);
        acc += v.dot(hvp(grad, theta, v, eps));
    }
    return acc / n_probes / static_cast<double>(n);
}

double sharpness_estimate(const Network& net, const Matrix& X, std::span<const int> y,
                          int n_probes, Rng& rng) {
    const GradientFn grad = [&](const Parameters& theta) {
        return loss_and_grad(Network{net.spec, theta}, X, y).grads;
    };
    return sharpness_estimate(grad, net.params, n_probes, rng);
}

}  // namespace gcnc
