#include "gcnc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "gcnc/bounds.hpp"
#include "gcnc/commands.hpp"
#include "gcnc/errors.hpp"
#include "gcnc/transfer.hpp"

namespace gcnc {

namespace {

double normwise_error(const Vector& got, const Vector& want) {
    const double scale = want.cwiseAbs().maxCoeff();
    return (got - want).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
}

// Central differences of a scalar function of the flattened parameters.
template <class F>
Vector fd_param_gradient(const Network& net, F&& f, double h) {
    Vector theta = net.params.flatten();
    Vector out(theta.size());
    Network probe = net;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double keep = theta(i);
        theta(i) = keep + h;
        probe.params.assign_flat(theta);
        const double up = f(probe);
        theta(i) = keep - h;
        probe.params.assign_flat(theta);
        const double down = f(probe);
        theta(i) = keep;
        out(i) = (up - down) / (2.0 * h);
    }
    return out;
}

Matrix fd_input_jacobian(const Network& net, const Vector& x, Subnet subnet, double h) {
    const auto eval = [&](const Vector& v) -> Vector {
        const Matrix row = v.transpose();
        return subnet == Subnet::embedding ? Vector(embed(net, row).row(0).transpose())
                                           : Vector(logits(net, row).row(0).transpose());
    };
    const Vector base = eval(x);
    Matrix J(base.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vector up = x, down = x;
        up(j) += h;
        down(j) -= h;
        J.col(j) = (eval(up) - eval(down)) / (2.0 * h);
    }
    return J;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

CheckResult check_derivatives(std::uint64_t seed) {
    Rng rng(seed);
    double grad_err = 0.0, jac_err = 0.0, reg_err = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
        NetworkSpec spec{{6, 8, 5, 3}, Activation::tanh};
        const Network net = init_network(spec, derive_seed(seed, 100 + trial));
        Matrix X = Matrix::NullaryExpr(7, 6, [&] { return std::normal_distribution<double>()(rng); });
        std::vector<int> y(7);
        for (auto& v : y) v = static_cast<int>(rng() % 3);

        const Vector g = loss_and_grad(net, X, y).grads.flatten();
        const Vector g_fd = fd_param_gradient(
            net, [&](const Network& n) { return loss_and_grad(n, X, y).loss; }, 1e-6);
        grad_err = std::max(grad_err, normwise_error(g, g_fd));

        const Vector x = X.row(0).transpose();
        for (Subnet s : {Subnet::embedding, Subnet::logit}) {
            const Matrix J = input_jacobian(net, x, s);
            const Matrix J_fd = fd_input_jacobian(net, x, s, 1e-6);
            jac_err = std::max(jac_err, normwise_error(J.reshaped(), J_fd.reshaped()));
        }

        const Vector r = gc_reg_grad(net, X).flatten();
        const Vector r_fd = fd_param_gradient(
            net, [&](const Network& n) { return empirical_gc(n, X, Subnet::logit).value; }, 1e-5);
        reg_err = std::max(reg_err, normwise_error(r, r_fd));
    }
    const bool ok = grad_err < 1e-6 && jac_err < 1e-6 && reg_err < 1e-4;
    return {"finite-difference derivatives", ok,
            "grad " + fmt(grad_err) + ", jacobian " + fmt(jac_err) + ", gc penalty " + fmt(reg_err)};
}

CheckResult check_linear_gc(std::uint64_t seed) {
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const NetworkSpec spec{{5, 7, 4, 3}, Activation::identity};
        const Network net = init_network(spec, derive_seed(seed, 200 + trial));
        Rng rng(derive_seed(seed, 300 + trial));
        const Matrix X =
            Matrix::NullaryExpr(9, 5, [&] { return std::normal_distribution<double>()(rng); });
        const Matrix A = net.params.weights[1] * net.params.weights[0];
        const double want = A.squaredNorm();
        worst = std::max(worst, std::abs(empirical_gc(net, X, Subnet::embedding).value - want) / want);
    }
    return {"linear-map GC", worst < 1e-12, "max relative error " + fmt(worst)};
}

CheckResult check_sampled_gc(std::uint64_t seed) {
    const NetworkSpec spec{{6, 16, 12, 4}, Activation::tanh};
    const Network net = init_network(spec, derive_seed(seed, 400));
    Rng rng(derive_seed(seed, 401));
    const Matrix X = Matrix::NullaryExpr(64, 6, [&] { return std::normal_distribution<double>()(rng); });
    const double full = empirical_gc(net, X, Subnet::embedding).value;
    double worst = 0.0;
    for (GcMode mode : {GcMode::sample_examples, GcMode::sample_entries, GcMode::sample_outputs}) {
        const int n = full_sample_size(net, X, Subnet::embedding, mode);
        const int size = std::max(1, n / 4);
        const GcEstimate est = sampled_gc(net, X, Subnet::embedding, mode, size, 400, rng);
        worst = std::max(worst, std::abs(est.value - full) / full);
    }
    return {"sampled GC unbiasedness", worst < 0.03, "max relative error " + fmt(worst)};
}

CheckResult check_ridge(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 500));
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 12, p = 5, l = 3;
        const Matrix Z = Matrix::NullaryExpr(n, p, [&] { return std::normal_distribution<double>()(rng); });
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % l;
        const double lambda = 0.1 * (trial + 1);
        const RidgeHead head = ridge_fit(Z, y, l, lambda);
        Matrix A(n, p + 1);
        A << Z, Vector::Ones(n);
        Matrix Y = Matrix::Zero(n, l);
        for (int i = 0; i < n; ++i) Y(i, y[static_cast<std::size_t>(i)]) = 1.0;
        Matrix reg = lambda * Matrix::Identity(p + 1, p + 1);
        reg(p, p) = 0.0;
        const Matrix W = (A.transpose() * A + reg).inverse() * A.transpose() * Y;
        worst = std::max(worst, (head.weights - W).cwiseAbs().maxCoeff());
        worst = std::max(worst, normal_equation_residual(head, Z, y));
    }
    return {"ridge against explicit inverse", worst < 1e-8, "max deviation " + fmt(worst)};
}

std::vector<CheckResult> check_run_bounds(const ExperimentConfig& cfg) {
    const ExperimentData data = build_data(cfg.dataset);
    const RunLog log = train_run(cfg.train, data.train, data.test);
    double c_star = 0.0;
    for (const auto& r : log.records)
        if (std::isfinite(r.c_lower_bound)) c_star = std::max(c_star, r.c_lower_bound);
    std::size_t total = 0, nc_ok = 0, gen_ok = 0;
    for (const auto& r : log.records) {
        if (!std::isfinite(r.nc)) continue;
        ++total;
        nc_ok += r.nc <= c_star * r.geometric_collapse * (1.0 + 1e-12);
        gen_ok += r.gen_bound_lhs <= r.gen_bound_rhs / cfg.train.bounds.c * c_star;
    }
    const double frac = total ? static_cast<double>(gen_ok) / static_cast<double>(total) : 0.0;
    return {
        {"NC bounded by c* times geometric collapse", total > 0 && nc_ok == total,
         std::to_string(nc_ok) + "/" + std::to_string(total) + " checkpoints, c* " + fmt(c_star)},
        {"generalization bound at c*", total > 0 && frac >= 0.95,
         std::to_string(gen_ok) + "/" + std::to_string(total) + " checkpoints"}};
}

}  // namespace

std::vector<CheckResult> run_verification(const ExperimentConfig& cfg, std::ostream& log) {
    const std::uint64_t seed = cfg.train.seed;
    std::vector<CheckResult> results = {check_derivatives(seed), check_linear_gc(seed),
                                        check_sampled_gc(seed), check_ridge(seed)};
    for (auto& r : check_run_bounds(cfg)) results.push_back(std::move(r));
    for (const auto& r : results)
        log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    return results;
}

}  // namespace gcnc
