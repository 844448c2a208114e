#include <cmath>

#include "doctest.h"
#include "gcnc/bounds.hpp"
#include "gcnc/errors.hpp"
#include "support/oracles.hpp"

using namespace gcnc;

namespace {

Network identity_features(int d, int k) {
    const NetworkSpec spec{{d, d, k}, Activation::identity};
    Network net{spec, Parameters::zeros(spec)};
    net.params.weights[0] = Matrix::Identity(d, d);
    return net;
}

ClassStats line_stats(double d) {
    Matrix Z(2, 1);
    Z << 0.0, d;
    return class_stats(Z, std::vector<int>{0, 1}, 2);
}

}  // namespace

TEST_CASE("nearest-mean classifier") {
    SUBCASE("collapsed distinct clusters give zero error") {
        LabeledDataset train;
        train.k = 2;
        train.X = Matrix(4, 2);
        train.X << 0, 0, 0, 0, 5, 5, 5, 5;
        train.y = {0, 0, 1, 1};
        CHECK(nearest_mean_error(identity_features(2, 2), train, train) == 0.0);
    }
    SUBCASE("ties go to the smaller class index") {
        Matrix means(3, 1);
        means << 2.0, -1.0, 1.0;
        Vector z(1);
        z << 0.0;
        CHECK(nearest_mean(means, z) == 1);
        z << 1.5;
        CHECK(nearest_mean(means, z) == 0);
    }
    SUBCASE("well-separated mixture") {
        const LabeledDataset all = gen_gaussian_mixture(3, 10, 20.0, 1.0, 700, 3);
        auto [train, test] = stratified_split(all, 1000.0 / 2100.0, 1);
        CHECK(test.size() == 999);
        CHECK(nearest_mean_error(identity_features(10, 3), train, test) < 0.01);
    }
}

TEST_CASE("Lipschitz lower bound") {
    Rng rng(1);
    const NetworkSpec spec{{4, 3, 2}, Activation::identity};
    Network lin = init_network(spec, 5);
    const Matrix& A = lin.params.weights[0];
    const Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
    const double sigma = svd.singularValues()(0);

    const Matrix X = oracle::gaussian(30, 4, rng);
    CHECK(lipschitz_lower_bound(lin, X, rng) <= sigma * (1 + 1e-12));

    Matrix pair(2, 4);
    pair.row(0) = X.row(0);
    pair.row(1) = X.row(0) + svd.matrixV().col(0).transpose();
    CHECK(lipschitz_lower_bound(lin, pair, rng) == doctest::Approx(sigma).epsilon(1e-12));

    const Network zero{spec, Parameters::zeros(spec)};
    CHECK(lipschitz_lower_bound(zero, X, rng) == 0.0);
    CHECK(lipschitz_lower_bound(identity_features(4, 2), X, rng) == doctest::Approx(1.0).epsilon(1e-14));

    const Matrix big = oracle::gaussian(300, 4, rng);
    CHECK(lipschitz_lower_bound(identity_features(4, 2), big, rng) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(lipschitz_lower_bound(identity_features(4, 2), Matrix::Ones(3, 4), rng), ContractError);
}

TEST_CASE("generalization bound right-hand side") {
    BoundInputs in;
    in.c = 1;
    in.p = 1;
    in.m_c = 1;
    in.k = 2;
    CHECK(generalization_bound_rhs(1.0, line_stats(4.0), in) == 4.0);
    CHECK(generalization_bound_rhs(0.0, line_stats(4.0), in) == 0.0);

    in.delta = 1.5;
    CHECK_THROWS_AS(generalization_bound_rhs(1.0, line_stats(4.0), in), ContractError);
}

TEST_CASE("generalization bound is monotone in GC, c and the inverse distances") {
    Rng rng(2);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int t = 0; t < 200; ++t) {
        BoundInputs in;
        in.c = u(rng);
        in.p = 1 + static_cast<int>(rng() % 64);
        in.m_c = 1 + static_cast<int>(rng() % 500);
        in.k = 2;
        in.include_lipschitz_term = t % 2 == 0;
        in.L = u(rng);
        const double gc = u(rng), d = u(rng);
        const double base = generalization_bound_rhs(gc, line_stats(d), in);
        CHECK(generalization_bound_rhs(gc * 1.5, line_stats(d), in) >= base);
        CHECK(generalization_bound_rhs(gc, line_stats(d * 0.7), in) >= base);
        BoundInputs more = in;
        more.c *= 2.0;
        CHECK(generalization_bound_rhs(gc, line_stats(d), more) >= base);
    }
}

TEST_CASE("Rademacher estimates") {
    Rng rng(3);
    Vector a(6);
    a << 1, -2, 0.5, 3, -1, 2;
    const int trials = 2000;
    const RademacherEstimate single = rademacher_estimate({a}, trials, rng);
    CHECK(std::abs(single.mean) <= 3.0 / std::sqrt(trials) * a.norm());

    Vector e1 = Vector::Zero(4);
    e1(0) = 1.0;
    const RademacherEstimate pm = rademacher_estimate({e1, -e1}, 50, rng);
    CHECK(pm.mean == 1.0);
    CHECK(pm.std_error == 0.0);
}

TEST_CASE("ensemble statistics") {
    LabeledDataset data;
    data.k = 2;
    data.X = Matrix(4, 2);
    data.X << 0, 0, 0, 2, 3, 0, 3, 2;
    data.y = {0, 0, 1, 1};
    Rng rng(4);
    const EnsembleStats one = ensemble_stats({identity_features(2, 2)}, data, 100, rng);
    CHECK(one.delta_fstar == 3.0);
    CHECK(one.sup_gc_per_class == 2.0);
    CHECK(one.sup_embed_norm == doctest::Approx(std::sqrt(13.0)));
    CHECK(one.ensemble_size == 1);

    const LabeledDataset mix = gen_gaussian_mixture(3, 4, 3.0, 1.0, 20, 1);
    std::vector<Network> members;
    double previous = INFINITY;
    for (std::uint64_t s = 0; s < 4; ++s) {
        members.push_back(init_network(NetworkSpec{{4, 8, 5, 3}, Activation::tanh}, s));
        const double now = ensemble_stats(members, mix, 20, rng).delta_fstar;
        CHECK(now <= previous);
        previous = now;
    }

    LabeledDataset same = data;
    same.X.setZero();
    CHECK_THROWS_AS(ensemble_stats({identity_features(2, 2)}, same, 10, rng), DegenerateError);
}

TEST_CASE("transfer bound terms") {
    EnsembleStats ens;
    ens.delta_fstar = 2.0;
    ens.sup_gc_per_class = 0.0;
    ens.rademacher_h = 0.0;
    ens.sup_embed_norm = 5.0;
    const ClassStats d2 = line_stats(2.0);
    const TransferBound zero = transfer_bound_rhs(0.0, d2, ens, 1.0, 1.0, 0.05, 2);
    CHECK(zero.total == 0.0);

    const TransferBound one = transfer_bound_rhs(1.0, d2, ens, 1.0, 1.0, 0.05, 2);
    CHECK(one.term1 == 0.5);

    ens.sup_gc_per_class = 3.0;
    ens.rademacher_h = 0.7;
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int t = 0; t < 50; ++t) {
        const double gc = u(rng), c = u(rng);
        const ClassStats s = line_stats(u(rng));
        const TransferBound a = transfer_bound_rhs(gc, s, ens, c, u(rng), 0.05, 5);
        CHECK(a.term1 == c * geometric_collapse(gc, s));
        CHECK(std::isfinite(a.total));
        CHECK(a.total == a.term1 + a.term2 + a.term3);
        EnsembleStats wider = ens;
        wider.delta_fstar *= 2.0;
        const TransferBound b = transfer_bound_rhs(gc, s, wider, c, 1.0, 0.05, 5);
        const TransferBound a1 = transfer_bound_rhs(gc, s, ens, c, 1.0, 0.05, 5);
        CHECK(b.term2 < a1.term2);
        CHECK(b.term3 < a1.term3);
    }
    ens.delta_fstar = 0.0;
    CHECK_THROWS_AS(transfer_bound_rhs(1.0, d2, ens, 1.0, 1.0, 0.05, 2), DegenerateError);
}
