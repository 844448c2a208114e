#include <cmath>

#include "doctest.h"
#include "gcnc/errors.hpp"
#include "gcnc/report.hpp"
#include "gcnc/train.hpp"
#include "support/oracles.hpp"

using namespace gcnc;

namespace {

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.network = NetworkSpec{{6, 16, 8, 3}, Activation::relu};
    cfg.lr = 0.05;
    cfg.batch_size = 16;
    cfg.steps = 60;
    cfg.log_every = 20;
    cfg.seed = 4;
    return cfg;
}

struct Split {
    LabeledDataset train, test;
};

Split small_data() {
    auto [train, test] = stratified_split(gen_gaussian_mixture(3, 6, 3.0, 1.0, 40, 2), 0.25, 1);
    return {train, test};
}

std::string serialize(const RunLog& log) {
    std::string s;
    for (const auto& r : log.records) s += to_json_line(r) + "\n";
    return s;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
    const Split d = small_data();
    TrainConfig cfg = small_config();
    cfg.lr = 0.0;
    const Network net = init_network(cfg.network, 1);
    CHECK(sgd_step(net, d.train.X.topRows(16), std::span<const int>(d.train.y).first(16), cfg) == net.params);
}

TEST_CASE("weight decay alone shrinks parameters geometrically") {
    const NetworkSpec spec{{3, 4, 2}, Activation::tanh};
    Parameters theta = init_params(spec, 2);
    const Parameters start = theta;
    const Parameters zero = Parameters::zeros_like(theta);
    const double lr = 0.1, l2 = 0.05;
    for (int s = 0; s < 25; ++s) theta = sgd_update(theta, zero, lr, l2, 0);
    const double rate = std::pow(1.0 - 2.0 * lr * l2, 25);
    CHECK(oracle::rel_error(theta.flatten(), rate * start.flatten()) < 1e-13);
}

TEST_CASE("one SGD step on a hand-computed network") {
    const NetworkSpec spec{{1, 1, 2}, Activation::identity};
    Network net{spec, Parameters::zeros(spec)};
    const double a = 0.5, b0 = 0.1, u = 1.5, v = -0.5, c0 = 0.2, c1 = -0.1, x = 2.0;
    net.params.weights[0] << a;
    net.params.biases[0] << b0;
    net.params.weights[1] << u, v;
    net.params.biases[1] << c0, c1;

    TrainConfig cfg;
    cfg.network = spec;
    cfg.lr = 0.3;
    Matrix X(1, 1);
    X << x;
    const std::vector<int> y{1};
    const Parameters next = sgd_step(net, X, y, cfg);

    const double z = a * x + b0;
    const double l0 = u * z + c0, l1 = v * z + c1;
    const double p0 = std::exp(l0) / (std::exp(l0) + std::exp(l1));
    const double g0 = p0, g1 = (1.0 - p0) - 1.0;  // softmax minus one-hot(1)
    const double dz = u * g0 + v * g1;
    CHECK(next.weights[1](0, 0) == doctest::Approx(u - 0.3 * g0 * z).epsilon(1e-12));
    CHECK(next.weights[1](1, 0) == doctest::Approx(v - 0.3 * g1 * z).epsilon(1e-12));
    CHECK(next.biases[1](0) == doctest::Approx(c0 - 0.3 * g0).epsilon(1e-12));
    CHECK(next.biases[1](1) == doctest::Approx(c1 - 0.3 * g1).epsilon(1e-12));
    CHECK(next.weights[0](0, 0) == doctest::Approx(a - 0.3 * dz * x).epsilon(1e-12));
    CHECK(next.biases[0](0) == doctest::Approx(b0 - 0.3 * dz).epsilon(1e-12));
}

TEST_CASE("accuracy") {
    LabeledDataset ds;
    ds.k = 3;
    ds.X = Matrix::Identity(3, 3);
    ds.y = {0, 1, 2};
    const NetworkSpec spec{{3, 3, 3}, Activation::identity};
    Network net{spec, Parameters::zeros(spec)};
    CHECK(accuracy(net, ds) == doctest::Approx(1.0 / 3.0));
    net.params.weights[0] = Matrix::Identity(3, 3);
    net.params.weights[1] = Matrix::Identity(3, 3);
    CHECK(accuracy(net, ds) == 1.0);

    const Split d = small_data();
    const Network rnd = init_network(small_config().network, 9);
    const Matrix z = logits(rnd, d.test.X);
    int right = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (z(i, c) > z(i, best)) best = c;
        right += best == d.test.y[static_cast<std::size_t>(i)];
    }
    CHECK(accuracy(rnd, d.test) == static_cast<double>(right) / static_cast<double>(z.rows()));
}

TEST_CASE("training runs") {
    const Split d = small_data();
    TrainConfig cfg = small_config();

    SUBCASE("zero steps log a single record") {
        cfg.steps = 0;
        const RunLog log = train_run(cfg, d.train, d.test);
        CHECK(log.records.size() == 1);
        CHECK(log.records[0].step == 0);
    }
    SUBCASE("record count and step order") {
        const RunLog log = train_run(cfg, d.train, d.test);
        CHECK(log.records.size() == 60 / 20 + 1);
        for (std::size_t i = 1; i < log.records.size(); ++i) CHECK(log.records[i].step > log.records[i - 1].step);
        CHECK_FALSE(log.records.back().target_nc.has_value());
    }
    SUBCASE("runs are deterministic") {
        CHECK(serialize(train_run(cfg, d.train, d.test)) == serialize(train_run(cfg, d.train, d.test)));
    }
    SUBCASE("explicit GC penalty lowers the logit GC") {
        cfg.steps = 200;
        cfg.log_every = 200;
        const double plain = train_run(cfg, d.train, d.test).records.back().logit_gc;
        cfg.gc_reg = 0.05;
        CHECK(train_run(cfg, d.train, d.test).records.back().logit_gc < plain);
    }
    SUBCASE("divergence is reported with its step") {
        cfg.lr = 1e4;
        const RunLog log = train_run(cfg, d.train, d.test);
        CHECK(log.diverged);
        CHECK(log.divergence_step >= 1);
        CHECK(!log.records.empty());
    }
    SUBCASE("invalid configs") {
        cfg.batch_size = 1000;
        CHECK_THROWS_AS(train_run(cfg, d.train, d.test), ContractError);
        cfg = small_config();
        cfg.log_every = 100;
        CHECK_THROWS_AS(train_run(cfg, d.train, d.test), ContractError);
        cfg = small_config();
        cfg.network.layer_widths.back() = 4;
        CHECK_THROWS_AS(train_run(cfg, d.train, d.test), ContractError);
    }
}

TEST_CASE("sweeps") {
    const Split d = small_data();
    const TrainConfig cfg = small_config();
    const auto one = run_sweep({cfg}, d.train, d.test, std::nullopt, 1);
    CHECK(serialize(one[0]) == serialize(train_run(cfg, d.train, d.test)));

    std::vector<TrainConfig> grid;
    for (double lr : {0.01, 0.05, 0.2})
        for (std::uint64_t seed : {1, 2}) {
            TrainConfig c = cfg;
            c.lr = lr;
            c.seed = seed;
            grid.push_back(c);
        }
    const auto serial = run_sweep(grid, d.train, d.test, std::nullopt, 1);
    const auto parallel = run_sweep(grid, d.train, d.test, std::nullopt, 4);
    REQUIRE(serial.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(serialize(serial[i]) == serialize(parallel[i]));
        CHECK(serial[i].config.lr == grid[i].lr);
    }
}

TEST_CASE("synthetic benchmark reaches full train accuracy") {
    auto [train, test] = stratified_split(gen_gaussian_mixture(5, 20, 4.0, 1.0, 500, 0), 0.2, 7);
    TrainConfig cfg;
    cfg.network = NetworkSpec{{20, 64, 32, 5}, Activation::relu};
    cfg.lr = 0.05;
    cfg.steps = 5000;
    cfg.log_every = 5000;
    const RunLog log = train_run(cfg, train, test);
    MESSAGE("final train accuracy " << log.records.back().train_acc << ", test accuracy "
                                    << log.records.back().test_acc);
    CHECK(log.records.back().train_acc == 1.0);
}
