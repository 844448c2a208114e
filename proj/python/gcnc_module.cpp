#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "gcnc/bounds.hpp"
#include "gcnc/commands.hpp"
#include "gcnc/config.hpp"
#include "gcnc/errors.hpp"
#include "gcnc/metrics.hpp"
#include "gcnc/nn.hpp"
#include "gcnc/report.hpp"
#include "gcnc/train.hpp"
#include "gcnc/transfer.hpp"

namespace py = pybind11;
using namespace gcnc;

namespace {

py::object optional_float(const std::optional<double>& v) {
    return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict record_dict(const MetricsRecord& r) {
    py::dict d;
    d["step"] = r.step;
    d["train_loss"] = r.train_loss;
    d["train_acc"] = r.train_acc;
    d["test_acc"] = r.test_acc;
    d["embedding_gc"] = r.embedding_gc;
    d["logit_gc"] = r.logit_gc;
    d["nc"] = r.nc;
    d["geometric_collapse"] = r.geometric_collapse;
    d["inv_sq_dist_sum"] = r.inv_sq_dist_sum;
    d["slope"] = r.slope;
    d["sharpness"] = r.sharpness;
    d["c_lower_bound"] = r.c_lower_bound;
    d["gen_bound_lhs"] = r.gen_bound_lhs;
    d["gen_bound_rhs"] = r.gen_bound_rhs;
    d["target_nc"] = optional_float(r.target_nc);
    d["ridge_acc"] = optional_float(r.ridge_acc);
    d["nearest_mean_acc"] = optional_float(r.nearest_mean_acc);
    return d;
}

LabeledDataset make_dataset(const Matrix& X, const std::vector<int>& y, int k) {
    LabeledDataset ds{X, y, k};
    ds.validate();
    return ds;
}

}  // namespace

PYBIND11_MODULE(_gcnc, m) {
    m.doc() = "Geometric complexity and neural collapse on small MLPs";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ContractError>(m, "ContractError", error.ptr());
    py::register_exception<FormatError>(m, "FormatError", error.ptr());
    py::register_exception<DegenerateError>(m, "DegenerateError", error.ptr());
    py::register_exception<SingularSystemError>(m, "SingularSystemError", error.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

    py::enum_<Activation>(m, "Activation")
        .value("relu", Activation::relu)
        .value("tanh", Activation::tanh)
        .value("identity", Activation::identity);
    py::enum_<Subnet>(m, "Subnet").value("embedding", Subnet::embedding).value("logit", Subnet::logit);
    py::enum_<GcMode>(m, "GcMode")
        .value("full", GcMode::full)
        .value("sample_examples", GcMode::sample_examples)
        .value("sample_entries", GcMode::sample_entries)
        .value("sample_outputs", GcMode::sample_outputs);

    py::class_<NetworkSpec>(m, "NetworkSpec")
        .def(py::init([](std::vector<int> widths, Activation act) {
                 NetworkSpec s{std::move(widths), act};
                 s.validate();
                 return s;
             }),
             py::arg("layer_widths"), py::arg("activation") = Activation::relu)
        .def_readonly("layer_widths", &NetworkSpec::layer_widths)
        .def_readonly("activation", &NetworkSpec::activation);

    py::class_<Network>(m, "Network")
        .def_readonly("spec", &Network::spec)
        .def_property(
            "weights", [](const Network& n) { return n.params.weights; },
            [](Network& n, std::vector<Matrix> w) {
                Network probe = n;
                probe.params.weights = std::move(w);
                probe.validate();
                n = std::move(probe);
            })
        .def_property(
            "biases", [](const Network& n) { return n.params.biases; },
            [](Network& n, std::vector<Vector> b) {
                Network probe = n;
                probe.params.biases = std::move(b);
                probe.validate();
                n = std::move(probe);
            })
        .def("flat_params", [](const Network& n) { return n.params.flatten(); })
        .def("set_flat_params", [](Network& n, const Vector& v) { n.params.assign_flat(v); });

    m.def("init_network", &init_network, py::arg("spec"), py::arg("seed"));
    m.def("embed", &embed, py::arg("net"), py::arg("X"));
    m.def("logits", &logits, py::arg("net"), py::arg("X"));
    m.def(
        "loss_and_grad",
        [](const Network& net, const Matrix& X, const std::vector<int>& y) {
            const LossAndGrad r = loss_and_grad(net, X, y);
            return py::make_tuple(r.loss, r.grads.flatten());
        },
        py::arg("net"), py::arg("X"), py::arg("y"),
        "Mean cross-entropy and its gradient as a flat parameter vector.");
    m.def("input_jacobian", &input_jacobian, py::arg("net"), py::arg("x"),
          py::arg("subnet") = Subnet::embedding);
    m.def(
        "gc_reg_grad", [](const Network& net, const Matrix& X) { return gc_reg_grad(net, X).flatten(); },
        py::arg("net"), py::arg("X"));

    m.def(
        "empirical_gc",
        [](const Network& net, const Matrix& X, Subnet s) { return empirical_gc(net, X, s).value; },
        py::arg("net"), py::arg("X"), py::arg("subnet") = Subnet::embedding);
    m.def(
        "sampled_gc",
        [](const Network& net, const Matrix& X, Subnet s, GcMode mode, int size, int trials,
           std::uint64_t seed) {
            Rng rng(seed);
            const GcEstimate e = sampled_gc(net, X, s, mode, size, trials, rng);
            return py::make_tuple(e.value, e.std_across_trials);
        },
        py::arg("net"), py::arg("X"), py::arg("subnet"), py::arg("mode"), py::arg("sample_size"),
        py::arg("trials"), py::arg("seed") = 0, "Mean estimate and its std across trials.");

    py::class_<ClassStats>(m, "ClassStats")
        .def_readonly("k", &ClassStats::k)
        .def_readonly("means", &ClassStats::means)
        .def_readonly("variances", &ClassStats::variances)
        .def_readonly("dist", &ClassStats::dist);
    m.def(
        "class_stats", [](const Matrix& Z, const std::vector<int>& y, int k) { return class_stats(Z, y, k); },
        py::arg("Z"), py::arg("y"), py::arg("k"));
    m.def("cdnv", &cdnv, py::arg("stats"), py::arg("i"), py::arg("j"));
    m.def("nc_measure", &nc_measure, py::arg("stats"));
    m.def("geometric_collapse", &geometric_collapse, py::arg("gc"), py::arg("stats"));
    m.def("poincare_lower_bound", &poincare_lower_bound, py::arg("nc"), py::arg("gc"), py::arg("stats"));
    m.def(
        "generalization_bound_rhs",
        [](double gc, const ClassStats& stats, double c, int p, int m_c, double lipschitz) {
            BoundInputs in;
            in.c = c;
            in.p = p;
            in.m_c = m_c;
            in.k = stats.k;
            in.L = lipschitz;
            in.include_lipschitz_term = lipschitz > 0.0;
            return generalization_bound_rhs(gc, stats, in);
        },
        py::arg("gc"), py::arg("stats"), py::arg("c"), py::arg("p"), py::arg("m_c"),
        py::arg("lipschitz") = 0.0);

    m.def(
        "gen_gaussian_mixture",
        [](int k, int d, double mean_scale, double sigma, int m_per_class, std::uint64_t seed) {
            const LabeledDataset ds = gen_gaussian_mixture(k, d, mean_scale, sigma, m_per_class, seed);
            return py::make_tuple(ds.X, ds.y);
        },
        py::arg("k"), py::arg("d"), py::arg("mean_scale"), py::arg("sigma"), py::arg("m_per_class"),
        py::arg("seed") = 0);

    m.def(
        "ridge_fit",
        [](const Matrix& Z, const std::vector<int>& y, int n_classes, double lambda) {
            return ridge_fit(Z, y, n_classes, lambda).weights;
        },
        py::arg("Z"), py::arg("y"), py::arg("n_classes"), py::arg("lam"),
        "Weights of shape (p + 1, n_classes); the last row is the bias.");
    m.def(
        "ridge_predict",
        [](const Matrix& W, const Matrix& Z) { return ridge_predict(RidgeHead{W, 0.0}, Z); },
        py::arg("W"), py::arg("Z"));
    m.def("default_ridge_lambda", &default_ridge_lambda, py::arg("Z"));
    m.def(
        "few_shot_eval",
        [](const Network& net, const Matrix& X, const std::vector<int>& y, int k, int n_way, int n_shot,
           int n_query, int n_episodes, double lambda, std::uint64_t seed) {
            EpisodeSpec spec{n_way, n_shot, n_query, n_episodes};
            Rng rng(seed);
            const FewShotSummary s = few_shot_eval(net, make_dataset(X, y, k), spec, lambda, rng);
            py::dict d;
            d["ridge_acc"] = s.ridge_accuracy.mean;
            d["ridge_acc_std"] = s.ridge_accuracy.std;
            d["nearest_mean_acc"] = s.nearest_mean_accuracy.mean;
            d["target_nc"] = s.target_nc.mean;
            d["degenerate_episodes"] = s.degenerate_episodes;
            d["max_normal_residual"] = s.max_normal_residual;
            return d;
        },
        py::arg("net"), py::arg("X"), py::arg("y"), py::arg("k"), py::arg("n_way") = 5,
        py::arg("n_shot") = 5, py::arg("n_query") = 15, py::arg("n_episodes") = 100,
        py::arg("lam") = -1.0, py::arg("seed") = 0);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](const NetworkSpec& spec, double lr, int batch_size, double l2, double gc_reg,
                         int steps, int log_every, std::uint64_t seed) {
                 TrainConfig c;
                 c.network = spec;
                 c.lr = lr;
                 c.batch_size = batch_size;
                 c.l2 = l2;
                 c.gc_reg = gc_reg;
                 c.steps = steps;
                 c.log_every = log_every;
                 c.seed = seed;
                 return c;
             }),
             py::arg("network"), py::arg("lr") = 0.01, py::arg("batch_size") = 32, py::arg("l2") = 0.0,
             py::arg("gc_reg") = 0.0, py::arg("steps") = 1000, py::arg("log_every") = 10,
             py::arg("seed") = 0)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("l2", &TrainConfig::l2)
        .def_readwrite("gc_reg", &TrainConfig::gc_reg)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("log_every", &TrainConfig::log_every)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("sharpness_probes", &TrainConfig::sharpness_probes);

    m.def(
        "train_run",
        [](const TrainConfig& cfg, const Matrix& X_train, const std::vector<int>& y_train,
           const Matrix& X_test, const std::vector<int>& y_test, int k) {
            const LabeledDataset train = make_dataset(X_train, y_train, k);
            const LabeledDataset test = make_dataset(X_test, y_test, k);
            RunLog log;
            {
                py::gil_scoped_release release;
                log = train_run(cfg, train, test);
            }
            py::list records;
            for (const auto& r : log.records) records.append(record_dict(r));
            py::dict out;
            out["records"] = records;
            out["network"] = log.final_network;
            out["diverged"] = log.diverged;
            out["divergence_step"] = log.divergence_step;
            return out;
        },
        py::arg("config"), py::arg("X_train"), py::arg("y_train"), py::arg("X_test"),
        py::arg("y_test"), py::arg("k"));

    m.def(
        "run_command",
        [](const std::string& config_text, const std::string& command,
           std::optional<std::filesystem::path> out_dir, std::optional<std::uint64_t> seed) {
            CommandOptions opts{out_dir, seed};
            const ExperimentConfig cfg = apply_overrides(parse_config(config_text), opts);
            std::ostringstream log;
            int code;
            {
                py::gil_scoped_release release;
                code = run_command(cfg, command_from_string(command), opts, log);
            }
            return py::make_tuple(code, log.str());
        },
        py::arg("config_text"), py::arg("command"), py::arg("out_dir") = py::none(),
        py::arg("seed") = py::none(), "Runs a CLI command; returns (exit status, log text).");
    m.def("format_config", [](const std::string& text) { return format_config(parse_config(text)); },
          py::arg("config_text"), "Resolved configuration with every key.");
}
