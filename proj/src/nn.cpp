#include "gcnc/nn.hpp"

#include <algorithm>
#include <cmath>

#include "gcnc/errors.hpp"

namespace gcnc {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw ContractError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Subnet s) {
    return s == Subnet::embedding ? "embedding" : "logit";
}

Subnet subnet_from_string(std::string_view name) {
    if (name == "embedding") return Subnet::embedding;
    if (name == "logit") return Subnet::logit;
    throw ContractError("unknown subnet '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
    if (layer_widths.size() < 3)
        throw ContractError("layer_widths needs at least 3 entries (input, embedding, logits)");
    for (int w : layer_widths)
        if (w < 1) throw ContractError("layer widths must be positive");
}

// ---------------------------------------------------------------------------
// Parameters

Parameters Parameters::zeros(const NetworkSpec& spec) {
    spec.validate();
    Parameters p;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        p.weights.push_back(Matrix::Zero(spec.layer_widths[l + 1], spec.layer_widths[l]));
        p.biases.push_back(Vector::Zero(spec.layer_widths[l + 1]));
    }
    return p;
}

Parameters Parameters::zeros_like(const Parameters& other) {
    Parameters p;
    for (const auto& w : other.weights) p.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) p.biases.push_back(Vector::Zero(b.size()));
    return p;
}

std::size_t Parameters::size() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
}

double Parameters::dot(const Parameters& o) const {
    double s = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        s += weights[l].cwiseProduct(o.weights[l]).sum();
        s += biases[l].dot(o.biases[l]);
    }
    return s;
}

double Parameters::squared_norm() const { return dot(*this); }

bool Parameters::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : biases)
        if (!b.allFinite()) return false;
    return true;
}

bool Parameters::same_shape(const Parameters& o) const {
    if (weights.size() != o.weights.size() || biases.size() != o.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != o.weights[l].rows() || weights[l].cols() != o.weights[l].cols())
            return false;
        if (biases[l].size() != o.biases[l].size()) return false;
    }
    return true;
}

Vector Parameters::flatten() const {
    Vector flat(static_cast<Eigen::Index>(size()));
    Eigen::Index pos = 0;
    for (const auto& w : weights) {
        flat.segment(pos, w.size()) = w.reshaped();
        pos += w.size();
    }
    for (const auto& b : biases) {
        flat.segment(pos, b.size()) = b;
        pos += b.size();
    }
    return flat;
}

void Parameters::assign_flat(const Vector& flat) {
    if (flat.size() != static_cast<Eigen::Index>(size()))
        throw ContractError("flat parameter vector has wrong length");
    Eigen::Index pos = 0;
    for (auto& w : weights) {
        w.reshaped() = flat.segment(pos, w.size());
        pos += w.size();
    }
    for (auto& b : biases) {
        b = flat.segment(pos, b.size());
        pos += b.size();
    }
}

Parameters& Parameters::operator+=(const Parameters& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += o.weights[l];
        biases[l] += o.biases[l];
    }
    return *this;
}

Parameters& Parameters::operator-=(const Parameters& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] -= o.weights[l];
        biases[l] -= o.biases[l];
    }
    return *this;
}

Parameters& Parameters::operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
}

bool Parameters::operator==(const Parameters& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
    return true;
}

Parameters operator+(Parameters a, const Parameters& b) { return a += b; }
Parameters operator-(Parameters a, const Parameters& b) { return a -= b; }
Parameters operator*(Parameters a, double s) { return a *= s; }
Parameters operator*(double s, Parameters a) { return a *= s; }

void Network::validate() const {
    spec.validate();
    if (!params.same_shape(Parameters::zeros(spec)))
        throw ContractError("parameter shapes do not match the network spec");
    if (!params.all_finite()) throw ContractError("parameters contain non-finite entries");
}

// ---------------------------------------------------------------------------
// Initialization

Parameters init_params(const NetworkSpec& spec, std::uint64_t seed) {
    Parameters p = Parameters::zeros(spec);
    Rng rng(seed);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const double fan_in = spec.layer_widths[l];
        const double gain = spec.activation == Activation::relu ? 2.0 : 1.0;
        std::normal_distribution<double> normal(0.0, std::sqrt(gain / fan_in));
        Matrix& w = p.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = normal(rng);
    }
    return p;
}

Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
    return Network{spec, init_params(spec, seed)};
}

// ---------------------------------------------------------------------------
// Forward

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::identity: return z;
    }
    return z;
}

// First derivative given pre-activation z and post-activation h.
double activate_d1(Activation a, double z, double h) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - h * h;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

double activate_d2(Activation a, double h) {
    return a == Activation::tanh ? -2.0 * h * (1.0 - h * h) : 0.0;
}

Matrix apply_activation(Activation a, const Matrix& z) {
    return z.unaryExpr([a](double v) { return activate(a, v); });
}

Matrix activation_derivative(Activation a, const Matrix& z, const Matrix& h) {
    return z.binaryExpr(h, [a](double zv, double hv) { return activate_d1(a, zv, hv); });
}

void check_inputs(const Network& net, const Matrix& X) {
    if (X.cols() != net.spec.input_dim())
        throw ContractError("input has " + std::to_string(X.cols()) + " columns, network expects " +
                            std::to_string(net.spec.input_dim()));
    if (!X.allFinite()) throw ContractError("input contains non-finite entries");
}

Matrix affine(const Matrix& a, const Matrix& w, const Vector& b) {
    Matrix z = a * w.transpose();
    z.rowwise() += b.transpose();
    return z;
}

}  // namespace

ForwardTrace forward(const Network& net, const Matrix& X) {
    check_inputs(net, X);
    const std::size_t L = net.spec.num_layers();
    ForwardTrace tr;
    tr.inputs = X;
    tr.pre.reserve(L);
    tr.post.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& a = l == 0 ? tr.inputs : tr.post[l - 1];
        tr.pre.push_back(affine(a, net.params.weights[l], net.params.biases[l]));
        if (l + 1 < L)
            tr.post.push_back(apply_activation(net.spec.activation, tr.pre.back()));
        else
            tr.post.push_back(tr.pre.back());
    }
    return tr;
}

Matrix embed(const Network& net, const Matrix& X) {
    check_inputs(net, X);
    const std::size_t L = net.spec.num_layers();
    Matrix a = X;
    for (std::size_t l = 0; l + 1 < L; ++l)
        a = apply_activation(net.spec.activation,
                             affine(a, net.params.weights[l], net.params.biases[l]));
    return a;
}

Matrix logits(const Network& net, const Matrix& X) {
    const std::size_t L = net.spec.num_layers();
    return affine(embed(net, X), net.params.weights[L - 1], net.params.biases[L - 1]);
}

// ---------------------------------------------------------------------------
// Loss and parameter gradient

LossAndGrad loss_and_grad(const Network& net, const Matrix& X, std::span<const int> y) {
    const ForwardTrace tr = forward(net, X);
    const Matrix& z = tr.logits();
    const Eigen::Index batch = z.rows();
    const int k = net.spec.num_classes();
    if (static_cast<Eigen::Index>(y.size()) != batch)
        throw ContractError("label count does not match batch size");
    if (batch == 0) throw ContractError("empty batch");

    Matrix delta(batch, k);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const int label = y[static_cast<std::size_t>(i)];
        if (label < 0 || label >= k) throw ContractError("label out of range");
        const double zmax = z.row(i).maxCoeff();
        const auto shifted = (z.row(i).array() - zmax).exp();
        const double denom = shifted.sum();
        loss += std::log(denom) + zmax - z(i, label);
        delta.row(i) = shifted / denom;
        delta(i, label) -= 1.0;
    }
    loss /= static_cast<double>(batch);
    delta /= static_cast<double>(batch);

    LossAndGrad out{loss, Parameters::zeros_like(net.params)};
    const std::size_t L = net.spec.num_layers();
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& a_in = l == 0 ? tr.inputs : tr.post[l - 1];
        out.grads.weights[l].noalias() = delta.transpose() * a_in;
        out.grads.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Matrix back = delta * net.params.weights[l];
            delta = back.cwiseProduct(
                activation_derivative(net.spec.activation, tr.pre[l - 1], tr.post[l - 1]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Input Jacobians

InputJacobians input_jacobians(const Network& net, const Vector& x) {
    if (x.size() != net.spec.input_dim()) throw ContractError("input vector has wrong length");
    const std::size_t L = net.spec.num_layers();
    const Activation act = net.spec.activation;
    const auto& W = net.params.weights;
    const auto& b = net.params.biases;

    // Forward-mode accumulation: J_l = diag(s_l) W_l J_{l-1}, J_0 = I.
    Vector a = x;
    Matrix J;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const Vector z = W[l] * a + b[l];
        Vector s(z.size());
        a.resize(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            a(i) = activate(act, z(i));
            s(i) = activate_d1(act, z(i), a(i));
        }
        J =l == 0 ? Matrix(s.asDiagonal() * W[l]) : Matrix(s.asDiagonal() * (W[l] * J));
    }
    InputJacobians out;
    out.logit = W[L - 1] * J;
    out.embedding = std::move(J);
    return out;
}

Matrix input_jacobian(const Network& net, const Vector& x, Subnet subnet) {
    InputJacobians j = input_jacobians(net, x);
    return subnet == Subnet::embedding ? std::move(j.embedding) : std::move(j.logit);
}

// ---------------------------------------------------------------------------
// Gradient of the logit GC over parameters

Parameters gc_reg_grad(const Network& net, const Matrix& X) {
    check_inputs(net, X);
    if (X.rows() == 0) throw ContractError("empty batch");
    const std::size_t L = net.spec.num_layers();
    const std::size_t hidden = L - 1;
    const Activation act = net.spec.activation;
    const auto& W = net.params.weights;
    const auto& b = net.params.biases;

    Parameters grad = Parameters::zeros_like(net.params);

    std::vector<Vector> a_in(hidden), s1(hidden), s2(hidden);
    std::vector<Matrix> M(hidden), J(hidden);

    for (Eigen::Index row = 0; row < X.rows(); ++row) {
        Vector a = X.row(row).transpose();
        for (std::size_t l = 0; l < hidden; ++l) {
            a_in[l] = a;
            const Vector z = W[l] * a + b[l];
            a.resize(z.size());
            s1[l].resize(z.size());
            s2[l].resize(z.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                const double h = activate(act, z(i));
                a(i) = h;
                s1[l](i) = activate_d1(act, z(i), h);
                s2[l](i) = activate_d2(act, h);
            }
            M[l] = l == 0 ? W[0] : Matrix(W[l] * J[l - 1]);
            J[l] = s1[l].asDiagonal() * M[l];
        }

        // Reverse sweep over G = ||W_last J_{hidden-1}||_F^2.
        const Matrix& J_emb = J[hidden - 1];
        Matrix Jbar = 2.0 * (W[L - 1] * J_emb);
        grad.weights[L - 1].noalias() += Jbar * J_emb.transpose();
        Jbar = W[L - 1].transpose() * Jbar;
        Vector abar = Vector::Zero(J_emb.rows());

        for (std::size_t l = hidden; l-- > 0;) {
            const Vector sbar = Jbar.cwiseProduct(M[l]).rowwise().sum();
            const Matrix Mbar = s1[l].asDiagonal() * Jbar;
            const Vector zbar = abar.cwiseProduct(s1[l]) + sbar.cwiseProduct(s2[l]);
            if (l == 0)
                grad.weights[0] += Mbar;
            else
                grad.weights[l].noalias() += Mbar * J[l - 1].transpose();
            grad.weights[l].noalias() += zbar * a_in[l].transpose();
            grad.biases[l] += zbar;
            if (l > 0) {
                Jbar = W[l].transpose() * Mbar;
                abar = W[l].transpose() * zbar;
            }
        }
    }
    grad *= 1.0 / static_cast<double>(X.rows());
    return grad;
}

// ---------------------------------------------------------------------------
// Hessian-vector products

Parameters hvp(const GradientFn& grad, const Parameters& theta, const Parameters& v, double eps) {
    if (!(eps > 0.0)) throw ContractError("hvp step must be positive");
    Parameters plus = theta + v * eps;
    Parameters minus = theta - v * eps;
    Parameters out = grad(plus) - grad(minus);
    out *= 1.0 / (2.0 * eps);
    return out;
}

double default_hvp_eps(const Parameters& theta) {
    const double n = static_cast<double>(std::max<std::size_t>(theta.size(), 1));
    const double rms = std::sqrt(theta.squared_norm() / n);
    return 1e-4 * std::max(1.0, rms);
}

Parameters hvp(const Network& net, const Matrix& X, std::span<const int> y, const Parameters& v,
               double eps) {
    if (eps <= 0.0) eps = default_hvp_eps(net.params);
    const GradientFn grad = [&](const Parameters& theta) {
        Network probe{net.spec, theta};
        return loss_and_grad(probe, X, y).grads;
    };
    return hvp(grad, net.params, v, eps);
}

}  // namespace gcnc
