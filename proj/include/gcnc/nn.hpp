#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcnc/linalg.hpp"

namespace gcnc {

/// Hidden-layer nonlinearity. `identity` gives a purely linear network and
/// exists for exact-Jacobian checks; experiments use relu or tanh.
enum class Activation { relu, tanh, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Which sub-network a Jacobian or GC is taken of: the feature map f
/// (input -> embedding) or the full logit map g(f(x)).
enum class Subnet { embedding, logit };

std::string_view to_string(Subnet s);
Subnet subnet_from_string(std::string_view name);

/// Layer widths [d, h_1, ..., p, k]. The last hidden width p is the
/// embedding; the final layer is linear and produces k logits.
struct NetworkSpec {
    std::vector<int> layer_widths;
    Activation activation = Activation::relu;

    /// Throws ContractError unless there are >= 3 widths, all positive.
    void validate() const;

    int input_dim() const { return layer_widths.front(); }
    int embedding_dim() const { return layer_widths[layer_widths.size() - 2]; }
    int num_classes() const { return layer_widths.back(); }
    std::size_t num_layers() const { return layer_widths.size() - 1; }

    bool operator==(const NetworkSpec&) const = default;
};

/// Weights (out x in) and biases for every layer. Also used as the
/// container for gradients and Hessian-vector products.
struct Parameters {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static Parameters zeros(const NetworkSpec& spec);
    static Parameters zeros_like(const Parameters& other);

    std::size_t size() const;
    double dot(const Parameters& other) const;
    double squared_norm() const;
    bool all_finite() const;
    bool same_shape(const Parameters& other) const;

    /// Concatenation of all weights (column-major) then biases, layer by layer.
    Vector flatten() const;
    void assign_flat(const Vector& flat);

    Parameters& operator+=(const Parameters& o);
    Parameters& operator-=(const Parameters& o);
    Parameters& operator*=(double s);

    bool operator==(const Parameters& o) const;
};

Parameters operator+(Parameters a, const Parameters& b);
Parameters operator-(Parameters a, const Parameters& b);
Parameters operator*(Parameters a, double s);
Parameters operator*(double s, Parameters a);

struct Network {
    NetworkSpec spec;
    Parameters params;

    /// Checks that params match spec and are finite.
    void validate() const;
};

/// He (relu) or LeCun (tanh, identity) normal weights, zero biases.
Parameters init_params(const NetworkSpec& spec, std::uint64_t seed);
Network init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Layer-by-layer record of one forward pass. `pre[l]` and `post[l]` are
/// batch x width_{l+1}; the last layer has no activation, so its post
/// equals its pre (the logits).
struct ForwardTrace {
    Matrix inputs;
    std::vector<Matrix> pre;
    std::vector<Matrix> post;

    const Matrix& embedding() const { return post[post.size() - 2]; }
    const Matrix& logits() const { return post.back(); }
};

ForwardTrace forward(const Network& net, const Matrix& X);

/// Embedding rows f(X) only; same values as forward(net, X).embedding().
Matrix embed(const Network& net, const Matrix& X);
Matrix logits(const Network& net, const Matrix& X);

struct LossAndGrad {
    double loss = 0.0;
    Parameters grads;
};

/// Mean softmax cross-entropy and its exact gradient.
LossAndGrad loss_and_grad(const Network& net, const Matrix& X, std::span<const int> y);

/// Jacobian of the selected sub-network at x: p x d or k x d.
Matrix input_jacobian(const Network& net, const Vector& x, Subnet subnet);

/// Both Jacobians from a single pass, since the logit Jacobian is
/// W_last times the embedding Jacobian.
struct InputJacobians {
    Matrix embedding;
    Matrix logit;
};
InputJacobians input_jacobians(const Network& net, const Vector& x);

/// Gradient over parameters of (1/|X|) sum_x ||d/dx g(f(x))||_F^2.
Parameters gc_reg_grad(const Network& net, const Matrix& X);

using GradientFn = std::function<Parameters(const Parameters&)>;

/// (grad(theta + eps v) - grad(theta - eps v)) / (2 eps).
Parameters hvp(const GradientFn& grad, const Parameters& theta, const Parameters& v, double eps);

/// Hessian-vector product of the cross-entropy loss on (X, y).
/// eps <= 0 selects the default step, 1e-4 times the parameter RMS (at least 1e-4).
Parameters hvp(const Network& net, const Matrix& X, std::span<const int> y, const Parameters& v,
               double eps = 0.0);

double default_hvp_eps(const Parameters& theta);

}  // namespace gcnc
