#ifndef SKOD_AUTODIFF_HPP
#define SKOD_AUTODIFF_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "skod/ash.hpp"
#include "skod/rng.hpp"
#include "skod/tensor.hpp"

namespace skod {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t index = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
};

// Dynamically recorded computation graph. Each forward op appends one node
// holding its value and a backward rule; backward() replays the rules in
// reverse. Single-threaded by contract.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;
        std::string op;
        std::function<void(Tape&, std::size_t)> backward;
    };

    Var leaf(Tensor value, std::string name = "leaf");

    // Runs reverse-mode accumulation from a scalar root. Gradients of every
    // node reachable from the root are populated; leaves keep theirs until
    // the next backward() call.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }
    Node& node(std::size_t i) { return nodes_[i]; }
    const Node& node(std::size_t i) const { return nodes_[i]; }

    Var push(Tensor value, std::string op,
             std::function<void(Tape&, std::size_t)> backward_fn);

    Tensor& grad_of(std::size_t i) { return nodes_[i].grad; }

private:
    std::vector<Node> nodes_;
};

// ---- elementwise / structural ops ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b); // elementwise
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var neg(Var a);
Var relu(Var a);
Var concat(Var a, Var b);                       // rank-1 only
Var slice(Var a, std::size_t offset, std::size_t len); // rank-1 only
Var sum(Var a);                                 // -> scalar
Var mean_of(const std::vector<Var>& scalars);   // -> scalar

// ---- linear algebra ----

// y = W x + b, with W (out x in), x (in), b (out).
Var linear(Var w, Var x, Var b);

// ---- backbone ops ----

// Multi-subset graph convolution on a (C_in, T, V) map:
//   out[o,t,j] = bias[o] + sum_g sum_i sum_c adj_g[i,j] * x[c,t,i] * theta_g[c,o]
// adjacency matrices are constants (no gradient), thetas and bias are
// differentiable.
Var graph_conv(Var x, const std::vector<Tensor>& adjacency,
               const std::vector<Var>& thetas, Var bias);

// Depthwise 1-D convolution along the frame axis of a (C, T, V) map with
// symmetric zero padding (kernel-1)/2 and the given stride.
// weight (C, K), bias (C); output frames = ceil(T / stride).
Var temporal_conv(Var x, Var weight, Var bias, std::size_t stride);

// Mean over frames and joints of a (C, T, V) map -> (C) vector.
Var global_pool(Var x);

// ---- heads and losses ----

// Activation shaping inside the graph. The pruning mask is recomputed each
// forward pass and treated as a constant by the backward rule.
Var ash_shape(Var f, const AshConfig& cfg);

// Inverted dropout: active only when training; evaluation is the identity.
Var dropout(Var x, double rate, Rng& rng, bool training);

// epsilon * log sum exp(x_i / epsilon) over a rank-1 input -> scalar.
Var logsumexp_op(Var x, double epsilon);

// -log softmax(logits)[target] -> scalar.
Var cross_entropy(Var logits, std::size_t target);

// max(0, x - margin)^2, elementwise (used on the scalar energy).
Var hinge_sq(Var x, double margin);

} // namespace skod

#endif
