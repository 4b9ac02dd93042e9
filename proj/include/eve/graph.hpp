#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eve/tensor.hpp"

namespace eve {

// Reverse-mode tape over the loss vocabulary used by the model: affine
// maps, elementwise exp/log/square/abs, clamp-at-zero, reductions, and the
// two structured ops (per-neuron affine head, normalized readout). Nodes
// are created in evaluation order, so reverse creation order is a valid
// topological order for backprop.
//
// Every op checks its output for NaN/Inf and throws naming the op, per the
// kernel contract. Subgradient at hinge/clamp kinks is 0.
using VarId = int;

class Graph {
public:
    // Leaves.
    VarId input(Tensor t);     // differentiable leaf (parameter)
    VarId constant(Tensor t);  // non-differentiable leaf (data, noise)

    // Elementwise arithmetic (matching shapes).
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);

    // Scalar-broadcast helpers.
    VarId scale(VarId a, double c);       // c * a
    VarId add_scalar(VarId a, double c);  // a + c

    // Elementwise functions.
    VarId exp(VarId a);
    VarId log(VarId a);
    VarId square(VarId a);
    VarId abs(VarId a);
    VarId clamp_min(VarId a, double c);  // max(a, c); grad 0 at/below c

    // Reductions to scalar.
    VarId sum(VarId a);
    VarId mean(VarId a);

    // (B,N,k) -> (N): sum over latent dims, mean over batch rows.
    VarId reduce_neuron(VarId a);

    // Per-neuron affine heads: A (N,k,d), b (N,k), h (B,d) -> (B,N,k) with
    // out[b,i,r] = sum_d A[i,r,d] h[b,d] + b[i,r].
    VarId neuron_affine(VarId a_mat, VarId bias, VarId h);

    // Normalized linear readout: m (B,M), w (M), b0 scalar -> (B) with
    // y[b] = (w . m[b]) / sqrt(n_neurons) + b0.
    VarId readout(VarId m, VarId w, VarId b0, std::size_t n_neurons);

    VarId reshape(VarId a, std::vector<std::size_t> shape);

    // Mean squared error against a (constant or variable) target.
    VarId mse(VarId pred, VarId target);

    void backward(VarId loss);  // loss must be scalar

    const Tensor& value(VarId v) const { return nodes_[v].value; }
    const Tensor& grad(VarId v) const;
    double scalar(VarId v) const { return nodes_[v].value.item(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily during backward
        bool requires_grad = false;
        const char* op = "leaf";
        std::function<void(Graph&)> back;  // accumulates into parents' grads
    };

    VarId emit(Tensor value, bool requires_grad, const char* op,
               std::function<void(Graph&)> back);
    Tensor& grad_buf(VarId v);
    bool wants_grad(VarId v) const { return nodes_[v].requires_grad; }

    std::vector<Node> nodes_;
};

// Analytic gradients of a scalar loss w.r.t. every parameter tensor. The
// builder constructs the loss on the given graph from the declared
// parameter leaves.
using LossBuilder =
    std::function<VarId(Graph&, const std::vector<VarId>&)>;

std::vector<Tensor> grad(const LossBuilder& build,
                         const std::vector<Tensor>& params);

double eval_loss(const LossBuilder& build, const std::vector<Tensor>& params);

// Central-difference oracle, (f(x+e h) - f(x-e h)) / 2h per coordinate.
std::vector<Tensor> fd_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> params, double step);

std::vector<Tensor> fd_gradient(const LossBuilder& build,
                                const std::vector<Tensor>& params,
                                double step);

}  // namespace eve
