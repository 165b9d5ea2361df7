#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mmsr/tensor.hpp"

namespace mmsr::ag {

// Define-by-run reverse-mode autodiff. Each op builds a Node whose
// backprop closure scatters the node's gradient into its parents.
// Graphs are acyclic and freed when the root Var goes out of scope.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;                 // allocated on first accumulation
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void()> backprop;

    void accum_grad(const Tensor& g);
    void zero_grad() { grad = Tensor(); }
    bool has_grad() const { return !grad.data.empty(); }
};

Var leaf(Tensor value, bool requires_grad);
Var constant(Tensor value);

// Runs reverse-mode accumulation from a scalar root (shape {1}).
void backward(const Var& root);

// Leaf copy of v's value; gradients do not flow past it.
Var detach(const Var& v);

// elementwise, same shape
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var scalar_sub(double s, const Var& a);   // s - a

Var abs(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh(const Var& a);

Var mean_all(const Var& a);               // -> {1}

// x {C,H,W}, w {F,C,k,k}, b {F}; zero padding
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// per-channel normalization with learned affine, x {C,H,W}
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// {C*r*r,H,W} -> {C,rH,rW}
Var pixel_shuffle(const Var& x, int r);

// {C,H,W} -> {C,kH,kW}, nearest neighbor
Var nn_upsample(const Var& x, int k);

// {C,H,W} -> {C,H/k,W/k}, block mean; dims must divide
Var avg_pool(const Var& x, int k);

} // namespace mmsr::ag
