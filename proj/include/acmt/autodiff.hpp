#ifndef ACMT_AUTODIFF_HPP
#define ACMT_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "acmt/tensor.hpp"

namespace acmt::ad {

// Reverse-mode automatic differentiation over Tensors. Ops record a DAG of
// shared nodes; backward() runs the closures in reverse topological order.
// With grad mode disabled (NoGradGuard) ops compute values only, so frozen
// evaluation passes carry no tape.

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor& value() const { return n_->value; }
    Tensor& value() { return n_->value; }
    const Tensor& grad() const;
    bool requires_grad() const { return n_ && n_->requires_grad; }
    bool has_grad() const { return n_ && !n_->grad.empty(); }
    void zero_grad();

    // Leaf copy of the value; gradients do not flow past it.
    Var detach() const;

    std::shared_ptr<Node> node() const { return n_; }

private:
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}
    std::shared_ptr<Node> n_;
    friend Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn);
};

bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Accumulates gradients of `root` (a scalar) into every node that requires
// them. Leaf gradients persist until zero_grad().
void backward(const Var& root);

// --- elementwise / arithmetic ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var abs_val(const Var& a);
Var silu(const Var& a);
Var tanh_op(const Var& a);
Var mean_all(const Var& a);

// --- structure ---
Var concat_channels(const Var& a, const Var& b);
Var flatten_rows(const std::vector<Var>& rows);       // N tensors -> {N, D}
Var concat_cols(const Var& a, const Var& b);          // {N,Da}+{N,Db} -> {N,Da+Db}

// --- neural net building blocks ---
Var conv2d(const Var& x, const Var& w, const Var& b);  // stride 1, replicate pad
Var conv2d(const Var& x, const Var& w);
Var avgpool2(const Var& x);
Var upsample2(const Var& x);
Var linear(const Var& w, const Var& x, const Var& b);  // w {M,D}, x {D}, b {M}
Var film(const Var& x, const Var& scale_shift);        // x {C,H,W}, ss {2C}

// x {N,D} times a fixed projection {D,M}; no gradient for the projection.
Var project(const Var& x, const Tensor& p);

// Leave-one-out Gaussian kernel density entropy of row vectors {N,d} at
// fixed bandwidth h, evaluated with log-sum-exp for stability.
Var loo_kde_entropy(const Var& samples, double h);

// Same estimate with the median-heuristic bandwidth h = shrink * median
// pairwise distance. The backward pass also carries the bandwidth's
// dependence on the samples (through the median pair), so the gradient is
// the true gradient of the composite map.
Var loo_kde_entropy_mh(const Var& samples, double shrink);

// Median of pairwise Euclidean distances between rows of {N,d}.
double median_pairwise_distance(const Tensor& samples);

}  // namespace acmt::ad

#endif
