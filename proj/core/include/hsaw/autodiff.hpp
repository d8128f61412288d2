#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hsaw/rng.hpp"
#include "hsaw/tensor.hpp"

namespace hsaw::nn {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    bool grad_set = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pushes this->grad into parents
    const char* op = "leaf";

    void ensure_grad();
    void accumulate(const float* g, std::int64_t n);
};

}  // namespace detail

// Handle to one node of the dynamically built computation graph. Ops create
// fresh nodes each forward pass (tape style); the subgraph stays alive while
// any Var still points into it.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor& value() const;
    Tensor& value();
    bool requires_grad() const;
    bool has_grad() const;
    const Tensor& grad() const;  // throws when no grad has been produced
    void zero_grad();

    const std::shared_ptr<detail::Node>& node() const { return n_; }
    static Var wrap(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> n_;
};

// Named trainable leaf. Networks own their Parameters; the same node is spliced
// into every tape built from it, so backward() accumulates into a persistent
// grad buffer that adam_step later consumes and clears.
class Parameter {
public:
    Parameter(std::string name, Tensor init);

    const std::string& name() const { return name_; }
    Var& var() { return v_; }
    const Var& var() const { return v_; }
    Tensor& value() { return v_.value(); }
    const Tensor& value() const { return v_.value(); }
    bool has_grad() const { return v_.has_grad(); }
    const Tensor& grad() const { return v_.grad(); }
    void zero_grad() { v_.zero_grad(); }

private:
    std::string name_;
    Var v_;
};

// ---- differentiable ops ----------------------------------------------------

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad);
Var deconv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad);

Var leaky_relu(const Var& x, float negative_slope);
Var sigmoid(const Var& x);
Var tanh_act(const Var& x);
Var concat_channels(const Var& a, const Var& b);
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);

// losses reduce by mean (64-bit accumulation)
Var l1_loss(const Var& a, const Var& b);
Var bce_loss(const Var& pred, const Var& target);          // pred strictly inside (0,1)
Var bce_with_logits_loss(const Var& logits, const Var& target);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, float k);
Var weighted_sum(const Var& x, const Tensor& weights);  // scalar head

// Reverse-mode sweep from a scalar loss. Deterministic: fixed topological
// order, fixed accumulation order.
void backward(const Var& loss);

// Shape helpers shared with the networks
int conv_out_dim(int in, int k, int stride, int pad);
int deconv_out_dim(int in, int k, int stride, int pad);

// uniform(-s, s) with s = sqrt(1 / (cin * k * k)); the project-wide init rule
Tensor conv_weight_init(int cout, int cin, int k, SplitMix64& rng);

}  // namespace hsaw::nn
