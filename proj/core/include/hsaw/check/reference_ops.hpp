#pragma once

// Double-precision reference implementations used as oracles by the gradient
// checker and the operator equivalence tests. Everything here is written as
// direct nested-loop summation, independent of the float32 engine and its
// im2col fast path.

#include <vector>

#include "hsaw/tensor.hpp"

namespace hsaw::check {

struct RefTensor {
    std::vector<int> shape;
    std::vector<double> v;

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
};

RefTensor widen(const nn::Tensor& t);

RefTensor ref_conv2d(const RefTensor& in, const RefTensor& w, const RefTensor& bias,
                     int stride, int pad);
RefTensor ref_deconv2d(const RefTensor& in, const RefTensor& w, const RefTensor& bias,
                       int stride, int pad);
RefTensor ref_leaky_relu(const RefTensor& x, double slope);
RefTensor ref_sigmoid(const RefTensor& x);
RefTensor ref_tanh(const RefTensor& x);
RefTensor ref_concat_channels(const RefTensor& a, const RefTensor& b);
RefTensor ref_instance_norm(const RefTensor& x, const RefTensor& gamma, const RefTensor& beta,
                            double eps);
double ref_l1_loss(const RefTensor& a, const RefTensor& b);
double ref_bce_loss(const RefTensor& pred, const RefTensor& target);
double ref_bce_with_logits_loss(const RefTensor& logits, const RefTensor& target);
double ref_weighted_sum(const RefTensor& x, const RefTensor& w);

}  // namespace hsaw::check
