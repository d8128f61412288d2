#pragma once

// Raw convolution kernels shared by the autodiff nodes. conv2d and deconv2d
// are adjoint views of the same three maps:
//   forward       O[n,co,oh,ow] = sum_{ci,kh,kw} I[n,ci,oh*s-p+kh,ow*s-p+kw] * W[co,ci,kh,kw]
//   grad_input    adjoint of forward w.r.t. I
//   grad_weight   adjoint of forward w.r.t. W
// deconv2d runs grad_input as its forward pass (weight laid out Cin x Cout x k x k).

namespace hsaw::nn::detail {

struct ConvDims {
    int n, cin, h, w;   // input
    int cout, k;        // weight
    int stride, pad;
    int oh, ow;         // output spatial dims
};

void conv_forward(const ConvDims& d, const float* in, const float* weight,
                  const float* bias, float* out);

// dIn += adjoint(dOut); caller passes a zeroed or accumulating buffer
void conv_grad_input(const ConvDims& d, const float* dout, const float* weight, float* din);

// dW += from (in, dOut); dBias += channel sums of dOut (dbias may be null)
void conv_grad_weight(const ConvDims& d, const float* in, const float* dout,
                      float* dweight, float* dbias);

}  // namespace hsaw::nn::detail
