#include "hsaw/check/reference_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace hsaw::check {

RefTensor widen(const nn::Tensor& t) {
    RefTensor r;
    r.shape = t.shape();
    r.v.assign(t.data(), t.data() + t.numel());
    return r;
}

static double at4(const RefTensor& t, int n, int c, int h, int w) {
    return t.v[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * t.dim(1) + c) * t.dim(2) + h) *
                                        t.dim(3) + w)];
}

RefTensor ref_conv2d(const RefTensor& in, const RefTensor& w, const RefTensor& bias,
                     int stride, int pad) {
    const int N = in.dim(0), Ci = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int Co = w.dim(0), K = w.dim(2);
    const int OH = (H + 2 * pad - K) / stride + 1;
    const int OW = (W + 2 * pad - K) / stride + 1;
    RefTensor out;
    out.shape = {N, Co, OH, OW};
    out.v.assign(static_cast<std::size_t>(N) * Co * OH * OW, 0.0);
    std::size_t idx = 0;
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow) {
                    double acc = bias.v.empty() ? 0.0 : bias.v[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < Ci; ++ci) {
                        for (int kh = 0; kh < K; ++kh) {
                            for (int kw = 0; kw < K; ++kw) {
                                const int ih = oh * stride - pad + kh;
                                const int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += at4(in, n, ci, ih, iw) * at4(w, co, ci, kh, kw);
                            }
                        }
                    }
                    out.v[idx++] = acc;
                }
            }
        }
    }
    return out;
}

RefTensor ref_deconv2d(const RefTensor& in, const RefTensor& w, const RefTensor& bias,
                       int stride, int pad) {
    // weight is Cin x Cout x k x k; direct scatter of each input pixel
    const int N = in.dim(0), Ci = in.dim(1), H = in.dim(2), W = in.dim(3);
    const int Co = w.dim(1), K = w.dim(2);
    const int OH = (H - 1) * stride - 2 * pad + K;
    const int OW = (W - 1) * stride - 2 * pad + K;
    RefTensor out;
    out.shape = {N, Co, OH, OW};
    out.v.assign(static_cast<std::size_t>(N) * Co * OH * OW, 0.0);
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            for (int ih = 0; ih < H; ++ih) {
                for (int iw = 0; iw < W; ++iw) {
                    for (int ci = 0; ci < Ci; ++ci) {
                        const double x = at4(in, n, ci, ih, iw);
                        for (int kh = 0; kh < K; ++kh) {
                            for (int kw = 0; kw < K; ++kw) {
                                const int oh = ih * stride - pad + kh;
                                const int ow = iw * stride - pad + kw;
                                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                                out.v[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * Co + co) * OH + oh) * OW + ow)] +=
                                    x * at4(w, ci, co, kh, kw);
                            }
                        }
                    }
                }
            }
        }
    }
    if (!bias.v.empty()) {
        std::size_t idx = 0;
        for (int n = 0; n < N; ++n) {
            for (int co = 0; co < Co; ++co) {
                for (int i = 0; i < OH * OW; ++i) out.v[idx++] += bias.v[static_cast<std::size_t>(co)];
            }
        }
    }
    return out;
}

RefTensor ref_leaky_relu(const RefTensor& x, double slope) {
    RefTensor out = x;
    for (double& v : out.v) v = v > 0.0 ? v : slope * v;
    return out;
}

RefTensor ref_sigmoid(const RefTensor& x) {
    RefTensor out = x;
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

RefTensor ref_tanh(const RefTensor& x) {
    RefTensor out = x;
    for (double& v : out.v) v = std::tanh(v);
    return out;
}

RefTensor ref_concat_channels(const RefTensor& a, const RefTensor& b) {
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    RefTensor out;
    out.shape = {N, Ca + Cb, H, W};
    out.v.resize(static_cast<std::size_t>(N) * (Ca + Cb) * H * W);
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        std::size_t dst = static_cast<std::size_t>(n) * (Ca + Cb) * hw;
        for (int c = 0; c < Ca; ++c, dst += hw) {
            std::copy_n(a.v.begin() + (static_cast<std::size_t>(n) * Ca + c) * hw, hw, out.v.begin() + dst);
        }
        for (int c = 0; c < Cb; ++c, dst += hw) {
            std::copy_n(b.v.begin() + (static_cast<std::size_t>(n) * Cb + c) * hw, hw, out.v.begin() + dst);
        }
    }
    return out;
}

RefTensor ref_instance_norm(const RefTensor& x, const RefTensor& gamma, const RefTensor& beta,
                            double eps) {
    const int N = x.dim(0), C = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    RefTensor out = x;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
            double mean = 0.0;
            for (std::size_t j = 0; j < hw; ++j) mean += x.v[off + j];
            mean /= static_cast<double>(hw);
            double var = 0.0;
            for (std::size_t j = 0; j < hw; ++j) {
                const double d = x.v[off + j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(hw);
            const double istd = 1.0 / std::sqrt(var + eps);
            for (std::size_t j = 0; j < hw; ++j) {
                out.v[off + j] = gamma.v[static_cast<std::size_t>(c)] * (x.v[off + j] - mean) * istd +
                                 beta.v[static_cast<std::size_t>(c)];
            }
        }
    }
    return out;
}

double ref_l1_loss(const RefTensor& a, const RefTensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) acc += std::abs(a.v[i] - b.v[i]);
    return acc / static_cast<double>(a.v.size());
}

double ref_bce_loss(const RefTensor& pred, const RefTensor& target) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        acc -= target.v[i] * std::log(pred.v[i]) + (1.0 - target.v[i]) * std::log(1.0 - pred.v[i]);
    }
    return acc / static_cast<double>(pred.v.size());
}

double ref_bce_with_logits_loss(const RefTensor& logits, const RefTensor& target) {
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        const double z = logits.v[i];
        acc += std::max(z, 0.0) - z * target.v[i] + std::log1p(std::exp(-std::abs(z)));
    }
    return acc / static_cast<double>(logits.v.size());
}

double ref_weighted_sum(const RefTensor& x, const RefTensor& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) acc += x.v[i] * w.v[i];
    return acc;
}

}  // namespace hsaw::check
