#include "hsaw/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "conv_kernels.hpp"

namespace hsaw::nn {

using detail::Node;

void Node::ensure_grad() {
    if (!grad_set) {
        grad = Tensor(value.shape());
        grad_set = true;
    }
}

void Node::accumulate(const float* g, std::int64_t n) {
    ensure_grad();
    float* dst = grad.data();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += g[i];
}

Var::Var(Tensor value, bool requires_grad) : n_(std::make_shared<Node>()) {
    n_->value = std::move(value);
    n_->requires_grad = requires_grad;
}

Var Var::wrap(std::shared_ptr<Node> n) {
    Var v;
    v.n_ = std::move(n);
    return v;
}

static Node& deref(const std::shared_ptr<Node>& n, const char* who) {
    if (!n) throw std::invalid_argument(std::string(who) + ": undefined Var");
    return *n;
}

const Tensor& Var::value() const { return deref(n_, "Var::value").value; }
Tensor& Var::value() { return deref(n_, "Var::value").value; }
bool Var::requires_grad() const { return deref(n_, "Var::requires_grad").requires_grad; }
bool Var::has_grad() const { return n_ && n_->grad_set; }

const Tensor& Var::grad() const {
    Node& n = deref(n_, "Var::grad");
    if (!n.grad_set) throw std::logic_error("Var::grad: no gradient present (run backward first)");
    return n.grad;
}

void Var::zero_grad() {
    Node& n = deref(n_, "Var::zero_grad");
    n.grad = Tensor();
    n.grad_set = false;
}

Parameter::Parameter(std::string name, Tensor init) : name_(std::move(name)), v_(std::move(init), true) {
    if (name_.empty()) throw std::invalid_argument("parameter name must be non-empty");
}

// ---- graph assembly ---------------------------------------------------------

namespace {

std::shared_ptr<Node> make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                                const char* op) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool req = false;
    for (const auto& p : parents) req = req || (p && p->requires_grad);
    n->requires_grad = req;
    if (req) n->parents = std::move(parents);
    return n;
}

void require_defined(const Var& v, const char* who) {
    if (!v.defined()) throw std::invalid_argument(std::string(who) + ": undefined Var operand");
}

[[noreturn]] void shape_error(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

int deconv_out_dim(int in, int k, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + k;
}

Tensor conv_weight_init(int cout, int cin, int k, SplitMix64& rng) {
    Tensor w({cout, cin, k, k});
    const float s = std::sqrt(1.0f / (static_cast<float>(cin) * k * k));
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-s, s);
    return w;
}

// ---- conv2d / deconv2d ------------------------------------------------------

namespace {

detail::ConvDims conv_dims_checked(const Tensor& in, const Tensor& w, int stride, int pad,
                                   const char* who) {
    if (in.ndim() != 4) shape_error(std::string(who) + ": input must be 4-d N,C,H,W, got " + in.shape_str());
    if (w.ndim() != 4) shape_error(std::string(who) + ": weight must be 4-d, got " + w.shape_str());
    if (w.dim(2) != w.dim(3)) shape_error(std::string(who) + ": kernel must be square, got " + w.shape_str());
    if (stride < 1) shape_error(std::string(who) + ": stride must be >= 1, got " + std::to_string(stride));
    if (pad < 0) shape_error(std::string(who) + ": pad must be >= 0, got " + std::to_string(pad));
    detail::ConvDims d;
    d.n = in.dim(0);
    d.k = w.dim(2);
    d.stride = stride;
    d.pad = pad;
    return d;
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad) {
    require_defined(input, "conv2d");
    require_defined(weight, "conv2d");
    require_defined(bias, "conv2d");
    const Tensor& in = input.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();

    detail::ConvDims d = conv_dims_checked(in, w, stride, pad, "conv2d");
    d.cin = in.dim(1);
    d.cout = w.dim(0);
    d.h = in.dim(2);
    d.w = in.dim(3);
    if (w.dim(1) != d.cin) {
        shape_error("conv2d: input has " + std::to_string(d.cin) + " channels but weight expects " +
                    std::to_string(w.dim(1)) + " (input " + in.shape_str() + ", weight " + w.shape_str() + ")");
    }
    if (b.numel() != d.cout) {
        shape_error("conv2d: bias length " + std::to_string(b.numel()) + " does not match " +
                    std::to_string(d.cout) + " output channels");
    }
    d.oh = conv_out_dim(d.h, d.k, stride, pad);
    d.ow = conv_out_dim(d.w, d.k, stride, pad);
    if (d.oh < 1 || d.ow < 1) {
        shape_error("conv2d: kernel " + std::to_string(d.k) + " with stride " + std::to_string(stride) +
                    ", pad " + std::to_string(pad) + " does not fit input " + in.shape_str());
    }

    Tensor out({d.n, d.cout, d.oh, d.ow});
    detail::conv_forward(d, in.data(), w.data(), b.data(), out.data());

    auto node = make_node(std::move(out), {input.node(), weight.node(), bias.node()}, "conv2d");
    if (node->requires_grad) {
        node->backprop = [d](Node& self) {
            auto& pin = self.parents[0];
            auto& pw = self.parents[1];
            auto& pb = self.parents[2];
            const float* dout = self.grad.data();
            if (pin->requires_grad) {
                pin->ensure_grad();
                detail::conv_grad_input(d, dout, pw->value.data(), pin->grad.data());
            }
            if (pw->requires_grad || pb->requires_grad) {
                pw->ensure_grad();
                pb->ensure_grad();
                detail::conv_grad_weight(d, pin->value.data(), dout, pw->grad.data(), pb->grad.data());
            }
        };
    }
    return Var::wrap(node);
}

Var deconv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad) {
    require_defined(input, "deconv2d");
    require_defined(weight, "deconv2d");
    require_defined(bias, "deconv2d");
    const Tensor& in = input.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();

    // weight is Cin x Cout x k x k; forward runs the conv grad_input map
    detail::ConvDims d = conv_dims_checked(in, w, stride, pad, "deconv2d");
    d.cout = in.dim(1);  // conv-role output channels = deconv input channels
    if (w.dim(0) != d.cout) {
        shape_error("deconv2d: input has " + std::to_string(d.cout) + " channels but weight expects " +
                    std::to_string(w.dim(0)) + " (input " + in.shape_str() + ", weight " + w.shape_str() + ")");
    }
    d.cin = w.dim(1);  // conv-role input channels = deconv output channels
    d.oh = in.dim(2);
    d.ow = in.dim(3);
    d.h = deconv_out_dim(d.oh, d.k, stride, pad);
    d.w = deconv_out_dim(d.ow, d.k, stride, pad);
    if (d.h < 1 || d.w < 1) {
        shape_error("deconv2d: kernel " + std::to_string(d.k) + " with stride " + std::to_string(stride) +
                    ", pad " + std::to_string(pad) + " yields empty output for input " + in.shape_str());
    }
    if (b.numel() != d.cin) {
        shape_error("deconv2d: bias length " + std::to_string(b.numel()) + " does not match " +
                    std::to_string(d.cin) + " output channels");
    }

    Tensor out({d.n, d.cin, d.h, d.w});
    detail::conv_grad_input(d, in.data(), w.data(), out.data());
    // broadcast bias over each output channel plane
    {
        const int hw = d.h * d.w;
        float* p = out.data();
        for (int n = 0; n < d.n; ++n) {
            for (int c = 0; c < d.cin; ++c) {
                const float bv = b[c];
                for (int i = 0; i < hw; ++i) p[i] += bv;
                p += hw;
            }
        }
    }

    auto node = make_node(std::move(out), {input.node(), weight.node(), bias.node()}, "deconv2d");
    if (node->requires_grad) {
        auto dims = d;
        node->backprop = [dims](Node& self) {
            auto& pin = self.parents[0];
            auto& pw = self.parents[1];
            auto& pb = self.parents[2];
            const float* dout = self.grad.data();
            if (pin->requires_grad) {
                pin->ensure_grad();
                // conv_forward overwrites its destination, so stage into scratch
                Tensor scratch(pin->value.shape());
                detail::conv_forward(dims, dout, pw->value.data(), nullptr, scratch.data());
                pin->accumulate(scratch.data(), scratch.numel());
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                detail::conv_grad_weight(dims, dout, pin->value.data(), pw->grad.data(), nullptr);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                const int hw = dims.h * dims.w;
                const float* g = dout;
                for (int n = 0; n < dims.n; ++n) {
                    for (int c = 0; c < dims.cin; ++c) {
                        float acc = 0.0f;
                        for (int i = 0; i < hw; ++i) acc += g[i];
                        pb->grad[c] += acc;
                        g += hw;
                    }
                }
            }
        };
    }
    return Var::wrap(node);
}

// ---- pointwise ops ----------------------------------------------------------

Var leaky_relu(const Var& x, float negative_slope) {
    require_defined(x, "leaky_relu");
    const Tensor& in = x.value();
    Tensor out(in.shape());
    for (std::int64_t i = 0; i < in.numel(); ++i) {
        const float v = in[i];
        out[i] = v > 0.0f ? v : negative_slope * v;
    }
    auto node = make_node(std::move(out), {x.node()}, "leaky_relu");
    if (node->requires_grad) {
        node->backprop = [negative_slope](Node& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            const std::int64_t n = self.value.numel();
            for (std::int64_t i = 0; i < n; ++i) {
                const float v = p->value[i];
                p->grad[i] += self.grad[i] * (v > 0.0f ? 1.0f : negative_slope);
            }
        };
    }
    return Var::wrap(node);
}

Var sigmoid(const Var& x) {
    require_defined(x, "sigmoid");
    const Tensor& in = x.value();
    Tensor out(in.shape());
    for (std::int64_t i = 0; i < in.numel(); ++i) {
        const float v = in[i];
        if (v >= 0.0f) {
            out[i] = 1.0f / (1.0f + std::exp(-v));
        } else {
            const float e = std::exp(v);
            out[i] = e / (1.0f + e);
        }
    }
    auto node = make_node(std::move(out), {x.node()}, "sigmoid");
    if (node->requires_grad) {
        node->backprop = [](Node& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            const std::int64_t n = self.value.numel();
            for (std::int64_t i = 0; i < n; ++i) {
                const float y = self.value[i];
                p->grad[i] += self.grad[i] * y * (1.0f - y);
            }
        };
    }
    return Var::wrap(node);
}

Var tanh_act(const Var& x) {
    require_defined(x, "tanh_act");
    const Tensor& in = x.value();
    Tensor out(in.shape());
    for (std::int64_t i = 0; i < in.numel(); ++i) out[i] = std::tanh(in[i]);
    auto node = make_node(std::move(out), {x.node()}, "tanh");
    if (node->requires_grad) {
        node->backprop = [](Node& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            const std::int64_t n = self.value.numel();
            for (std::int64_t i = 0; i < n; ++i) {
                const float y = self.value[i];
                p->grad[i] += self.grad[i] * (1.0f - y * y);
            }
        };
    }
    return Var::wrap(node);
}

Var concat_channels(const Var& a, const Var& b) {
    require_defined(a, "concat_channels");
    require_defined(b, "concat_channels");
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    if (ta.ndim() != 4 || tb.ndim() != 4) {
        shape_error("concat_channels: operands must be 4-d, got " + ta.shape_str() + " and " + tb.shape_str());
    }
    if (ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) || ta.dim(3) != tb.dim(3)) {
        shape_error("concat_channels: N,H,W must match, got " + ta.shape_str() + " vs " + tb.shape_str());
    }
    const int n = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1), hw = ta.dim(2) * ta.dim(3);
    Tensor out({n, ca + cb, ta.dim(2), ta.dim(3)});
    for (int i = 0; i < n; ++i) {
        const std::size_t oa = static_cast<std::size_t>(i) * (ca + cb) * hw;
        std::copy_n(ta.data() + static_cast<std::size_t>(i) * ca * hw, static_cast<std::size_t>(ca) * hw,
                    out.data() + oa);
        std::copy_n(tb.data() + static_cast<std::size_t>(i) * cb * hw, static_cast<std::size_t>(cb) * hw,
                    out.data() + oa + static_cast<std::size_t>(ca) * hw);
    }
    auto node = make_node(std::move(out), {a.node(), b.node()}, "concat_channels");
    if (node->requires_grad) {
        node->backprop = [n, ca, cb, hw](Node& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            for (int i = 0; i < n; ++i) {
                const float* g = self.grad.data() + static_cast<std::size_t>(i) * (ca + cb) * hw;
                if (pa->requires_grad) {
                    pa->ensure_grad();
                    float* da = pa->grad.data() + static_cast<std::size_t>(i) * ca * hw;
                    for (int j = 0; j < ca * hw; ++j) da[j] += g[j];
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    float* db = pb->grad.data() + static_cast<std::size_t>(i) * cb * hw;
                    for (int j = 0; j < cb * hw; ++j) db[j] += g[ca * hw + j];
                }
            }
        };
    }
    return Var::wrap(node);
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
    require_defined(x, "instance_norm");
    require_defined(gamma, "instance_norm");
    require_defined(beta, "instance_norm");
    const Tensor& in = x.value();
    if (in.ndim() != 4) shape_error("instance_norm: input must be 4-d, got " + in.shape_str());
    const int n = in.dim(0), c = in.dim(1), hw = in.dim(2) * in.dim(3);
    if (gamma.value().numel() != c || beta.value().numel() != c) {
        shape_error("instance_norm: gamma/beta length must equal " + std::to_string(c) + " channels");
    }
    if (hw < 2) shape_error("instance_norm: needs at least 2 spatial elements per channel");

    Tensor out(in.shape());
    Tensor xhat(in.shape());
    Tensor inv_std({n, c, 1, 1});
    const float* g = gamma.value().data();
    const float* bt = beta.value().data();
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float* src = in.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
            double mean = 0.0;
            for (int j = 0; j < hw; ++j) mean += src[j];
            mean /= hw;
            double var = 0.0;
            for (int j = 0; j < hw; ++j) {
                const double d = src[j] - mean;
                var += d * d;
            }
            var /= hw;
            const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
            inv_std.at(i, ch, 0, 0) = istd;
            float* xh = xhat.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
            float* dst = out.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
            const float mu = static_cast<float>(mean);
            for (int j = 0; j < hw; ++j) {
                xh[j] = (src[j] - mu) * istd;
                dst[j] = g[ch] * xh[j] + bt[ch];
            }
        }
    }

    auto node = make_node(std::move(out), {x.node(), gamma.node(), beta.node()}, "instance_norm");
    if (node->requires_grad) {
        node->backprop = [n, c, hw, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
            auto& px = self.parents[0];
            auto& pg = self.parents[1];
            auto& pb = self.parents[2];
            const float* gamma_v = pg->value.data();
            if (pg->requires_grad) pg->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            if (px->requires_grad) px->ensure_grad();
            for (int i = 0; i < n; ++i) {
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * hw;
                    const float* dy = self.grad.data() + off;
                    const float* xh = xhat.data() + off;
                    double sum_dy = 0.0, sum_dy_xh = 0.0;
                    for (int j = 0; j < hw; ++j) {
                        sum_dy += dy[j];
                        sum_dy_xh += static_cast<double>(dy[j]) * xh[j];
                    }
                    if (pg->requires_grad) pg->grad[ch] += static_cast<float>(sum_dy_xh);
                    if (pb->requires_grad) pb->grad[ch] += static_cast<float>(sum_dy);
                    if (px->requires_grad) {
                        const float istd = inv_std.at(i, ch, 0, 0);
                        const float k = gamma_v[ch] * istd;
                        const float mean_dy = static_cast<float>(sum_dy / hw);
                        const float mean_dy_xh = static_cast<float>(sum_dy_xh / hw);
                        float* dx = px->grad.data() + off;
                        for (int j = 0; j < hw; ++j) {
                            dx[j] += k * (dy[j] - mean_dy - xh[j] * mean_dy_xh);
                        }
                    }
                }
            }
        };
    }
    return Var::wrap(node);
}

// ---- losses -----------------------------------------------------------------

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b)) {
        shape_error(std::string(who) + ": operand shapes differ, " + a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace

Var l1_loss(const Var& a, const Var& b) {
    require_defined(a, "l1_loss");
    require_defined(b, "l1_loss");
    require_same_shape(a.value(), b.value(), "l1_loss");
    const std::int64_t n = a.value().numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(a.value()[i]) - b.value()[i]);
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    auto node = make_node(std::move(out), {a.node(), b.node()}, "l1_loss");
    if (node->requires_grad) {
        node->backprop = [n](Node& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            const float g = self.grad[0] / static_cast<float>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const float d = pa->value[i] - pb->value[i];
                const float s = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
                if (pa->requires_grad) {
                    pa->ensure_grad();
                    pa->grad[i] += s;
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    pb->grad[i] -= s;
                }
            }
        };
    }
    return Var::wrap(node);
}

Var bce_loss(const Var& pred, const Var& target) {
    require_defined(pred, "bce_loss");
    require_defined(target, "bce_loss");
    require_same_shape(pred.value(), target.value(), "bce_loss");
    const std::int64_t n = pred.value().numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double p = pred.value()[i];
        const double t = target.value()[i];
        if (!(p > 0.0 && p < 1.0)) {
            throw std::invalid_argument("bce_loss: prediction " + std::to_string(p) +
                                        " at index " + std::to_string(i) + " is outside (0,1)");
        }
        if (!(t >= 0.0 && t <= 1.0)) {
            throw std::invalid_argument("bce_loss: target " + std::to_string(t) +
                                        " at index " + std::to_string(i) + " is outside [0,1]");
        }
        acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    auto node = make_node(std::move(out), {pred.node(), target.node()}, "bce_loss");
    if (node->requires_grad) {
        node->backprop = [n](Node& self) {
            auto& pp = self.parents[0];
            auto& pt = self.parents[1];
            const float g = self.grad[0] / static_cast<float>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const float p = pp->value[i];
                const float t = pt->value[i];
                if (pp->requires_grad) {
                    pp->ensure_grad();
                    pp->grad[i] += g * (p - t) / (p * (1.0f - p));
                }
                if (pt->requires_grad) {
                    pt->ensure_grad();
                    pt->grad[i] += g * (std::log(1.0f - p) - std::log(p));
                }
            }
        };
    }
    return Var::wrap(node);
}

Var bce_with_logits_loss(const Var& logits, const Var& target) {
    require_defined(logits, "bce_with_logits_loss");
    require_defined(target, "bce_with_logits_loss");
    require_same_shape(logits.value(), target.value(), "bce_with_logits_loss");
    const std::int64_t n = logits.value().numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double z = logits.value()[i];
        const double t = target.value()[i];
        acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc / static_cast<double>(n)));
    auto node = make_node(std::move(out), {logits.node(), target.node()}, "bce_with_logits_loss");
    if (node->requires_grad) {
        node->backprop = [n](Node& self) {
            auto& pz = self.parents[0];
            auto& pt = self.parents[1];
            const float g = self.grad[0] / static_cast<float>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const float z = pz->value[i];
                float sz;
                if (z >= 0.0f) {
                    sz = 1.0f / (1.0f + std::exp(-z));
                } else {
                    const float e = std::exp(z);
                    sz = e / (1.0f + e);
                }
                if (pz->requires_grad) {
                    pz->ensure_grad();
                    pz->grad[i] += g * (sz - pt->value[i]);
                }
                if (pt->requires_grad) {
                    pt->ensure_grad();
                    pt->grad[i] -= g * z;
                }
            }
        };
    }
    return Var::wrap(node);
}

Var add(const Var& a, const Var& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    require_same_shape(a.value(), b.value(), "add");
    const std::int64_t n = a.value().numel();
    Tensor out(a.value().shape());
    for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
    auto node = make_node(std::move(out), {a.node(), b.node()}, "add");
    if (node->requires_grad) {
        node->backprop = [n](Node& self) {
            for (auto& p : self.parents) {
                if (p->requires_grad) p->accumulate(self.grad.data(), n);
            }
        };
    }
    return Var::wrap(node);
}

Var scale(const Var& x, float k) {
    require_defined(x, "scale");
    const std::int64_t n = x.value().numel();
    Tensor out(x.value().shape());
    for (std::int64_t i = 0; i < n; ++i) out[i] = k * x.value()[i];
    auto node = make_node(std::move(out), {x.node()}, "scale");
    if (node->requires_grad) {
        node->backprop = [n, k](Node& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) p->grad[i] += k * self.grad[i];
        };
    }
    return Var::wrap(node);
}

Var weighted_sum(const Var& x, const Tensor& weights) {
    require_defined(x, "weighted_sum");
    require_same_shape(x.value(), weights, "weighted_sum");
    const std::int64_t n = x.value().numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(x.value()[i]) * weights[i];
    auto node = make_node(Tensor::scalar(static_cast<float>(acc)), {x.node()}, "weighted_sum");
    if (node->requires_grad) {
        node->backprop = [n, weights](Node& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            const float g = self.grad[0];
            for (std::int64_t i = 0; i < n; ++i) p->grad[i] += g * weights[i];
        };
    }
    return Var::wrap(node);
}

// ---- backward sweep ----------------------------------------------------------

void backward(const Var& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined Var");
    if (!loss.value().is_scalar()) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " + loss.value().shape_str());
    }

    // iterative post-order DFS; parent order fixed at construction
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    Node* root = loss.node().get();
    if (!root->requires_grad) return;  // nothing reachable to differentiate
    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (p && p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad_set) n->backprop(*n);
    }
}

}  // namespace hsaw::nn
