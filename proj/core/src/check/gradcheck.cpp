#include "hsaw/check/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <utility>

#include "hsaw/autodiff.hpp"
#include "hsaw/check/reference_ops.hpp"
#include "hsaw/rng.hpp"
#include "hsaw/tensor.hpp"

namespace hsaw::check {

namespace {

using nn::SplitMix64;
using nn::Tensor;
using nn::Var;

Tensor rand_tensor(std::vector<int> shape, SplitMix64& rng, float lo, float hi) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// keeps |v| >= margin so finite differences never straddle a kink
Tensor rand_tensor_away_from_zero(std::vector<int> shape, SplitMix64& rng, float margin) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        float v = rng.uniform(-1.0f, 1.0f);
        while (std::abs(v) < margin) v = rng.uniform(-1.0f, 1.0f);
        t[i] = v;
    }
    return t;
}

std::vector<int> rand_4d_shape(SplitMix64& rng) {
    return {1 + static_cast<int>(rng.next_below(2)), 1 + static_cast<int>(rng.next_below(3)),
            2 + static_cast<int>(rng.next_below(4)), 2 + static_cast<int>(rng.next_below(4))};
}

// one op at one random configuration: the engine closure builds the float32
// graph down to a scalar, the ref closure evaluates the same function on
// doubles for the finite-difference probe
struct Case {
    std::vector<std::string> input_names;
    std::vector<Tensor> inputs;
    std::function<Var(const std::vector<Var>&)> engine;
    std::function<double(const std::vector<RefTensor>&)> ref;
};

Case make_conv2d(SplitMix64& rng) {
    const int n = 1 + static_cast<int>(rng.next_below(2));
    const int ci = 1 + static_cast<int>(rng.next_below(3));
    const int co = 1 + static_cast<int>(rng.next_below(3));
    const int k = 1 + static_cast<int>(rng.next_below(3));
    const int stride = 1 + static_cast<int>(rng.next_below(2));
    const int pad = static_cast<int>(rng.next_below(2));
    const int h = k + static_cast<int>(rng.next_below(4));
    const int w = k + static_cast<int>(rng.next_below(4));
    Case c;
    c.input_names = {"input", "weight", "bias"};
    c.inputs = {rand_tensor({n, ci, h, w}, rng, -1.0f, 1.0f),
                rand_tensor({co, ci, k, k}, rng, -0.7f, 0.7f),
                rand_tensor({co}, rng, -0.5f, 0.5f)};
    const int oh = nn::conv_out_dim(h, k, stride, pad);
    const int ow = nn::conv_out_dim(w, k, stride, pad);
    Tensor head = rand_tensor({n, co, oh, ow}, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [stride, pad, head](const std::vector<Var>& v) {
        return nn::weighted_sum(nn::conv2d(v[0], v[1], v[2], stride, pad), head);
    };
    c.ref = [stride, pad, head_ref](const std::vector<RefTensor>& r) {
        return ref_weighted_sum(ref_conv2d(r[0], r[1], r[2], stride, pad), head_ref);
    };
    return c;
}

Case make_deconv2d(SplitMix64& rng) {
    const int n = 1 + static_cast<int>(rng.next_below(2));
    const int ci = 1 + static_cast<int>(rng.next_below(3));
    const int co = 1 + static_cast<int>(rng.next_below(3));
    const int stride = 1 + static_cast<int>(rng.next_below(2));
    const int pad = static_cast<int>(rng.next_below(2));
    const int k = std::max(2 * pad + 1, 2 + static_cast<int>(rng.next_below(3)));
    const int h = 2 + static_cast<int>(rng.next_below(3));
    const int w = 2 + static_cast<int>(rng.next_below(3));
    Case c;
    c.input_names = {"input", "weight", "bias"};
    c.inputs = {rand_tensor({n, ci, h, w}, rng, -1.0f, 1.0f),
                rand_tensor({ci, co, k, k}, rng, -0.7f, 0.7f),
                rand_tensor({co}, rng, -0.5f, 0.5f)};
    const int oh = nn::deconv_out_dim(h, k, stride, pad);
    const int ow = nn::deconv_out_dim(w, k, stride, pad);
    Tensor head = rand_tensor({n, co, oh, ow}, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [stride, pad, head](const std::vector<Var>& v) {
        return nn::weighted_sum(nn::deconv2d(v[0], v[1], v[2], stride, pad), head);
    };
    c.ref = [stride, pad, head_ref](const std::vector<RefTensor>& r) {
        return ref_weighted_sum(ref_deconv2d(r[0], r[1], r[2], stride, pad), head_ref);
    };
    return c;
}

Case make_leaky_relu(SplitMix64& rng) {
    const float slope = 0.1f + 0.1f * static_cast<float>(rng.next_below(3));
    Case c;
    c.input_names = {"x"};
    c.inputs = {rand_tensor_away_from_zero(rand_4d_shape(rng), rng, 0.05f)};
    Tensor head = rand_tensor(c.inputs[0].shape(), rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [slope, head](const std::vector<Var>& v) {
        return nn::weighted_sum(nn::leaky_relu(v[0], slope), head);
    };
    c.ref = [slope, head_ref](const std::vector<RefTensor>& r) {
        return ref_weighted_sum(ref_leaky_relu(r[0], static_cast<double>(slope)), head_ref);
    };
    return c;
}

Case make_sigmoid(SplitMix64& rng) {
    Case c;
    c.input_names = {"x"};
    auto shape = rand_4d_shape(rng);
    c.inputs = {rand_tensor(shape, rng, -3.0f, 3.0f)};
    Tensor head = rand_tensor(shape, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [head](const std::vector<Var>& v) { return nn::weighted_sum(nn::sigmoid(v[0]), head); };
    c.ref = [head_ref](const std::vector<RefTensor>& r) { return ref_weighted_sum(ref_sigmoid(r[0]), head_ref); };
    return c;
}

Case make_tanh(SplitMix64& rng) {
    Case c;
    c.input_names = {"x"};
    auto shape = rand_4d_shape(rng);
    c.inputs = {rand_tensor(shape, rng, -2.0f, 2.0f)};
    Tensor head = rand_tensor(shape, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [head](const std::vector<Var>& v) { return nn::weighted_sum(nn::tanh_act(v[0]), head); };
    c.ref = [head_ref](const std::vector<RefTensor>& r) { return ref_weighted_sum(ref_tanh(r[0]), head_ref); };
    return c;
}

Case make_concat(SplitMix64& rng) {
    const int n = 1 + static_cast<int>(rng.next_below(2));
    const int ca = 1 + static_cast<int>(rng.next_below(3));
    const int cb = 1 + static_cast<int>(rng.next_below(3));
    const int h = 2 + static_cast<int>(rng.next_below(3));
    const int w = 2 + static_cast<int>(rng.next_below(3));
    Case c;
    c.input_names = {"a", "b"};
    c.inputs = {rand_tensor({n, ca, h, w}, rng, -1.0f, 1.0f), rand_tensor({n, cb, h, w}, rng, -1.0f, 1.0f)};
    Tensor head = rand_tensor({n, ca + cb, h, w}, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [head](const std::vector<Var>& v) {
        return nn::weighted_sum(nn::concat_channels(v[0], v[1]), head);
    };
    c.ref = [head_ref](const std::vector<RefTensor>& r) {
        return ref_weighted_sum(ref_concat_channels(r[0], r[1]), head_ref);
    };
    return c;
}

Case make_instance_norm(SplitMix64& rng) {
    const int n = 1 + static_cast<int>(rng.next_below(2));
    const int ch = 1 + static_cast<int>(rng.next_below(3));
    const int h = 3 + static_cast<int>(rng.next_below(4));
    const int w = 3 + static_cast<int>(rng.next_below(4));
    Case c;
    c.input_names = {"x", "gamma", "beta"};
    c.inputs = {rand_tensor({n, ch, h, w}, rng, -1.0f, 1.0f), rand_tensor({ch}, rng, 0.5f, 1.5f),
                rand_tensor({ch}, rng, -0.5f, 0.5f)};
    Tensor head = rand_tensor({n, ch, h, w}, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    const double eps = static_cast<double>(1e-5f);
    c.engine = [head](const std::vector<Var>& v) {
        return nn::weighted_sum(nn::instance_norm(v[0], v[1], v[2]), head);
    };
    c.ref = [head_ref, eps](const std::vector<RefTensor>& r) {
        return ref_weighted_sum(ref_instance_norm(r[0], r[1], r[2], eps), head_ref);
    };
    return c;
}

Case make_l1(SplitMix64& rng) {
    auto shape = rand_4d_shape(rng);
    Tensor a = rand_tensor(shape, rng, -1.0f, 1.0f);
    Tensor b(shape);
    for (std::int64_t i = 0; i < b.numel(); ++i) {
        float v = rng.uniform(-1.0f, 1.0f);
        while (std::abs(v - a[i]) < 0.05f) v = rng.uniform(-1.0f, 1.0f);
        b[i] = v;
    }
    Case c;
    c.input_names = {"a", "b"};
    c.inputs = {std::move(a), std::move(b)};
    c.engine = [](const std::vector<Var>& v) { return nn::l1_loss(v[0], v[1]); };
    c.ref = [](const std::vector<RefTensor>& r) { return ref_l1_loss(r[0], r[1]); };
    return c;
}

Case make_bce(SplitMix64& rng) {
    auto shape = rand_4d_shape(rng);
    Case c;
    c.input_names = {"pred", "target"};
    c.inputs = {rand_tensor(shape, rng, 0.05f, 0.95f), rand_tensor(shape, rng, 0.0f, 1.0f)};
    c.engine = [](const std::vector<Var>& v) { return nn::bce_loss(v[0], v[1]); };
    c.ref = [](const std::vector<RefTensor>& r) { return ref_bce_loss(r[0], r[1]); };
    return c;
}

Case make_bce_logits(SplitMix64& rng) {
    auto shape = rand_4d_shape(rng);
    Case c;
    c.input_names = {"logits", "target"};
    c.inputs = {rand_tensor(shape, rng, -2.0f, 2.0f), rand_tensor(shape, rng, 0.0f, 1.0f)};
    c.engine = [](const std::vector<Var>& v) { return nn::bce_with_logits_loss(v[0], v[1]); };
    c.ref = [](const std::vector<RefTensor>& r) { return ref_bce_with_logits_loss(r[0], r[1]); };
    return c;
}

Case make_add(SplitMix64& rng) {
    auto shape = rand_4d_shape(rng);
    Case c;
    c.input_names = {"a", "b"};
    c.inputs = {rand_tensor(shape, rng, -1.0f, 1.0f), rand_tensor(shape, rng, -1.0f, 1.0f)};
    Tensor head = rand_tensor(shape, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [head](const std::vector<Var>& v) { return nn::weighted_sum(nn::add(v[0], v[1]), head); };
    c.ref = [head_ref](const std::vector<RefTensor>& r) {
        RefTensor s = r[0];
        for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += r[1].v[i];
        return ref_weighted_sum(s, head_ref);
    };
    return c;
}

Case make_scale(SplitMix64& rng) {
    auto shape = rand_4d_shape(rng);
    const float k = rng.uniform(-2.0f, 2.0f);
    Case c;
    c.input_names = {"x"};
    c.inputs = {rand_tensor(shape, rng, -1.0f, 1.0f)};
    Tensor head = rand_tensor(shape, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [k, head](const std::vector<Var>& v) { return nn::weighted_sum(nn::scale(v[0], k), head); };
    c.ref = [k, head_ref](const std::vector<RefTensor>& r) {
        RefTensor s = r[0];
        for (double& x : s.v) x *= static_cast<double>(k);
        return ref_weighted_sum(s, head_ref);
    };
    return c;
}

Case make_weighted_sum(SplitMix64& rng) {
    auto shape = rand_4d_shape(rng);
    Case c;
    c.input_names = {"x"};
    c.inputs = {rand_tensor(shape, rng, -1.0f, 1.0f)};
    Tensor head = rand_tensor(shape, rng, -1.0f, 1.0f);
    const RefTensor head_ref = widen(head);
    c.engine = [head](const std::vector<Var>& v) { return nn::weighted_sum(v[0], head); };
    c.ref = [head_ref](const std::vector<RefTensor>& r) { return ref_weighted_sum(r[0], head_ref); };
    return c;
}

void check_case(const std::string& op, int trial, const Case& c, GradCheckOpStat& stat,
                GradCheckReport& rep) {
    std::vector<Var> vars;
    vars.reserve(c.inputs.size());
    for (const Tensor& t : c.inputs) vars.emplace_back(t, /*requires_grad=*/true);
    Var loss = c.engine(vars);
    nn::backward(loss);

    std::vector<RefTensor> refs;
    refs.reserve(c.inputs.size());
    for (const Tensor& t : c.inputs) refs.push_back(widen(t));

    for (std::size_t i = 0; i < refs.size(); ++i) {
        const Tensor& grad = vars[i].grad();
        for (std::int64_t j = 0; j < grad.numel(); ++j) {
            const double saved = refs[i].v[static_cast<std::size_t>(j)];
            refs[i].v[static_cast<std::size_t>(j)] = saved + kGradCheckStep;
            const double fp = c.ref(refs);
            refs[i].v[static_cast<std::size_t>(j)] = saved - kGradCheckStep;
            const double fm = c.ref(refs);
            refs[i].v[static_cast<std::size_t>(j)] = saved;

            const double fd = (fp - fm) / (2.0 * kGradCheckStep);
            const double analytic = static_cast<double>(grad[j]);
            const double rel = std::abs(analytic - fd) /
                               std::max({1.0, std::abs(analytic), std::abs(fd)});

            ++rep.elements;
            ++stat.elements;
            if (rel > stat.max_rel_err) stat.max_rel_err = rel;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = op + "/" + c.input_names[i] + " shape=" +
                            nn::shape_to_string(c.inputs[i].shape()) + " idx=" + std::to_string(j) +
                            " trial=" + std::to_string(trial);
            }
            if (rel >= kGradCheckTol) {
                rep.failures.push_back({op + "/" + c.input_names[i] + " shape=" +
                                            nn::shape_to_string(c.inputs[i].shape()) + " idx=" +
                                            std::to_string(j) + " trial=" + std::to_string(trial),
                                        analytic, fd, rel});
            }
        }
    }
    ++rep.cases;
    ++stat.trials;
}

}  // namespace

GradCheckReport run_gradcheck(int trials_per_op, std::uint64_t seed) {
    using Maker = Case (*)(SplitMix64&);
    const std::pair<const char*, Maker> ops[] = {
        {"conv2d", make_conv2d},
        {"deconv2d", make_deconv2d},
        {"leaky_relu", make_leaky_relu},
        {"sigmoid", make_sigmoid},
        {"tanh", make_tanh},
        {"concat_channels", make_concat},
        {"instance_norm", make_instance_norm},
        {"l1_loss", make_l1},
        {"bce_loss", make_bce},
        {"bce_with_logits_loss", make_bce_logits},
        {"add", make_add},
        {"scale", make_scale},
        {"weighted_sum", make_weighted_sum},
    };

    GradCheckReport rep;
    rep.trials_per_op = trials_per_op;
    std::uint64_t op_idx = 0;
    for (const auto& [name, make] : ops) {
        GradCheckOpStat stat;
        stat.op = name;
        for (int t = 0; t < trials_per_op; ++t) {
            SplitMix64 rng(nn::mix_seed(seed, op_idx * 1009 + static_cast<std::uint64_t>(t)));
            const Case c = make(rng);
            check_case(name, t, c, stat, rep);
        }
        rep.per_op.push_back(std::move(stat));
        ++op_idx;
    }
    return rep;
}

std::string summarize(const GradCheckReport& report) {
    std::string out;
    char line[256];
    for (const auto& s : report.per_op) {
        std::snprintf(line, sizeof(line), "  %-22s trials=%-3d partials=%-7lld max_rel_err=%.3e\n",
                      s.op.c_str(), s.trials, static_cast<long long>(s.elements), s.max_rel_err);
        out += line;
    }
    std::snprintf(line, sizeof(line), "gradcheck: %d cases, %lld partials, max_rel_err=%.3e at %s\n",
                  report.cases, static_cast<long long>(report.elements), report.max_rel_err,
                  report.worst.c_str());
    out += line;
    for (const auto& f : report.failures) {
        std::snprintf(line, sizeof(line), "  FAIL %s analytic=%.8g fd=%.8g rel_err=%.3e\n",
                      f.where.c_str(), f.analytic, f.fd, f.rel_err);
        out += line;
    }
    out += report.passed() ? "gradcheck: PASS\n" : "gradcheck: FAIL\n";
    return out;
}

}  // namespace hsaw::check
