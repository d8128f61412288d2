#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "hsaw/adam.hpp"
#include "hsaw/autodiff.hpp"
#include "hsaw/check/gradcheck.hpp"
#include "hsaw/check/reference_ops.hpp"
#include "hsaw/rng.hpp"
#include "hsaw/tensor.hpp"

using namespace hsaw::nn;
namespace check = hsaw::check;

namespace {

Tensor random_tensor(std::vector<int> shape, SplitMix64& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

void set_grad(Parameter& p, const std::vector<float>& g) {
    auto& node = *p.var().node();
    node.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) node.grad[static_cast<std::int64_t>(i)] = g[i];
}

}  // namespace

TEST_CASE("splitmix64 reproduces the reference sequence") {
    SplitMix64 a(0);
    CHECK(a.next_u64() == 0xE220A8397B1DCDAFULL);
    CHECK(a.next_u64() == 0x6E789E6AA1B965F4ULL);
    CHECK(a.next_u64() == 0x06C45D188009454FULL);
    SplitMix64 b(42);
    CHECK(b.next_u64() == 0xBDD732262FEB6E95ULL);
    CHECK(b.next_u64() == 0x28EFE333B266F103ULL);
}

TEST_CASE("fnv1a64 known vectors") {
    CHECK(fnv1a64(nullptr, 0) == 0xCBF29CE484222325ULL);
    CHECK(fnv1a64("a", 1) == 0xAF63DC4C8601EC8CULL);
    CHECK(fnv1a64("hello", 5) == 0xA430D84680AABD0BULL);
}

TEST_CASE("rng helpers stay inside their ranges") {
    SplitMix64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        const float u = rng.uniform(-2.0f, 3.0f);
        CHECK(u >= -2.0f);
        CHECK(u < 3.0f);
        CHECK(rng.next_below(7) < 7);
        const double d = rng.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    CHECK(mix_seed(1, 5) == mix_seed(1, 5));
}

TEST_CASE("tensor construction and validation") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t[5] == 0.0f);
    CHECK_THROWS(Tensor({2, 0}));
    CHECK_THROWS(Tensor({-1, 3}));
    CHECK_THROWS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}));

    Tensor u({1, 2, 2, 2});
    u.at(0, 1, 1, 0) = 5.0f;
    CHECK(u[6] == 5.0f);
    CHECK(u.shape_str() == "1x2x2x2");

    Tensor f = Tensor::full({3}, 2.5f);
    CHECK(f[2] == 2.5f);
    CHECK(f.all_finite());
    f[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(f.all_finite());
    f.fill(0.0f);
    CHECK(f.all_finite());
    CHECK(Tensor::scalar(4.0f).is_scalar());
}

TEST_CASE("conv2d trivial kernels") {
    // 1x1 kernel of 2.0 doubles every element
    Var x(Tensor::full({1, 1, 3, 3}, 1.0f));
    Var w(Tensor({1, 1, 1, 1}, {2.0f}));
    Var b(Tensor({1}));
    Tensor out = conv2d(x, w, b, 1, 0).value();
    CHECK(out.shape() == std::vector<int>{1, 1, 3, 3});
    for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 2.0f);

    // identity-center 3x3 kernel with pad 1 reproduces the input
    SplitMix64 rng(3);
    Tensor img = random_tensor({1, 1, 4, 5}, rng);
    Tensor ident({1, 1, 3, 3});
    ident.at(0, 0, 1, 1) = 1.0f;
    Tensor same = conv2d(Var(img), Var(ident), Var(Tensor({1})), 1, 1).value();
    REQUIRE(same.same_shape(img));
    for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(same[i] == doctest::Approx(img[i]).epsilon(1e-6));
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(2));
        const int ci = 1 + static_cast<int>(rng.next_below(3));
        const int co = 1 + static_cast<int>(rng.next_below(4));
        const int k = 1 + static_cast<int>(rng.next_below(4));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const int pad = static_cast<int>(rng.next_below(2));
        const int h = k + static_cast<int>(rng.next_below(6));
        const int w = k + static_cast<int>(rng.next_below(6));
        Tensor x = random_tensor({n, ci, h, w}, rng);
        Tensor wt = random_tensor({co, ci, k, k}, rng);
        Tensor bias = random_tensor({co}, rng);
        Tensor got = conv2d(Var(x), Var(wt), Var(bias), stride, pad).value();
        check::RefTensor want =
            check::ref_conv2d(check::widen(x), check::widen(wt), check::widen(bias), stride, pad);
        REQUIRE(got.shape() == want.shape);
        for (std::int64_t i = 0; i < got.numel(); ++i) {
            CHECK(std::abs(got[i] - want.v[static_cast<std::size_t>(i)]) < 1e-5);
        }
    }
    // the spec-sized case
    Tensor x = random_tensor({2, 3, 8, 8}, rng);
    Tensor wt = random_tensor({4, 3, 3, 3}, rng);
    Tensor bias({4});
    Tensor got = conv2d(Var(x), Var(wt), Var(bias), 1, 0).value();
    check::RefTensor want =
        check::ref_conv2d(check::widen(x), check::widen(wt), check::widen(bias), 1, 0);
    for (std::int64_t i = 0; i < got.numel(); ++i) {
        CHECK(std::abs(got[i] - want.v[static_cast<std::size_t>(i)]) < 1e-5);
    }
}

TEST_CASE("conv2d rejects mismatched shapes with a diagnostic") {
    Var x(Tensor({1, 2, 4, 4}));
    Var w(Tensor({3, 1, 3, 3}));  // expects 1 input channel, input has 2
    Var b(Tensor({3}));
    try {
        conv2d(x, w, b, 1, 0);
        FAIL("expected a shape diagnostic");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("channel") != std::string::npos);
    }
}

TEST_CASE("deconv2d shape algebra, zeros input, oracle equivalence") {
    // stride-2 k=2 upsampling doubles the spatial dims
    Tensor out =
        deconv2d(Var(Tensor::full({1, 1, 2, 2}, 1.0f)), Var(Tensor::full({1, 1, 2, 2}, 1.0f)),
                 Var(Tensor({1})), 2, 0)
            .value();
    CHECK(out.shape() == std::vector<int>{1, 1, 4, 4});

    // zeros input propagates only the bias
    Tensor b({2}, {0.5f, -1.0f});
    Tensor z = deconv2d(Var(Tensor({1, 3, 2, 2})), Var(Tensor({3, 2, 3, 3})), Var(b), 1, 0).value();
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) CHECK(z.at(0, c, i, j) == b[c]);
        }
    }

    SplitMix64 rng(23);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(2));
        const int ci = 1 + static_cast<int>(rng.next_below(3));
        const int co = 1 + static_cast<int>(rng.next_below(3));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const int pad = static_cast<int>(rng.next_below(2));
        const int k = std::max(2 * pad + 1, 2 + static_cast<int>(rng.next_below(3)));
        const int h = 2 + static_cast<int>(rng.next_below(4));
        const int w = 2 + static_cast<int>(rng.next_below(4));
        Tensor x = random_tensor({n, ci, h, w}, rng);
        Tensor wt = random_tensor({ci, co, k, k}, rng);
        Tensor bias = random_tensor({co}, rng);
        Tensor got = deconv2d(Var(x), Var(wt), Var(bias), stride, pad).value();
        check::RefTensor want =
            check::ref_deconv2d(check::widen(x), check::widen(wt), check::widen(bias), stride, pad);
        REQUIRE(got.shape() == want.shape);
        for (std::int64_t i = 0; i < got.numel(); ++i) {
            CHECK(std::abs(got[i] - want.v[static_cast<std::size_t>(i)]) < 1e-5);
        }
    }
}

TEST_CASE("conv2d and deconv2d form an adjoint pair") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(2));
        const int ci = 1 + static_cast<int>(rng.next_below(3));
        const int co = 1 + static_cast<int>(rng.next_below(3));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const int pad = static_cast<int>(rng.next_below(2));
        const int k = std::max(2 * pad + 1, 1 + static_cast<int>(rng.next_below(4)));
        // pick the conv output size first so the deconv lands exactly back on h,w
        const int h = (1 + static_cast<int>(rng.next_below(4)) - 1) * stride + k - 2 * pad;
        const int w = (1 + static_cast<int>(rng.next_below(4)) - 1) * stride + k - 2 * pad;
        Tensor x = random_tensor({n, ci, h, w}, rng);
        Tensor wt = random_tensor({co, ci, k, k}, rng);
        Tensor zero_co(std::vector<int>{co});
        Tensor zero_ci(std::vector<int>{ci});

        Tensor cx = conv2d(Var(x), Var(wt), Var(zero_co), stride, pad).value();
        Tensor y = random_tensor(cx.shape(), rng);
        // identical buffer, reinterpreted as a deconv weight (in-ch = co, out-ch = ci)
        Tensor wt_t({co, ci, k, k}, wt.values());
        Tensor dy = deconv2d(Var(y), Var(wt_t), Var(zero_ci), stride, pad).value();
        REQUIRE(dy.same_shape(x));

        double lhs = 0.0, rhs = 0.0;
        for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += static_cast<double>(cx[i]) * y[i];
        for (std::int64_t i = 0; i < x.numel(); ++i) rhs += static_cast<double>(x[i]) * dy[i];
        CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::max(std::abs(lhs), std::abs(rhs))));
    }
}

TEST_CASE("pointwise op closed forms") {
    Tensor v = leaky_relu(Var(Tensor({1, 1, 1, 2}, {-1.0f, 3.0f})), 0.2f).value();
    CHECK(v[0] == doctest::Approx(-0.2f));
    CHECK(v[1] == 3.0f);

    CHECK(sigmoid(Var(Tensor::scalar(0.0f))).value()[0] == doctest::Approx(0.5f));
    CHECK(tanh_act(Var(Tensor::scalar(0.0f))).value()[0] == 0.0f);

    SplitMix64 rng(5);
    Tensor x = random_tensor({2, 1, 3, 3}, rng);
    CHECK(l1_loss(Var(x), Var(x)).value()[0] == 0.0f);

    CHECK(bce_loss(Var(Tensor::scalar(0.5f)), Var(Tensor::scalar(1.0f))).value()[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-6));

    CHECK_THROWS(bce_loss(Var(Tensor::scalar(0.0f)), Var(Tensor::scalar(1.0f))));
    CHECK_THROWS(bce_loss(Var(Tensor::scalar(1.0f)), Var(Tensor::scalar(1.0f))));
    CHECK_THROWS(bce_loss(Var(Tensor::scalar(0.5f)), Var(Tensor::scalar(1.5f))));

    Tensor a(std::vector<int>{1, 1, 1, 2}, {1.0f, 2.0f});
    Tensor bb(std::vector<int>{1, 2, 1, 2}, {3.0f, 4.0f, 5.0f, 6.0f});
    Tensor cat = concat_channels(Var(a), Var(bb)).value();
    CHECK(cat.shape() == std::vector<int>{1, 3, 1, 2});
    for (int i = 0; i < 6; ++i) CHECK(cat[i] == static_cast<float>(i + 1));
}

TEST_CASE("instance_norm standardizes each sample-channel slab") {
    SplitMix64 rng(13);
    Tensor x = random_tensor({2, 3, 5, 5}, rng, -2.0f, 2.0f);
    Var out = instance_norm(Var(x), Var(Tensor::full({3}, 1.0f)), Var(Tensor({3})));
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0, var = 0.0;
            for (int i = 0; i < 5; ++i) {
                for (int j = 0; j < 5; ++j) mean += out.value().at(n, c, i, j);
            }
            mean /= 25.0;
            for (int i = 0; i < 5; ++i) {
                for (int j = 0; j < 5; ++j) {
                    const double d = out.value().at(n, c, i, j) - mean;
                    var += d * d;
                }
            }
            var /= 25.0;
            CHECK(std::abs(mean) < 1e-5);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
        }
    }
}

TEST_CASE("backward of a linear functional returns the fixed factor") {
    SplitMix64 rng(17);
    Tensor x = random_tensor({1, 2, 3, 3}, rng);
    Parameter w("w", random_tensor({1, 2, 3, 3}, rng));
    Var loss = weighted_sum(w.var(), x);
    backward(loss);
    REQUIRE(w.has_grad());
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(w.grad()[i] == x[i]);
}

namespace {

struct NetGrads {
    std::vector<Tensor> grads;
    float loss;
};

NetGrads run_small_net(std::uint64_t seed) {
    SplitMix64 rng(seed);
    Parameter w1("w1", conv_weight_init(4, 2, 3, rng));
    Parameter b1("b1", Tensor({4}));
    Parameter g1("g1", Tensor::full({4}, 1.0f));
    Parameter be1("be1", Tensor({4}));
    Parameter w2("w2", conv_weight_init(1, 4, 3, rng));
    Parameter b2("b2", Tensor({1}));
    Tensor x = random_tensor({2, 2, 8, 8}, rng);
    Tensor target = Tensor::full({2, 1, 8, 8}, 1.0f);

    Var h = conv2d(Var(x), w1.var(), b1.var(), 1, 1);
    h = instance_norm(h, g1.var(), be1.var());
    h = leaky_relu(h, 0.2f);
    h = conv2d(h, w2.var(), b2.var(), 1, 1);
    Var loss = bce_with_logits_loss(h, Var(target));
    backward(loss);

    NetGrads out;
    out.loss = loss.value()[0];
    for (Parameter* p : {&w1, &b1, &g1, &be1, &w2, &b2}) out.grads.push_back(p->grad());
    return out;
}

}  // namespace

TEST_CASE("forward and backward are bitwise deterministic") {
    NetGrads a = run_small_net(99);
    NetGrads b = run_small_net(99);
    CHECK(std::memcmp(&a.loss, &b.loss, sizeof(float)) == 0);
    REQUIRE(a.grads.size() == b.grads.size());
    for (std::size_t i = 0; i < a.grads.size(); ++i) {
        REQUIRE(a.grads[i].numel() == b.grads[i].numel());
        CHECK(std::memcmp(a.grads[i].data(), b.grads[i].data(),
                          sizeof(float) * static_cast<std::size_t>(a.grads[i].numel())) == 0);
    }
}

TEST_CASE("backward rejects a non-scalar loss") {
    Var x(Tensor({1, 1, 2, 2}), true);
    Var y = leaky_relu(x, 0.2f);
    CHECK_THROWS(backward(y));
}

TEST_CASE("gradcheck suite passes at unit scale") {
    check::GradCheckReport rep = check::run_gradcheck(4, 2024);
    INFO(check::summarize(rep));
    CHECK(rep.passed());
    CHECK(rep.max_rel_err < check::kGradCheckTol);
    CHECK(rep.per_op.size() == 13);
}

TEST_CASE("finite inputs never produce NaN or Inf across random op chains") {
    SplitMix64 rng(777);
    for (int chain = 0; chain < 1000; ++chain) {
        int c = 1 + static_cast<int>(rng.next_below(3));
        Tensor t = random_tensor({1, c, 6, 6}, rng, -3.0f, 3.0f);
        Var v(t);
        const int steps = 3 + static_cast<int>(rng.next_below(4));
        for (int s = 0; s < steps; ++s) {
            switch (rng.next_below(8)) {
                case 0: v = leaky_relu(v, 0.2f); break;
                case 1: v = sigmoid(v); break;
                case 2: v = tanh_act(v); break;
                case 3: v = scale(v, rng.uniform(-2.0f, 2.0f)); break;
                case 4: v = add(v, v); break;
                case 5: {
                    v = instance_norm(v, Var(Tensor::full({c}, 1.0f)), Var(Tensor({c})));
                    break;
                }
                case 6: {
                    const int co = 1 + static_cast<int>(rng.next_below(4));
                    v = conv2d(v, Var(conv_weight_init(co, c, 3, rng)), Var(Tensor({co})), 1, 1);
                    c = co;
                    break;
                }
                default: {
                    if (2 * c <= 8) {
                        v = concat_channels(v, v);
                        c *= 2;
                    }
                    break;
                }
            }
        }
        REQUIRE(v.value().all_finite());
    }
}

TEST_CASE("adam first step moves by about lr") {
    Parameter w("w", Tensor::scalar(0.0f));
    Adam opt({&w}, AdamConfig{});
    set_grad(w, {0.37f});
    opt.step();
    CHECK(std::abs(w.value()[0]) == doctest::Approx(2e-4).epsilon(1e-4));
    CHECK_FALSE(w.has_grad());  // consumed
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam with zero grad leaves the parameter unchanged") {
    Parameter w("w", Tensor::scalar(1.25f));
    Adam opt({&w}, AdamConfig{});
    set_grad(w, {0.0f});
    opt.step();
    CHECK(w.value()[0] == 1.25f);
}

TEST_CASE("adam rejects a parameter with no gradient") {
    Parameter w("w", Tensor::scalar(0.0f));
    Adam opt({&w}, AdamConfig{});
    CHECK_THROWS(opt.step());
}

TEST_CASE("adam converges on a quadratic") {
    Parameter w("w", Tensor::scalar(0.0f));
    AdamConfig cfg;
    cfg.lr = 0.1f;
    Adam opt({&w}, cfg);
    for (int i = 0; i < 100; ++i) {
        set_grad(w, {2.0f * (w.value()[0] - 3.0f)});
        opt.step();
    }
    CHECK(std::abs(w.value()[0] - 3.0f) < 0.05f);
}

TEST_CASE("adam validates its configuration") {
    Parameter w("w", Tensor::scalar(0.0f));
    AdamConfig bad;
    bad.lr = 0.0f;
    CHECK_THROWS(Adam({&w}, bad));
    bad = AdamConfig{};
    bad.beta1 = 1.0f;
    CHECK_THROWS(Adam({&w}, bad));
}

TEST_CASE("weight init spreads with the fan-in rule") {
    SplitMix64 rng(55);
    Tensor w = conv_weight_init(8, 4, 3, rng);
    CHECK(w.shape() == std::vector<int>{8, 4, 3, 3});
    const float s = std::sqrt(1.0f / (4 * 3 * 3));
    float max_abs = 0.0f;
    for (std::int64_t i = 0; i < w.numel(); ++i) max_abs = std::max(max_abs, std::abs(w[i]));
    CHECK(max_abs <= s);
    CHECK(max_abs > 0.5f * s);  // not degenerate
}
