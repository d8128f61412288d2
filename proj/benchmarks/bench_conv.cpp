#include <benchmark/benchmark.h>

#include "hsaw/autodiff.hpp"
#include "hsaw/rng.hpp"
#include "hsaw/tensor.hpp"

using namespace hsaw::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, SplitMix64& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0f, 1.0f);
    return t;
}

void BM_ConvForward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    SplitMix64 rng(1);
    Tensor x = random_tensor({4, c, hw, hw}, rng);
    Tensor w = random_tensor({2 * c, c, 4, 4}, rng);
    Tensor b = random_tensor({2 * c}, rng);
    for (auto _ : state) {
        Var out = conv2d(Var(x), Var(w), Var(b), 2, 1);
        benchmark::DoNotOptimize(out.value().data());
    }
    const double flops = 2.0 * 4 * (2 * c) * (hw / 2) * (hw / 2) * c * 16;
    state.counters["GFLOP/s"] =
        benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate,
                           benchmark::Counter::OneK::kIs1000);
}

void BM_ConvTrainStep(benchmark::State& state) {
    const int hw = static_cast<int>(state.range(0));
    SplitMix64 rng(2);
    Parameter w1("w1", conv_weight_init(16, 1, 4, rng));
    Parameter b1("b1", Tensor({16}));
    Parameter w2("w2", conv_weight_init(32, 16, 4, rng));
    Parameter b2("b2", Tensor({32}));
    Tensor x = random_tensor({4, 1, hw, hw}, rng);
    Tensor target = Tensor::full({4, 32, hw / 4, hw / 4}, 1.0f);
    for (auto _ : state) {
        Var h = leaky_relu(conv2d(Var(x), w1.var(), b1.var(), 2, 1), 0.2f);
        h = conv2d(h, w2.var(), b2.var(), 2, 1);
        Var loss = bce_with_logits_loss(h, Var(target));
        backward(loss);
        w1.zero_grad();
        b1.zero_grad();
        w2.zero_grad();
        b2.zero_grad();
        benchmark::DoNotOptimize(loss.value().data());
    }
}

void BM_Deconv(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    SplitMix64 rng(3);
    Tensor x = random_tensor({4, c, hw, hw}, rng);
    Tensor w = random_tensor({c, c / 2, 4, 4}, rng);
    Tensor b = random_tensor({c / 2}, rng);
    for (auto _ : state) {
        Var out = deconv2d(Var(x), Var(w), Var(b), 2, 1);
        benchmark::DoNotOptimize(out.value().data());
    }
}

}  // namespace

BENCHMARK(BM_ConvForward)->Args({16, 32})->Args({32, 16})->Args({64, 8});
BENCHMARK(BM_ConvTrainStep)->Arg(64)->Arg(32);
BENCHMARK(BM_Deconv)->Args({64, 8})->Args({32, 16});

BENCHMARK_MAIN();
