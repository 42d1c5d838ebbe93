#include <benchmark/benchmark.h>

#include "sevkit/modules.hpp"
#include "sevkit/ops.hpp"
#include "sevkit/rng.hpp"

using namespace sevkit;

namespace {

Tensor random_features(std::size_t c, std::size_t hw, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(1, c, hw, hw);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
    return t;
}

}  // namespace

static void BM_conv2d_3x3(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Tensor x = random_features(c, 64, 1);
    ConvKernel k(c, c, 3, 3);
    kaiming_init(k, 2);
    for (auto _ : state) {
        Tensor y = conv2d(x, k, 1, 1);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * 9 * c * c * 64 * 64));
}
BENCHMARK(BM_conv2d_3x3)->Arg(16)->Arg(32)->Arg(64);

static void BM_conv2d_backward(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Tensor x = random_features(c, 64, 3);
    ConvKernel k(c, c, 3, 3);
    kaiming_init(k, 4);
    Tensor gout = random_features(c, 64, 5);
    for (auto _ : state) {
        Tensor gx, gw;
        conv2d_backward(x, k, 1, 1, gout, &gx, &gw);
        benchmark::DoNotOptimize(gx.data());
    }
}
BENCHMARK(BM_conv2d_backward)->Arg(16)->Arg(32);

static void BM_nsm_forward(benchmark::State& state) {
    NSMLayerT<float> nsm(32, 6);
    Tensor x = random_features(32, 64, 7);
    for (auto _ : state) {
        Tensor y = nsm.forward(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_nsm_forward);

static void BM_igm_forward(benchmark::State& state) {
    IGMLayerT<float> igm(32, 8);
    Tensor x = random_features(32, 64, 9);
    for (auto _ : state) {
        Tensor y = igm.forward(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_igm_forward);

static void BM_hnm_forward(benchmark::State& state) {
    HNMLayerT<float> hnm(32, 10);
    Tensor x = random_features(32, 64, 11);
    for (auto _ : state) {
        Tensor y = hnm.forward(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_hnm_forward);

BENCHMARK_MAIN();
