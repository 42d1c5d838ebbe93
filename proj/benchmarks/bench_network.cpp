#include <benchmark/benchmark.h>

#include "sevkit/autodiff.hpp"
#include "sevkit/network.hpp"
#include "sevkit/rng.hpp"

using namespace sevkit;

namespace {

Tensor random_input(std::size_t hw, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(1, 3, hw, hw);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform());
    return t;
}

NetworkSpec desk_spec(BlockKind kind) {
    NetworkSpec s;
    s.block_kind = kind;
    s.seed = 1;
    return s;
}

}  // namespace

static void BM_forward_sevb(benchmark::State& state) {
    Network net = build(desk_spec(BlockKind::sevb));
    Tensor x = random_input(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        Tensor y = net.denoise(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_forward_sevb)->Arg(64)->Arg(128);

static void BM_forward_baseline_rb(benchmark::State& state) {
    Network net = build(desk_spec(BlockKind::baseline_rb));
    Tensor x = random_input(static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state) {
        Tensor y = net.denoise(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_forward_baseline_rb)->Arg(64)->Arg(128);

static void BM_train_step_sevb(benchmark::State& state) {
    Network net = build(desk_spec(BlockKind::sevb));
    Tensor batch = [] {
        Rng rng(4);
        Tensor t(4, 3, 64, 64);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform());
        return t;
    }();
    for (auto _ : state) {
        net.zero_grads();
        Tape tape;
        auto z = tape.leaf(centralize(batch));
        auto out = net.forward_core(tape, z);
        Tensor seed = Tensor::full(batch.n(), 3, 64, 64, 1.0f / batch.size());
        tape.backward(out, seed);
        benchmark::DoNotOptimize(net.head_grad.data());
    }
}
BENCHMARK(BM_train_step_sevb);

BENCHMARK_MAIN();
