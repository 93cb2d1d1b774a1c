#include "ctxcert/ctxcert.hpp"

#include "support/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ctxcert;
using namespace ctxcert::testing;

namespace {

constexpr HazeColor kWhite{1.0f, 1.0f, 1.0f};

void BM_ForwardConv(benchmark::State &state)
{
    const auto side = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    const Model m = random_conv_network(rng, side, side, 3, 10);
    const Tensor x = random_image(rng, {side, side, 3});
    for (auto _ : state)
        benchmark::DoNotOptimize(forward(m, x));
}
BENCHMARK(BM_ForwardConv)->Arg(8)->Arg(16)->Arg(32);

void BM_Blur(benchmark::State &state)
{
    std::mt19937_64 rng(2);
    const Tensor x = random_image(rng, {32, 32, 3});
    for (auto _ : state)
        benchmark::DoNotOptimize(apply_blur(x, 0.5, static_cast<std::size_t>(state.range(0)), 2.0));
}
BENCHMARK(BM_Blur)->Arg(1)->Arg(2)->Arg(4);

void BM_RobustnessInterval(benchmark::State &state)
{
    std::mt19937_64 rng(3);
    const Model m = random_conv_network(rng, 16, 16, 3, 5);
    const ImageSample s = correctly_labelled(m, random_image(rng, {16, 16, 3}));
    for (auto _ : state)
        benchmark::DoNotOptimize(robustness_interval(m, s, PerturbationSpec::haze()));
}
BENCHMARK(BM_RobustnessInterval);

void BM_VerifyHazeDense(benchmark::State &state)
{
    std::mt19937_64 rng(4);
    const auto width = static_cast<std::size_t>(state.range(0));
    const Model m = random_dense_network(rng, 12, {width, width}, 4);
    const ImageSample s = correctly_labelled(m, random_image(rng, {1, 12, 1}));
    for (auto _ : state)
        benchmark::DoNotOptimize(verify_haze(m, s, kWhite, 1.0));
}
BENCHMARK(BM_VerifyHazeDense)->Arg(8)->Arg(16)->Arg(64);

void BM_MinAdversarialConv(benchmark::State &state)
{
    std::mt19937_64 rng(5);
    const Model m = random_conv_network(rng, 8, 8, 3, 5);
    const ImageSample s = correctly_labelled(m, random_image(rng, {8, 8, 3}));
    for (auto _ : state)
        benchmark::DoNotOptimize(min_adversarial_epsilon(m, s, kWhite));
}
BENCHMARK(BM_MinAdversarialConv);

} // namespace

BENCHMARK_MAIN();
