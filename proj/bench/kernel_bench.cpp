// Serial reference vs OpenMP kernels. Every pair computes bitwise-identical
// results; the benchmark only compares wall time.
//
//   ./build/mmcr_kernel_bench --benchmark_filter=Matmul

#include "mmcr/capacity.hpp"
#include "mmcr/encoder.hpp"
#include "mmcr/linalg.hpp"
#include "mmcr/objective.hpp"
#include "mmcr/rng.hpp"
#include "mmcr/spectral.hpp"

#include <benchmark/benchmark.h>

using namespace mmcr;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_Matmul(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(1));
    RngStream rng(1);
    const Matrix a = gaussian_matrix(rng, n, n), b = gaussian_matrix(rng, n, n);
    for (auto _ : state)
        benchmark::DoNotOptimize(matmul(a, b, exec_of(state)));
    label(state);
}
BENCHMARK(BM_Matmul)->ArgsProduct({{0, 1}, {128, 256}})->Unit(benchmark::kMillisecond);

void BM_Gram(benchmark::State& state)
{
    RngStream rng(2);
    const Matrix a = gaussian_matrix(rng, 1024, static_cast<std::size_t>(state.range(1)));
    for (auto _ : state)
        benchmark::DoNotOptimize(gram(a, exec_of(state)));
    label(state);
}
BENCHMARK(BM_Gram)->ArgsProduct({{0, 1}, {64, 256}})->Unit(benchmark::kMillisecond);

void BM_LossAndGrad(benchmark::State& state)
{
    const auto b = static_cast<std::size_t>(state.range(1));
    RngStream rng(3);
    const auto z = ManifoldBatch::from_rows(gaussian_matrix(rng, b * 8, 64), b, 8);
    for (auto _ : state)
        benchmark::DoNotOptimize(mmcr_loss_and_grad(z, 0.05, exec_of(state)));
    label(state);
}
BENCHMARK(BM_LossAndGrad)->ArgsProduct({{0, 1}, {32, 128}})->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state)
{
    RngStream rng(4);
    const MlpEncoder enc({64, 256, 256, 32}, rng);
    const Matrix x = gaussian_matrix(rng, static_cast<std::size_t>(state.range(1)), 64);
    const Matrix up = gaussian_matrix(rng, x.rows(), 32);
    for (auto _ : state) {
        const auto cache = enc.forward(x, exec_of(state));
        benchmark::DoNotOptimize(enc.backward(cache, up, nullptr, exec_of(state)));
    }
    label(state);
}
BENCHMARK(BM_EncoderForwardBackward)->ArgsProduct({{0, 1}, {256, 1024}})->Unit(benchmark::kMillisecond);

void BM_MftmaCapacity(benchmark::State& state)
{
    RngStream rng(5);
    std::vector<PointManifold> ms;
    for (int i = 0; i < 16; ++i)
        ms.push_back(sphere_manifold(rng, 40, 3, 20, 0.5));
    for (auto _ : state)
        benchmark::DoNotOptimize(mftma_capacity(ms, static_cast<std::size_t>(state.range(1)), 0.0, 7, exec_of(state)));
    label(state);
}
BENCHMARK(BM_MftmaCapacity)->ArgsProduct({{0, 1}, {200}})->Unit(benchmark::kMillisecond);

void BM_VerifyOptimality(benchmark::State& state)
{
    const auto g = build_graph(8, 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(verify_optimality(g, 4, static_cast<std::size_t>(state.range(1)), 9, exec_of(state)));
    label(state);
}
BENCHMARK(BM_VerifyOptimality)->ArgsProduct({{0, 1}, {2000}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
