// Serial reference kernels vs their OpenMP versions, plus a small Monte Carlo
// cell at increasing thread counts.

#include "fme/kernels.hpp"
#include "fme/montecarlo.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

using namespace fme;

namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

void BM_CrossProductSerial(benchmark::State& state)
{
    const Matrix x = gaussian(100, state.range(0), 1);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::cross_product_reference(x, 0.01));
}

void BM_CrossProductParallel(benchmark::State& state)
{
    const Matrix x = gaussian(100, state.range(0), 1);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::cross_product(x, 0.01));
}

void BM_BartlettSerial(benchmark::State& state)
{
    const Matrix f = gaussian(500, 2, 2);
    const Matrix e = gaussian(500, state.range(0), 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::bartlett_long_run_reference(f, e, 5));
}

void BM_BartlettParallel(benchmark::State& state)
{
    const Matrix f = gaussian(500, 2, 2);
    const Matrix e = gaussian(500, state.range(0), 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::bartlett_long_run(f, e, 5));
}

void BM_MonteCarloCell(benchmark::State& state)
{
    McConfig cfg;
    DgpConfig cell;
    cell.n = 100;
    cfg.grid = {cell};
    cfg.replications = 16;
    cfg.threads = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(cfg));
}

}  // namespace

BENCHMARK(BM_CrossProductSerial)->Arg(50)->Arg(200)->Arg(400)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CrossProductParallel)->Arg(50)->Arg(200)->Arg(400)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BartlettSerial)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BartlettParallel)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MonteCarloCell)->DenseRange(1, omp_get_num_procs() > 1 ? 4 : 1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
