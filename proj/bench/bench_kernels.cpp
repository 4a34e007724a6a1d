#include <random>

#include <benchmark/benchmark.h>

#include "tridisk/agler.hpp"

using namespace tridisk;

namespace {

std::vector<Eigen::MatrixXcd> random_blocks(int count, int n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    std::vector<Eigen::MatrixXcd> out;
    for (int k = 0; k < count; ++k) {
        Eigen::MatrixXcd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = cx(d(rng), d(rng));
        out.push_back(m + m.adjoint());
    }
    return out;
}

// Blocks sized like the 8 x 8 grid: 69 generators, 2|S| = 16.
void BM_project_psd(benchmark::State& state) {
    const bool parallel = state.range(0) != 0;
    const auto blocks = random_blocks(69, 16);
    for (auto _ : state) {
        auto b = blocks;
        project_psd(b, parallel);
        benchmark::DoNotOptimize(b.data());
    }
}
BENCHMARK(BM_project_psd)->Arg(0)->Arg(1)->ArgName("parallel");

void BM_collocation_parallel(benchmark::State& state) {
    const DomainSpec s;
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(collocation_matrix(s, N, 8 * N));
}
BENCHMARK(BM_collocation_parallel)->Arg(32)->Arg(48);

void BM_collocation_serial(benchmark::State& state) {
    const DomainSpec s;
    const int N = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(collocation_matrix_serial(s, N, 8 * N));
}
BENCHMARK(BM_collocation_serial)->Arg(32)->Arg(48);

}  // namespace

BENCHMARK_MAIN();
