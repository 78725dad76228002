#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "trajmap/kernel.hpp"
#include "trajmap/reduce.hpp"
#include "trajmap/spectral.hpp"

using namespace trajmap;

namespace {

TrajectoryStore random_store(std::size_t n, std::size_t p) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  std::vector<Checkpoint> cks;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(p);
    for (auto& x : v) x = normal(rng);
    Checkpoint c;
    c.index = static_cast<std::int64_t>(i);
    c.tensors.push_back(TensorRecord::f64("theta", {p}, std::move(v)));
    cks.push_back(std::move(c));
  }
  return TrajectoryStore::from_checkpoints(std::move(cks));
}

void BM_ChunkedDot(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(p, 0.5), b(p, 1.5);
  for (auto _ : state) benchmark::DoNotOptimize(chunked_dot(a, b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * 2 * p * sizeof(double)));
}
BENCHMARK(BM_ChunkedDot)->Range(1 << 10, 1 << 22);

void BM_ComputeGram(benchmark::State& state) {
  const auto store = random_store(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  KernelOptions opts;
  opts.threads = static_cast<unsigned>(state.range(2));
  for (auto _ : state) benchmark::DoNotOptimize(compute_gram(store, OriginSpec::absolute(), SelectionSpec::all(), opts));
}
BENCHMARK(BM_ComputeGram)->Args({16, 1 << 16, 1})->Args({16, 1 << 16, 4})->Args({64, 1 << 14, 1});

void BM_Jacobi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) m.set_sym(i, j, normal(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_eigenvalues(m));
}
BENCHMARK(BM_Jacobi)->Arg(8)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
