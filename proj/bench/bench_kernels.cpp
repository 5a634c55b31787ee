// Serial reference kernels against their OpenMP counterparts.
//
//   bench_kernels --benchmark_filter=csr
//   OMP_NUM_THREADS=4 bench_kernels

#include <benchmark/benchmark.h>
#include <omp.h>

#include <map>

#include "adjfree/analysis.hpp"
#include "adjfree/io.hpp"
#include "adjfree/kernels.hpp"
#include "adjfree/rng.hpp"

namespace {

using namespace adjfree;

const CsrMatrix& csr_fixture(std::size_t n) {
  static std::map<std::size_t, CsrMatrix> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    const Problem p = generate_problem(ProblemGenSpec{n, n, 0.05, 42, std::nullopt});
    it = cache.emplace(n, *p.op.csr_storage()).first;
  }
  return it->second;
}

kernels::CsrView view(const CsrMatrix& a) { return {a.rows, a.cols, a.row_ptr, a.col_idx, a.values}; }

Vector random_vector(std::size_t n) {
  RngState rng(1, 0);
  Vector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_csr_serial(benchmark::State& state) {
  const auto& a = csr_fixture(static_cast<std::size_t>(state.range(0)));
  const Vector x = random_vector(a.cols);
  Vector y(a.rows);
  for (auto _ : state) {
    kernels::serial::csr_matvec(view(a), x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nnz()));
}

void BM_csr_parallel(benchmark::State& state) {
  const auto& a = csr_fixture(static_cast<std::size_t>(state.range(0)));
  const Vector x = random_vector(a.cols);
  Vector y(a.rows);
  for (auto _ : state) {
    kernels::parallel::csr_matvec(view(a), x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nnz()));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_dense_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vector data = random_vector(n * n);
  const Vector x = random_vector(n);
  Vector y(n);
  const kernels::DenseView a{n, n, data};
  for (auto _ : state) {
    kernels::serial::dense_matvec(a, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

void BM_dense_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Vector data = random_vector(n * n);
  const Vector x = random_vector(n);
  Vector y(n);
  const kernels::DenseView a{n, n, data};
  for (auto _ : state) {
    kernels::parallel::dense_matvec(a, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
  state.counters["threads"] = omp_get_max_threads();
}

// estimate_M parallelizes over sample blocks; range(0) is the thread count.
void BM_estimate_M(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  const Problem p = generate_problem(ProblemGenSpec{60, 20, 1.0, 3, std::nullopt});
  const SamplerSpec spec(SamplerKind::NormalStd, 20);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) {
    RngState rng(5, 0);
    const MEstimate est = estimate_M(p.op, spec, rng, 65536);
    benchmark::DoNotOptimize(est.matrix.data().data());
  }
  omp_set_num_threads(saved);
  state.SetItemsProcessed(state.iterations() * 65536);
}

}  // namespace

BENCHMARK(BM_csr_serial)->Arg(2000)->Arg(8000);
BENCHMARK(BM_csr_parallel)->Arg(2000)->Arg(8000);
BENCHMARK(BM_dense_serial)->Arg(500)->Arg(2000);
BENCHMARK(BM_dense_parallel)->Arg(500)->Arg(2000);
BENCHMARK(BM_estimate_M)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
