#include <benchmark/benchmark.h>
#include <omp.h>

#include "rrf/caseology.hpp"
#include "rrf/fn3d.hpp"
#include "rrf/mc_oracle.hpp"

using namespace rrf;

namespace {

// arg 0: serial reference, arg 1: OpenMP
void BM_mc_infinite(benchmark::State& state) {
  const Medium m(0.1, 0.9, std::vector<double>{1.0});
  const auto bins = shells({0.5, 1.0, 2.0, 5.0}, 0.05);
  McOptions opt;
  opt.photons = 20000;
  opt.parallel = state.range(0) != 0;
  const auto phase = PhaseSampler::henyey_greenstein(0.0);
  for (auto _ : state) benchmark::DoNotOptimize(run_infinite_isotropic(m, phase, bins, opt).value);
  state.SetItemsProcessed(state.iterations() * opt.photons);
}
BENCHMARK(BM_mc_infinite)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// arg: OpenMP thread count, 1 is the serial reference
void BM_fn3d_build(benchmark::State& state) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const Medium m(0.1, 0.9, henyey_greenstein(0.5, 7));
  for (auto _ : state) benchmark::DoNotOptimize(build_system(m, 0.3, 7).A.data());
  omp_set_num_threads(saved);
}
BENCHMARK(BM_fn3d_build)->Arg(1)->Arg(omp_get_num_procs())->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
