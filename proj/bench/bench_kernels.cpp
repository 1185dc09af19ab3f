// Serial reference kernels against their OpenMP counterparts.
// Worker count comes from MSDEM_WORKERS or the OpenMP default.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "msdem/harness.hpp"
#include "msdem/parallel.hpp"

using namespace msdem;

namespace {

DemCell scenario_cell(double scale) {
  const ScenarioSpec s = make_scenario(ScenarioId::S42, scale);
  return DemCell(initial_floes(s), s.domain, s.boundary);
}

void BM_StepDem(benchmark::State& state) {
  const ScenarioSpec s = make_scenario(ScenarioId::S42, 0.5);
  DemCell cell = scenario_cell(0.5);
  const PhysParams p;
  for (auto _ : state) benchmark::DoNotOptimize(step_dem(cell, s.ocean, p, 1e-4));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(cell.size()));
}

void BM_StepDemParallel(benchmark::State& state) {
  const ScenarioSpec s = make_scenario(ScenarioId::S42, 0.5);
  DemCell cell = scenario_cell(0.5);
  const PhysParams p;
  for (auto _ : state) benchmark::DoNotOptimize(step_dem_parallel(cell, s.ocean, p, 1e-4));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(cell.size()));
}

void BM_NeighborPairs(benchmark::State& state) {
  const DemCell cell = scenario_cell(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(neighbor_pairs(cell));
}

void BM_NeighborPairsParallel(benchmark::State& state) {
  const DemCell cell = scenario_cell(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(neighbor_pairs_parallel(cell));
}

ContinuumState random_state(int nx, int ny) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uc(0.1, 0.5), uv(-0.3, 0.3);
  ContinuumState st(CoarseGrid({0, 4, 0, 2}, nx, ny));
  for (std::size_t k = 0; k < st.conc.size(); ++k) {
    st.conc[k] = uc(rng);
    st.px[k] = uv(rng);
    st.py[k] = uv(rng);
    st.vbar_x[k] = uv(rng);
    st.vbar_y[k] = uv(rng);
  }
  return st;
}

void BM_LfSubstepReference(benchmark::State& state) {
  const ContinuumState st = random_state(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) / 2);
  const double tau = 0.5 * cfl_bound(st.grid, st.max_speed());
  for (auto _ : state) benchmark::DoNotOptimize(lf_substep_reference(st, tau));
}

void BM_LfSubstep(benchmark::State& state) {
  const ContinuumState st = random_state(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) / 2);
  const double tau = 0.5 * cfl_bound(st.grid, st.max_speed());
  for (auto _ : state) benchmark::DoNotOptimize(lf_substep(st, tau));
}

template <bool Parallel>
void BM_Window(benchmark::State& state) {
  const ScenarioSpec s = make_scenario(ScenarioId::S42, 0.25);
  const MsdemConfig cfg = make_msdem_config(s, 24, 12, 0.01, StudySettings{}, {});
  const std::vector<Floe> floes = initial_floes(s);
  for (auto _ : state) {
    state.PauseTiming();
    auto cells = build_cells(floes, cfg.grid);
    std::vector<StatsAccumulator> acc;
    state.ResumeTiming();
    if constexpr (Parallel)
      benchmark::DoNotOptimize(run_window(cells, acc, nullptr, s.ocean, cfg, 1));
    else
      benchmark::DoNotOptimize(run_window_serial(cells, acc, nullptr, s.ocean, cfg, 1));
  }
}

} // namespace

BENCHMARK(BM_StepDem)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StepDemParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NeighborPairs)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NeighborPairsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LfSubstepReference)->Arg(48)->Arg(256);
BENCHMARK(BM_LfSubstep)->Arg(48)->Arg(256);
BENCHMARK(BM_Window<false>)->Name("BM_WindowSerial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Window<true>)->Name("BM_WindowParallel")->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  if (const int n = workers_from_env(); n > 0) set_worker_count(n);
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
