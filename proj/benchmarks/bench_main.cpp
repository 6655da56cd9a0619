#include <benchmark/benchmark.h>

#include "pvlx/activity.hpp"
#include "pvlx/cohort.hpp"
#include "pvlx/nbglmm.hpp"
#include "pvlx/rng.hpp"
#include "pvlx/surface.hpp"
#include "pvlx/synth.hpp"

namespace {

pvlx::ScenarioConfig scenario(int persons, int grid_cells) {
  pvlx::ScenarioConfig sc;
  sc.n_persons = persons;
  sc.n_years = 1;
  sc.n_participants_gps = 1;
  sc.grid.n_cols = sc.grid.n_rows = grid_cells;
  return sc;
}

void BM_SmoothAll(benchmark::State& state) {
  const auto sc = scenario(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  auto cohort = pvlx::gen_cohort(sc);
  cohort = pvlx::impute_viral_loads(cohort, pvlx::build_strata(cohort), 1);
  const auto eligible = pvlx::eligible_for_year(cohort, sc.first_year, sc.grid);
  const pvlx::SmoothingInput in{eligible, sc.first_year, sc.grid, {}, {}, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(pvlx::smooth_all(in));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sc.grid.cell_count()));
}
BENCHMARK(BM_SmoothAll)->Args({1000, 100})->Args({5000, 200})->Unit(benchmark::kMillisecond);

void BM_IngestTrajectory(benchmark::State& state) {
  auto sc = scenario(1, 200);
  sc.fixes_per_participant = static_cast<int>(state.range(0));
  const auto fixes = pvlx::gen_trajectories(sc);
  for (auto _ : state) benchmark::DoNotOptimize(pvlx::ingest_trajectory(fixes, sc.grid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IngestTrajectory)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_ActivitySpace(benchmark::State& state) {
  auto sc = scenario(1, 200);
  sc.fixes_per_participant = 10000;
  sc.anchors_per_participant = 8;
  sc.movement_noise_m = 300.0;
  const auto dist = pvlx::ingest_trajectory(pvlx::gen_trajectories(sc), sc.grid);
  for (auto _ : state) benchmark::DoNotOptimize(pvlx::activity_space(dist, 95.0));
  state.counters["cells"] = static_cast<double>(dist.weights.size());
}
BENCHMARK(BM_ActivitySpace);

void BM_MarginalLikelihoodGradient(benchmark::State& state) {
  pvlx::GlmmSimulation sim;
  sim.n_subjects = static_cast<int>(state.range(0));
  const auto design = pvlx::build_design(pvlx::simulate_glmm(sim, 7));
  const pvlx::NbMarginalLikelihood lik(design.x, design.y, design.subject_start,
                                       static_cast<int>(state.range(1)));
  Eigen::VectorXd theta(lik.n_params());
  theta << 2.3, 0.1, 0.0006, 0.05, -0.05, 0.02, std::log(5.0), 0.5 * std::log(0.1);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(lik.value_and_gradient(theta, grad));
}
BENCHMARK(BM_MarginalLikelihoodGradient)->Args({500, 15})->Args({500, 5})->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  pvlx::GlmmSimulation sim;
  sim.n_subjects = static_cast<int>(state.range(0));
  const auto design = pvlx::build_design(pvlx::simulate_glmm(sim, 7));
  pvlx::FitConfig cfg;
  cfg.compute_se = false;
  for (auto _ : state) benchmark::DoNotOptimize(pvlx::fit(design, cfg));
}
BENCHMARK(BM_Fit)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
