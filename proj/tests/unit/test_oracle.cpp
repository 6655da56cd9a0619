#include <gtest/gtest.h>

#include "pvlx/cohort.hpp"
#include "pvlx/error.hpp"
#include "pvlx/oracle.hpp"
#include "pvlx/synth.hpp"

using namespace pvlx;

namespace {

struct Scenario {
  ScenarioConfig cfg;
  std::vector<PersonYearRecord> records;
  SmoothingInput in;
  std::vector<Surface> surfaces;
  std::vector<ActivityDistribution> dists;

  Scenario() {
    cfg.n_persons = 800;
    cfg.n_years = 1;
    cfg.n_participants_gps = 12;
    cfg.fixes_per_participant = 800;
    cfg.grid.n_cols = cfg.grid.n_rows = 80;
    const auto cohort = gen_cohort(cfg);
    records = eligible_for_year(impute_viral_loads(cohort, build_strata(cohort), 1), cfg.first_year, cfg.grid);
    in.records = records;
    in.year = cfg.first_year;
    in.grid = cfg.grid;
    const auto all = smooth_all(in);
    surfaces.assign(all.begin(), all.end());
    for (const auto& [id, f] : group_by_participant(gen_trajectories(cfg))) {
      try {
        dists.push_back(ingest_trajectory(f, cfg.grid));
      } catch (const Error&) {
      }
    }
  }
};

const Scenario& scenario() {
  static const Scenario s;
  return s;
}

}  // namespace

TEST(Oracle, ExhaustiveActivitySpace) {
  const std::vector<double> w{0.6, 0.3, 0.1};
  auto e = exhaustive_activity_space(w, 95);
  EXPECT_EQ(e.min_cardinality, 3u);
  EXPECT_NEAR(e.best_weight, 1.0, 1e-15);
  e = exhaustive_activity_space(w, 50);
  EXPECT_EQ(e.min_cardinality, 1u);
  EXPECT_EQ(e.best_weight, 0.6);
  const std::vector<double> v{0.2, 0.35, 0.05, 0.4};
  e = exhaustive_activity_space(v, 70);
  EXPECT_EQ(e.min_cardinality, 2u);
  EXPECT_DOUBLE_EQ(e.best_weight, 0.75);
}

TEST(Oracle, SmoothingPassesOnFreshScenario) {
  const auto& s = scenario();
  const auto r = check_smoothing(s.in, s.surfaces, 300, 5);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_FALSE(r.skipped);
  EXPECT_GT(r.n_compared, 300u);
  EXPECT_LT(r.max_rel_dev, 1e-10);
}

TEST(Oracle, SmoothingFailsOnPerturbedSurface) {
  const auto& s = scenario();
  auto broken = s.surfaces;
  for (auto& v : broken[metric_index(MetricKind::PDV_P)].values)
    if (v) *v += 1e-3;
  const auto r = check_smoothing(s.in, broken, 300, 5);
  EXPECT_FALSE(r.passed);
  EXPECT_GE(r.max_abs_dev, 1e-3 * 0.999);
}

TEST(Oracle, ActivitySpacesPass) {
  const auto& s = scenario();
  const std::vector<double> gammas{30, 50, 80, 95, 99};
  const auto r = check_activity_spaces(s.dists, gammas, 200, 7);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_GE(r.n_compared, 200u * gammas.size());
}

TEST(Oracle, ExposuresPassAndDetectTampering) {
  const auto& s = scenario();
  const std::vector<double> gammas{50, 95, 100};
  auto rows = exposure_matrix(s.dists, s.surfaces, gammas);
  auto r = check_exposures(s.dists, s.surfaces, rows);
  EXPECT_TRUE(r.passed) << r.detail;
  for (auto& row : rows)
    if (row.value) {
      *row.value *= 1.0 + 1e-9;
      break;
    }
  r = check_exposures(s.dists, s.surfaces, rows);
  EXPECT_FALSE(r.passed);
}

TEST(Oracle, GlmmCalibration) {
  const auto r = check_glmm_calibration(3, 2, 100);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_EQ(r.n_compared, 12u);
}

TEST(Oracle, SuiteOnEmptyScenarioSkips) {
  ScenarioOutputs empty;
  empty.include_glmm = false;
  const auto reports = oracle_suite(empty);
  ASSERT_FALSE(reports.empty());
  for (const auto& r : reports) {
    EXPECT_TRUE(r.skipped) << r.check;
    EXPECT_TRUE(r.passed) << r.check;
  }
}

TEST(Oracle, SuiteOnScenarioPasses) {
  const auto& s = scenario();
  ScenarioOutputs out;
  out.smoothing = s.in;
  out.surfaces = s.surfaces;
  out.distributions = s.dists;
  out.gammas = {50, 95, 100};
  out.exposures = exposure_matrix(s.dists, s.surfaces, out.gammas);
  out.seed = 4;
  out.include_glmm = false;
  for (const auto& r : oracle_suite(out)) {
    EXPECT_TRUE(r.passed) << r.check << ": " << r.detail;
    EXPECT_EQ(r.skipped, r.check == "glmm_calibration") << r.check;
  }
}
