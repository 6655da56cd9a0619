#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pvlx/activity.hpp"
#include "pvlx/cohort.hpp"
#include "pvlx/grid.hpp"
#include "pvlx/nbglmm.hpp"

namespace pvlx {

enum class HomesteadLayout { Uniform, Clustered };

struct ScenarioConfig {
  std::uint64_t seed = 20240611;
  int n_persons = 5000;
  int first_year = 2021;
  int n_years = 3;
  double hiv_prevalence = 0.19;
  double vl_log10_mean = 3.24;
  double vl_log10_sd = 0.7;
  double vl_missing_fraction = 0.15;  ///< measured VLs blanked to exercise imputation
  double outside_fraction = 0.02;     ///< residents with no homestead in the study area
  HomesteadLayout layout = HomesteadLayout::Clustered;
  int n_clusters = 12;
  double cluster_spread_m = 1200.0;

  int n_participants_gps = 200;
  int anchors_per_participant = 4;
  double dwell_exponent = 1.5;  ///< anchor k (from 1) gets share proportional to k^-exponent
  int fixes_per_participant = 10000;
  double sampling_interval_s = 1800.0;
  double mean_bout_fixes = 12.0;  ///< expected consecutive fixes at one anchor
  double anchor_range_m = 2500.0;  ///< sd of non-home anchor offsets from the homestead
  double movement_noise_m = 40.0;
  double gap_probability = 0.005;  ///< chance of a long recording gap after a fix
  std::int64_t start_time = 1640995200;  ///< 2022-01-01T00:00:00Z

  GridSpec grid{0.0, 0.0, 100.0, 200, 200, Projection{-28.4, 32.2}};

  void validate() const;
};

std::string person_id_for(int index);

/// Person-year records for n_persons over n_years consecutive years. Statuses
/// are fixed per person; each positive person-year draws its own log-normal VL.
std::vector<PersonYearRecord> gen_cohort(const ScenarioConfig& cfg);

/// GPS fixes for the first n_participants_gps persons of gen_cohort (same ids).
/// The first anchor is the person's homestead; fixes are time ordered.
std::vector<GpsFix> gen_trajectories(const ScenarioConfig& cfg);

/// Homestead of person `index`, shared by gen_cohort and gen_trajectories.
std::optional<PointLocation> synthetic_homestead(const ScenarioConfig& cfg, int index);

/// Normalized anchor dwell shares implied by the power-law exponent.
std::vector<double> dwell_shares(int anchors, double exponent);

/// Random-intercept NB model simulation on the design used in the regression
/// module. n_grids per subject follows g * r^((gamma - 50) / 45), rounded.
struct GlmmSimulation {
  int n_subjects = 500;
  std::vector<double> gammas{50, 55, 60, 65, 70, 75, 80, 85, 90, 95};
  std::array<double, kNumTerms> beta{2.302585092994046, 0.1, 0.0006, 0.05, -0.05, 0.02};
  double phi = 5.0;
  double sigma_b2 = 0.1;
  double grids_base_max = 80.0;   ///< g ~ U(1, grids_base_max)
  double grids_growth_max = 10.0;  ///< r ~ U(1, grids_growth_max)
  double age_min = 15.0;
  double age_max = 55.0;
};

/// Age terms in `beta` apply to age standardized exactly as build_design does.
std::vector<RegressionRow> simulate_glmm(const GlmmSimulation& sim, std::uint64_t seed);

}  // namespace pvlx
