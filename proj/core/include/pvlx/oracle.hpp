#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvlx/activity.hpp"
#include "pvlx/exposure.hpp"
#include "pvlx/surface.hpp"

namespace pvlx {

struct OracleReport {
  std::string check;
  std::size_t n_compared = 0;
  double oracle_value = 0.0;    ///< value at the worst comparison
  double pipeline_value = 0.0;
  double max_abs_dev = 0.0;
  double max_rel_dev = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

/// Minimum cardinality over all subsets reaching gamma/100 of the total
/// weight, and the largest cumulative weight among subsets of that size.
/// Exhaustive; weights.size() must be <= 20.
struct ExhaustiveSpace {
  std::size_t min_cardinality = 0;
  double best_weight = 0.0;
};
ExhaustiveSpace exhaustive_activity_space(std::span<const double> weights, double gamma);

/// Plain double loop over every contributor for sampled cells.
OracleReport check_smoothing(const SmoothingInput& in, std::span<const Surface> surfaces,
                             std::size_t max_cells, std::uint64_t seed, double tolerance = 1e-10);

/// Greedy spaces of distributions with at most 12 cells, plus `n_random`
/// random distributions, against exhaustive search.
OracleReport check_activity_spaces(std::span<const ActivityDistribution> dists,
                                   std::span<const double> gammas, std::size_t n_random,
                                   std::uint64_t seed);

/// Recomputes every exposure row with an independent sort and direct sum.
OracleReport check_exposures(std::span<const ActivityDistribution> dists,
                             std::span<const Surface> surfaces,
                             std::span<const ExposureRecord> records, double tolerance = 1e-12);

/// Small simulation: fraction of coefficients covered by +-3 SE.
OracleReport check_glmm_calibration(std::uint64_t seed, int replicates = 4, int subjects = 150);

struct ScenarioOutputs {
  SmoothingInput smoothing;  ///< records must outlive the call
  std::vector<Surface> surfaces;
  std::vector<ActivityDistribution> distributions;
  std::vector<ExposureRecord> exposures;
  std::vector<double> gammas;
  std::uint64_t seed = 0;
  bool include_glmm = true;
};

/// All checks; those without input data are reported as skipped.
std::vector<OracleReport> oracle_suite(const ScenarioOutputs& outputs);

}  // namespace pvlx
