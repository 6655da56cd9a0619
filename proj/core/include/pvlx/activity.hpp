#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pvlx/grid.hpp"

namespace pvlx {

struct GpsFix {
  std::string participant_id;
  std::int64_t timestamp = 0;  ///< UTC seconds since the epoch
  double lat = 0.0;
  double lon = 0.0;
};

/// Which time total the activity weights are normalized by.
enum class TimeDenominator { InArea, All };

struct IngestOptions {
  double gap_cap_s = 1800.0;
  TimeDenominator denominator = TimeDenominator::InArea;
};

/// Fraction of observed time per grid cell. Cells are sorted ascending and
/// every weight is > 0.
struct ActivityDistribution {
  std::string participant_id;
  std::vector<std::pair<CellId, double>> weights;
  double observed_seconds = 0.0;  ///< total attributed time, in and out of area
  double in_area_fraction = 0.0;

  double total_weight() const noexcept;
};

/// Builds one participant's distribution. Each inter-fix interval (capped at
/// gap_cap_s) is credited to the cell of its earlier fix; intervals starting
/// outside the grid count as out-of-area time. Fixes are sorted by time and
/// duplicate timestamps keep the first occurrence.
/// Throws Error(InsufficientData) for < 2 usable fixes and
/// Error(EmptyDistribution) when no time falls inside the grid.
ActivityDistribution ingest_trajectory(std::span<const GpsFix> fixes, const GridSpec& spec,
                                       const IngestOptions& opts = {});

/// Splits a mixed fix list by participant, preserving input order within each.
std::map<std::string, std::vector<GpsFix>> group_by_participant(std::span<const GpsFix> fixes);

struct ActivitySpace {
  std::string participant_id;
  double gamma = 100.0;
  std::vector<CellId> cells;  ///< in selection order (weight desc, CellId asc)
  double covered_fraction = 0.0;
};

/// Smallest set of cells whose weights reach gamma% of the participant's
/// observed time, choosing the heaviest cells first. When the target is
/// unreachable (only with TimeDenominator::All) every cell is returned.
ActivitySpace activity_space(const ActivityDistribution& dist, double gamma);

std::map<double, std::size_t> activity_space_sizes(const ActivityDistribution& dist,
                                                   std::span<const double> gammas);

/// Union of every participant's full (gamma = 100) activity space.
std::set<CellId> collective_activity_space(std::span<const ActivityDistribution> dists);

}  // namespace pvlx
