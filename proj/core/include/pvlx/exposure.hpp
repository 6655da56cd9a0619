#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pvlx/activity.hpp"
#include "pvlx/surface.hpp"

namespace pvlx {

/// Time-weighted mean of one surface over one activity space.
struct ExposureRecord {
  std::string participant_id;
  MetricKind metric = MetricKind::MVL;
  double gamma = 100.0;
  std::optional<double> value;  ///< empty for flagged rows
  std::size_t n_cells = 0;
  std::size_t masked_dropped = 0;
  std::string flag;  ///< non-empty when the row could not be computed
};

/// Weighted mean of `surface` over the cells of `space`, with weights from
/// `dist` renormalized over the unmasked cells. Masked cells are dropped and
/// counted. Throws Error(UndefinedExposure) if every cell is masked.
ExposureRecord contextual_exposure(const ActivityDistribution& dist, const ActivitySpace& space,
                                   const Surface& surface);

/// One row per (participant, metric, gamma), ordered by participant (input
/// order), then metric (input order), then gamma (input order). Failures
/// become flagged rows; the batch never aborts.
std::vector<ExposureRecord> exposure_matrix(std::span<const ActivityDistribution> participants,
                                            std::span<const Surface> surfaces,
                                            std::span<const double> gammas);

enum class RiskBasis { PVL, PVL_P };
enum class RiskLabel { High, Low };

const char* to_string(RiskBasis b) noexcept;
const char* to_string(RiskLabel l) noexcept;

struct RiskGroup {
  RiskLabel label = RiskLabel::High;
  RiskBasis basis = RiskBasis::PVL;
  std::set<std::string> members;
  std::set<CellId> collective_cells;
};

struct RiskClassification {
  RiskGroup high;
  RiskGroup low;
  std::size_t n_participants = 0;
  double mvl_hi = 0.0, mvl_lo = 0.0;  ///< percentile cut points
  double pdv_hi = 0.0, pdv_lo = 0.0;
  bool degenerate = false;  ///< some participant landed in both groups
};

/// Joint-percentile grouping on E^MVL and E^PDV (or the population-based
/// pair) at gamma = 100. High: both >= the `hi` percentile; low: both <= the
/// `lo` percentile. Percentiles use linear interpolation. `full_spaces` maps
/// participant -> A_100 cells for the collective activity spaces.
/// Throws Error(InsufficientData) with fewer than 5 valid participants.
RiskClassification classify_risk(std::span<const ExposureRecord> records, RiskBasis basis,
                                 const std::map<std::string, std::vector<CellId>>& full_spaces,
                                 double hi = 80.0, double lo = 20.0);

}  // namespace pvlx
