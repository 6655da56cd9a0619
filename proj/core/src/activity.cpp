#include "pvlx/activity.hpp"

#include <algorithm>
#include <cmath>
#include <spdlog/spdlog.h>

#include "pvlx/error.hpp"

namespace pvlx {

namespace {

// Cumulative weights are compared against gamma% with this slack so that
// gamma = 100 is reachable despite round-off in the normalization.
constexpr double kCoverageSlack = 1e-12;

}  // namespace

double ActivityDistribution::total_weight() const noexcept {
  double s = 0.0;
  for (const auto& [cell, w] : weights) s += w;
  return s;
}

ActivityDistribution ingest_trajectory(std::span<const GpsFix> fixes, const GridSpec& spec,
                                       const IngestOptions& opts) {
  if (!(opts.gap_cap_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "ingest: gap cap must be > 0");
  ActivityDistribution dist;
  if (!fixes.empty()) dist.participant_id = fixes.front().participant_id;

  struct Located {
    std::int64_t t;
    std::optional<CellId> cell;
  };
  std::vector<Located> pts;
  pts.reserve(fixes.size());
  std::size_t dropped = 0;
  for (const auto& f : fixes) {
    if (f.participant_id != dist.participant_id)
      throw Error(ErrorKind::InvalidArgument, "ingest: fixes from more than one participant");
    if (!std::isfinite(f.lat) || !std::isfinite(f.lon) || std::abs(f.lat) > 90.0 ||
        std::abs(f.lon) > 180.0) {
      ++dropped;
      continue;
    }
    pts.push_back({f.timestamp, cell_of(project(f.lat, f.lon, spec), spec)});
  }
  if (dropped > 0)
    spdlog::warn("ingest: participant {}: dropped {} fix(es) with invalid coordinates",
                 dist.participant_id, dropped);

  std::stable_sort(pts.begin(), pts.end(), [](const Located& a, const Located& b) { return a.t < b.t; });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Located& a, const Located& b) { return a.t == b.t; }),
            pts.end());
  if (pts.size() < 2)
    throw Error(ErrorKind::InsufficientData,
                "ingest: participant " + dist.participant_id + " has fewer than 2 usable fixes");

  std::map<CellId, double> seconds;
  double in_area = 0.0, total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double dt = std::min(static_cast<double>(pts[i + 1].t - pts[i].t), opts.gap_cap_s);
    total += dt;
    if (pts[i].cell) {
      seconds[*pts[i].cell] += dt;
      in_area += dt;
    }
  }
  if (!(in_area > 0.0))
    throw Error(ErrorKind::EmptyDistribution,
                "ingest: participant " + dist.participant_id + " has no in-area time");

  const double denom = opts.denominator == TimeDenominator::InArea ? in_area : total;
  dist.weights.reserve(seconds.size());
  for (const auto& [cell, t] : seconds)
    if (t > 0.0) dist.weights.emplace_back(cell, t / denom);
  dist.observed_seconds = total;
  dist.in_area_fraction = in_area / total;
  return dist;
}

std::map<std::string, std::vector<GpsFix>> group_by_participant(std::span<const GpsFix> fixes) {
  std::map<std::string, std::vector<GpsFix>> out;
  for (const auto& f : fixes) out[f.participant_id].push_back(f);
  return out;
}

ActivitySpace activity_space(const ActivityDistribution& dist, double gamma) {
  if (!(gamma > 0.0 && gamma <= 100.0))
    throw Error(ErrorKind::InvalidArgument, "activity_space: gamma must be in (0, 100]");
  std::vector<std::pair<CellId, double>> ranked = dist.weights;
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  ActivitySpace space;
  space.participant_id = dist.participant_id;
  space.gamma = gamma;
  const double target = gamma / 100.0 - kCoverageSlack;
  double cum = 0.0;
  for (const auto& [cell, w] : ranked) {
    space.cells.push_back(cell);
    cum += w;
    if (cum >= target) break;
  }
  space.covered_fraction = cum;
  return space;
}

std::map<double, std::size_t> activity_space_sizes(const ActivityDistribution& dist,
                                                   std::span<const double> gammas) {
  std::map<double, std::size_t> out;
  for (double g : gammas) out[g] = activity_space(dist, g).cells.size();
  return out;
}

std::set<CellId> collective_activity_space(std::span<const ActivityDistribution> dists) {
  if (dists.empty()) throw Error(ErrorKind::InvalidArgument, "collective_activity_space: no participants");
  std::set<CellId> cells;
  for (const auto& d : dists)
    for (const auto& [cell, w] : d.weights)
      if (w > 0.0) cells.insert(cell);
  return cells;
}

}  // namespace pvlx
