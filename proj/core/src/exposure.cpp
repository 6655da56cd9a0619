#include "pvlx/exposure.hpp"

#include <algorithm>
#include <limits>
#include <spdlog/spdlog.h>

#include "pvlx/error.hpp"
#include "pvlx/stats.hpp"

namespace pvlx {

ExposureRecord contextual_exposure(const ActivityDistribution& dist, const ActivitySpace& space,
                                   const Surface& surface) {
  ExposureRecord rec;
  rec.participant_id = dist.participant_id;
  rec.metric = surface.metric;
  rec.gamma = space.gamma;
  rec.n_cells = space.cells.size();

  // dist.weights is sorted by CellId, so look weights up by binary search.
  const auto weight_of = [&](CellId c) {
    auto it = std::lower_bound(dist.weights.begin(), dist.weights.end(), c,
                               [](const auto& p, CellId k) { return p.first < k; });
    if (it == dist.weights.end() || it->first != c)
      throw Error(ErrorKind::InvalidArgument, "exposure: activity space cell not in distribution");
    return it->second;
  };

  // Summed in CellId order; the result is clamped to the hull of the values.
  std::vector<CellId> cells = space.cells;
  std::sort(cells.begin(), cells.end());
  double sw = 0.0, swv = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (CellId c : cells) {
    const double w = weight_of(c);
    const auto& v = surface.grid.contains(c) ? surface.at(c) : std::optional<double>{};
    if (!v) {
      ++rec.masked_dropped;
      continue;
    }
    sw += w;
    swv += w * *v;
    lo = std::min(lo, *v);
    hi = std::max(hi, *v);
  }
  if (!(sw > 0.0))
    throw Error(ErrorKind::UndefinedExposure, "exposure: every activity-space cell of " +
                                                  dist.participant_id + " is masked for " +
                                                  to_string(surface.metric));
  rec.value = std::clamp(swv / sw, lo, hi);
  return rec;
}

std::vector<ExposureRecord> exposure_matrix(std::span<const ActivityDistribution> participants,
                                            std::span<const Surface> surfaces,
                                            std::span<const double> gammas) {
  for (std::size_t i = 1; i < surfaces.size(); ++i)
    if (!(surfaces[i].grid == surfaces[0].grid) || surfaces[i].year != surfaces[0].year)
      throw Error(ErrorKind::InvalidArgument, "exposure_matrix: surfaces differ in grid or year");

  std::vector<ExposureRecord> out;
  out.reserve(participants.size() * surfaces.size() * gammas.size());
  for (const auto& dist : participants) {
    std::vector<std::optional<ActivitySpace>> spaces;
    std::vector<std::string> space_errors;
    for (double g : gammas) {
      try {
        if (dist.weights.empty())
          throw Error(ErrorKind::EmptyDistribution, "empty activity distribution");
        spaces.emplace_back(activity_space(dist, g));
        space_errors.emplace_back();
      } catch (const Error& e) {
        spaces.emplace_back();
        space_errors.emplace_back(e.what());
      }
    }
    for (const auto& surface : surfaces) {
      for (std::size_t k = 0; k < gammas.size(); ++k) {
        if (!spaces[k]) {
          ExposureRecord rec;
          rec.participant_id = dist.participant_id;
          rec.metric = surface.metric;
          rec.gamma = gammas[k];
          rec.flag = space_errors[k];
          out.push_back(std::move(rec));
          continue;
        }
        try {
          out.push_back(contextual_exposure(dist, *spaces[k], surface));
        } catch (const Error& e) {
          ExposureRecord rec;
          rec.participant_id = dist.participant_id;
          rec.metric = surface.metric;
          rec.gamma = gammas[k];
          rec.n_cells = spaces[k]->cells.size();
          rec.masked_dropped = spaces[k]->cells.size();
          rec.flag = e.what();
          out.push_back(std::move(rec));
        }
      }
    }
  }
  return out;
}

const char* to_string(RiskBasis b) noexcept { return b == RiskBasis::PVL ? "PVL" : "PVL_P"; }
const char* to_string(RiskLabel l) noexcept { return l == RiskLabel::High ? "high" : "low"; }

RiskClassification classify_risk(std::span<const ExposureRecord> records, RiskBasis basis,
                                 const std::map<std::string, std::vector<CellId>>& full_spaces,
                                 double hi, double lo) {
  if (!(hi >= 0.0 && hi <= 100.0 && lo >= 0.0 && lo <= 100.0))
    throw Error(ErrorKind::InvalidArgument, "classify_risk: percentiles must be in [0, 100]");
  const MetricKind mvl = basis == RiskBasis::PVL ? MetricKind::MVL : MetricKind::MVL_P;
  const MetricKind pdv = basis == RiskBasis::PVL ? MetricKind::PDV : MetricKind::PDV_P;

  std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> pairs;
  for (const auto& r : records) {
    if (r.gamma != 100.0 || !r.value) continue;
    if (r.metric == mvl) pairs[r.participant_id].first = r.value;
    if (r.metric == pdv) pairs[r.participant_id].second = r.value;
  }
  std::vector<std::string> ids;
  std::vector<double> e_mvl, e_pdv;
  for (const auto& [id, p] : pairs) {
    if (!p.first || !p.second) continue;
    ids.push_back(id);
    e_mvl.push_back(*p.first);
    e_pdv.push_back(*p.second);
  }
  if (ids.size() < 5)
    throw Error(ErrorKind::InsufficientData,
                std::string("classify_risk: fewer than 5 participants with valid ") + to_string(mvl) +
                    " and " + to_string(pdv) + " exposures");

  RiskClassification out;
  out.n_participants = ids.size();
  out.mvl_hi = quantile(e_mvl, hi / 100.0);
  out.mvl_lo = quantile(e_mvl, lo / 100.0);
  out.pdv_hi = quantile(e_pdv, hi / 100.0);
  out.pdv_lo = quantile(e_pdv, lo / 100.0);
  out.high.label = RiskLabel::High;
  out.low.label = RiskLabel::Low;
  out.high.basis = out.low.basis = basis;

  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool is_high = e_mvl[i] >= out.mvl_hi && e_pdv[i] >= out.pdv_hi;
    const bool is_low = e_mvl[i] <= out.mvl_lo && e_pdv[i] <= out.pdv_lo;
    if (is_high) out.high.members.insert(ids[i]);
    if (is_low) out.low.members.insert(ids[i]);
    if (is_high && is_low) out.degenerate = true;
  }
  if (out.degenerate)
    spdlog::warn("classify_risk ({}): participants fall in both high and low groups; exposures are degenerate",
                 to_string(basis));

  for (RiskGroup* g : {&out.high, &out.low}) {
    for (const auto& id : g->members) {
      auto it = full_spaces.find(id);
      if (it == full_spaces.end()) continue;
      g->collective_cells.insert(it->second.begin(), it->second.end());
    }
  }
  return out;
}

}  // namespace pvlx
