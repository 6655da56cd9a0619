#include "pvlx/surface.hpp"

#include <cmath>
#include <limits>
#include <spdlog/spdlog.h>
#include <string>

#include "pvlx/error.hpp"
#include "pvlx/spatial_index.hpp"

namespace pvlx {

PointBucketIndex::PointBucketIndex(std::span<const PointLocation> points, double bucket_size)
    : points_(points.begin(), points.end()), bucket_size_(bucket_size) {
  if (!(bucket_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "index: bucket size must be > 0");
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorKind::InvalidArgument, "index: too many points");
  if (points_.empty()) {
    offsets_.assign(1, 0);
    return;
  }
  double max_e = points_[0].easting, max_n = points_[0].northing;
  min_e_ = max_e;
  min_n_ = max_n;
  for (const auto& p : points_) {
    if (!std::isfinite(p.easting) || !std::isfinite(p.northing))
      throw Error(ErrorKind::InvalidCoordinate, "index: non-finite point");
    min_e_ = std::min(min_e_, p.easting);
    min_n_ = std::min(min_n_, p.northing);
    max_e = std::max(max_e, p.easting);
    max_n = std::max(max_n, p.northing);
  }
  n_cols_ = static_cast<long>(std::floor((max_e - min_e_) / bucket_size_)) + 1;
  n_rows_ = static_cast<long>(std::floor((max_n - min_n_) / bucket_size_)) + 1;
  const std::size_t n_buckets = static_cast<std::size_t>(n_cols_ * n_rows_);

  std::vector<std::uint32_t> bucket_of(points_.size());
  offsets_.assign(n_buckets + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const long c = static_cast<long>(std::floor((points_[i].easting - min_e_) / bucket_size_));
    const long r = static_cast<long>(std::floor((points_[i].northing - min_n_) / bucket_size_));
    bucket_of[i] = static_cast<std::uint32_t>(r * n_cols_ + c);
    ++offsets_[bucket_of[i] + 1];
  }
  for (std::size_t b = 0; b < n_buckets; ++b) offsets_[b + 1] += offsets_[b];
  order_.resize(points_.size());
  std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i)
    order_[cursor[bucket_of[i]]++] = static_cast<std::uint32_t>(i);
}

void KernelParams::validate() const {
  if (!(sigma_km > 0.0) || !(radius_km > 0.0))
    throw Error(ErrorKind::InvalidArgument, "kernel: sigma and radius must be positive");
}

double kernel_weight(double d_m, const KernelParams& k) noexcept {
  const double radius_m = k.radius_km * 1000.0;
  if (!(d_m <= radius_m)) return 0.0;
  const double s = k.sigma_km * 1000.0;
  return std::exp(-(d_m * d_m) / (2.0 * s * s));
}

const char* to_string(MetricKind m) noexcept {
  switch (m) {
    case MetricKind::MVL: return "MVL";
    case MetricKind::PDV: return "PDV";
    case MetricKind::CTI: return "CTI";
    case MetricKind::MVL_P: return "MVL_P";
    case MetricKind::PDV_P: return "PDV_P";
    case MetricKind::CTI_P: return "CTI_P";
  }
  return "?";
}

MetricKind parse_metric(std::string_view name) {
  for (MetricKind m : kAllMetrics)
    if (name == to_string(m)) return m;
  throw Error(ErrorKind::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

void CtiParams::validate() const {
  if (!(beta0 > 0.0 && beta0 < 1.0)) throw Error(ErrorKind::InvalidArgument, "cti: beta0 must be in (0, 1)");
  if (!(c > 1.0)) throw Error(ErrorKind::InvalidArgument, "cti: c must exceed 1");
  if (!(v0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "cti: v0 must be positive");
  if (acts < 1) throw Error(ErrorKind::InvalidArgument, "cti: acts must be >= 1");
  if (!(pdv_threshold >= 0.0)) throw Error(ErrorKind::InvalidArgument, "cti: bad PDV threshold");
}

double transmission_probability(double vl, const CtiParams& p) noexcept {
  const double beta1 = p.beta0 * std::pow(p.c, std::log10(vl / p.v0));
  return std::clamp(beta1, 0.0, 1.0);
}

double cti_individual(double vl, const CtiParams& p) noexcept {
  const double beta1 = transmission_probability(vl, p);
  // 1 - (1 - b)^n without cancellation for small b.
  return -std::expm1(p.acts * std::log1p(-beta1)) * 100.0;
}

std::optional<double> individual_metric(const PersonYearRecord& rec, MetricKind kind,
                                        const CtiParams& p, double vl_floor) {
  if (!rec.positive()) {
    if (!is_population_based(kind)) return std::nullopt;
    return 0.0;
  }
  if (!rec.viral_load)
    throw Error(ErrorKind::PipelineOrder, "individual_metric: HIV-positive record " + rec.person_id +
                                              "/" + std::to_string(rec.year) +
                                              " has no viral load; impute first");
  const double vl = *rec.viral_load;
  switch (kind) {
    case MetricKind::MVL:
    case MetricKind::MVL_P: return std::log10(std::max(vl, vl_floor));
    case MetricKind::PDV:
    case MetricKind::PDV_P: return vl > p.pdv_threshold ? 100.0 : 0.0;
    case MetricKind::CTI:
    case MetricKind::CTI_P: return cti_individual(std::max(vl, vl_floor), p);
  }
  return std::nullopt;
}

std::size_t Surface::unmasked_count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values) n += v.has_value();
  return n;
}

std::array<Surface, 6> smooth_all(const SmoothingInput& in) {
  in.grid.validate();
  in.kernel.validate();
  if (!(in.vl_floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "smooth: vl_floor must be > 0");

  // Per-contributor metric values; NaN marks "excluded".
  const std::size_t n = in.records.size();
  std::vector<PointLocation> homes;
  std::vector<std::array<double, 6>> x;
  homes.reserve(n);
  x.reserve(n);
  std::array<std::size_t, 6> contributors{};
  for (const auto& r : in.records) {
    if (!r.homestead) continue;
    std::array<double, 6> row;
    for (MetricKind m : kAllMetrics) {
      const auto v = individual_metric(r, m, in.cti, in.vl_floor);
      row[metric_index(m)] = v ? *v : std::numeric_limits<double>::quiet_NaN();
      contributors[metric_index(m)] += v.has_value();
    }
    homes.push_back(*r.homestead);
    x.push_back(row);
  }
  for (MetricKind m : kAllMetrics)
    if (contributors[metric_index(m)] == 0)
      spdlog::warn("smooth: no contributors for {} in {}; surface fully masked", to_string(m), in.year);

  std::array<Surface, 6> out;
  for (MetricKind m : kAllMetrics) {
    auto& s = out[metric_index(m)];
    s.metric = m;
    s.year = in.year;
    s.grid = in.grid;
    s.values.assign(in.grid.cell_count(), std::nullopt);
  }
  if (homes.empty()) return out;

  const double radius_m = in.kernel.radius_km * 1000.0;
  const PointBucketIndex index(homes, std::max(radius_m / 4.0, in.grid.cell_size));
  const auto n_cells = static_cast<std::ptrdiff_t>(in.grid.cell_count());

#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t ci = 0; ci < n_cells; ++ci) {
    const CellId cell = in.grid.cell_at(static_cast<std::size_t>(ci));
    const PointLocation c = centroid(cell, in.grid);
    std::array<double, 6> sw{}, swx{};
    index.for_each_within(c, radius_m, [&](std::size_t j, double d) {
      const double w = kernel_weight(d, in.kernel);
      if (w == 0.0) return;
      for (std::size_t m = 0; m < 6; ++m) {
        const double v = x[j][m];
        if (std::isnan(v)) continue;
        sw[m] += w;
        swx[m] += w * v;
      }
    });
    for (std::size_t m = 0; m < 6; ++m)
      if (sw[m] > 0.0) out[m].values[static_cast<std::size_t>(ci)] = swx[m] / sw[m];
  }
  return out;
}

Surface smooth_surface(const SmoothingInput& in, MetricKind kind) {
  auto all = smooth_all(in);
  return std::move(all[metric_index(kind)]);
}

SummaryStats surface_summary(const Surface& s) {
  std::vector<double> v;
  v.reserve(s.values.size());
  const bool log_cti = s.metric == MetricKind::CTI || s.metric == MetricKind::CTI_P;
  std::size_t dropped = 0;
  for (const auto& val : s.values) {
    if (!val) continue;
    if (log_cti) {
      if (*val > 0.0)
        v.push_back(std::log10(*val));
      else
        ++dropped;
    } else {
      v.push_back(*val);
    }
  }
  if (dropped > 0)
    spdlog::warn("summary: {} {} cell(s) with non-positive value left out of the log10 summary",
                 dropped, to_string(s.metric));
  if (v.empty())
    throw Error(ErrorKind::EmptySummary,
                std::string("summary: no summarizable cells for ") + to_string(s.metric));
  return summarize(v);
}

}  // namespace pvlx
