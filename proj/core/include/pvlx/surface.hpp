#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pvlx/cohort.hpp"
#include "pvlx/grid.hpp"
#include "pvlx/stats.hpp"

namespace pvlx {

/// Truncated Gaussian kernel. The default bandwidth is 3 km over the
/// two-sided 99% normal quantile, i.e. ~1.1646 km.
struct KernelParams {
  double sigma_km = 3.0 / 2.5758;
  double radius_km = 3.0;

  void validate() const;
};

/// exp(-d^2 / (2 sigma^2)) for d <= radius, 0 beyond. `d_m` in meters.
double kernel_weight(double d_m, const KernelParams& k) noexcept;

enum class MetricKind { MVL, PDV, CTI, MVL_P, PDV_P, CTI_P };

inline constexpr std::array<MetricKind, 6> kAllMetrics{
    MetricKind::MVL,   MetricKind::PDV,   MetricKind::CTI,
    MetricKind::MVL_P, MetricKind::PDV_P, MetricKind::CTI_P};

const char* to_string(MetricKind m) noexcept;
/// Throws Error(InvalidArgument) on an unknown name.
MetricKind parse_metric(std::string_view name);

constexpr bool is_population_based(MetricKind m) noexcept {
  return m == MetricKind::MVL_P || m == MetricKind::PDV_P || m == MetricKind::CTI_P;
}
constexpr bool is_log_scale_summary(MetricKind m) noexcept {
  return m != MetricKind::PDV && m != MetricKind::PDV_P;
}
constexpr std::size_t metric_index(MetricKind m) noexcept { return static_cast<std::size_t>(m); }

struct CtiParams {
  double beta0 = 0.003;  ///< per-act transmission probability at v0
  double c = 2.45;       ///< multiplier per log10 increase
  double v0 = 150.0;     ///< reference viral load, copies/ml
  int acts = 100;
  double pdv_threshold = 1550.0;  ///< detectable viremia: VL strictly above

  void validate() const;
};

/// Per-act probability beta0 * c^log10(v / v0), clamped to [0, 1].
double transmission_probability(double vl, const CtiParams& p) noexcept;

/// (1 - (1 - beta1)^acts) * 100. `vl` must already be floored (> 0).
double cti_individual(double vl, const CtiParams& p) noexcept;

/// Individual-level contribution of one record to a metric; std::nullopt
/// when the record does not contribute (HIV-negatives for MVL/PDV/CTI).
/// Throws Error(PipelineOrder) for a positive without a resolved VL.
std::optional<double> individual_metric(const PersonYearRecord& rec, MetricKind kind,
                                        const CtiParams& p, double vl_floor);

/// One metric on one grid for one year. MVL kinds hold weighted means of
/// log10 VL; other kinds are on their natural scale.
struct Surface {
  MetricKind metric = MetricKind::MVL;
  int year = 0;
  GridSpec grid;
  std::vector<std::optional<double>> values;  ///< indexed by GridSpec::index

  const std::optional<double>& at(CellId c) const { return values[grid.index(c)]; }
  std::size_t unmasked_count() const noexcept;
};

struct SmoothingInput {
  std::span<const PersonYearRecord> records;  ///< eligible, imputed, one year
  int year = 0;
  GridSpec grid;
  KernelParams kernel;
  CtiParams cti;
  double vl_floor = 1.0;
};

/// All six surfaces in kAllMetrics order, sharing one kernel evaluation per
/// (cell, homestead) pair. Only homesteads within the kernel radius of a
/// centroid are visited. Deterministic for any thread count.
std::array<Surface, 6> smooth_all(const SmoothingInput& in);

Surface smooth_surface(const SmoothingInput& in, MetricKind kind);

/// Summary over unmasked cells. MVL kinds are summarized as stored (log10);
/// CTI kinds are log10-transformed per cell first, and cells with CTI <= 0
/// are left out of that summary. Throws Error(EmptySummary) if nothing is
/// left to summarize.
SummaryStats surface_summary(const Surface& s);

}  // namespace pvlx
