#include "pvlx/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pvlx/error.hpp"

namespace pvlx {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidCoordinate: return "invalid-coordinate";
    case ErrorKind::Range: return "range";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::EmptyDistribution: return "empty-distribution";
    case ErrorKind::EmptySummary: return "empty-summary";
    case ErrorKind::UndefinedExposure: return "undefined-exposure";
    case ErrorKind::Degenerate: return "degenerate-model";
    case ErrorKind::PipelineOrder: return "pipeline-order";
    case ErrorKind::EmptyStratum: return "empty-stratum";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::NonConvergence: return "non-convergence";
  }
  return "unknown";
}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

void GridSpec::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size))
    throw Error(ErrorKind::InvalidArgument, "grid: cell_size must be positive");
  if (n_cols < 1 || n_rows < 1)
    throw Error(ErrorKind::InvalidArgument, "grid: n_cols and n_rows must be >= 1");
  if (!std::isfinite(origin_easting) || !std::isfinite(origin_northing))
    throw Error(ErrorKind::InvalidArgument, "grid: origin must be finite");
  if (!(std::abs(projection.ref_lat) < 90.0) || !(std::abs(projection.ref_lon) <= 180.0))
    throw Error(ErrorKind::InvalidArgument, "grid: projection reference out of range");
}

PointLocation project(double lat, double lon, const GridSpec& spec) {
  if (!std::isfinite(lat) || !std::isfinite(lon))
    throw Error(ErrorKind::InvalidCoordinate, "project: non-finite coordinate");
  if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0)
    throw Error(ErrorKind::InvalidCoordinate,
                "project: coordinate out of range (" + std::to_string(lat) + ", " +
                    std::to_string(lon) + ")");
  const auto& ref = spec.projection;
  const double coslat = std::cos(ref.ref_lat * kDegToRad);
  return PointLocation{kEarthRadiusMeters * coslat * (lon - ref.ref_lon) * kDegToRad,
                       kEarthRadiusMeters * (lat - ref.ref_lat) * kDegToRad};
}

LatLon unproject(PointLocation p, const GridSpec& spec) {
  if (!std::isfinite(p.easting) || !std::isfinite(p.northing))
    throw Error(ErrorKind::InvalidCoordinate, "unproject: non-finite coordinate");
  const auto& ref = spec.projection;
  const double coslat = std::cos(ref.ref_lat * kDegToRad);
  return LatLon{ref.ref_lat + p.northing / kEarthRadiusMeters / kDegToRad,
                ref.ref_lon + p.easting / (kEarthRadiusMeters * coslat) / kDegToRad};
}

std::optional<CellId> cell_of(PointLocation p, const GridSpec& spec) noexcept {
  const double fx = std::floor((p.easting - spec.origin_easting) / spec.cell_size);
  const double fy = std::floor((p.northing - spec.origin_northing) / spec.cell_size);
  // NaN fails both comparisons.
  if (!(fx >= 0.0 && fx < spec.n_cols && fy >= 0.0 && fy < spec.n_rows)) return std::nullopt;
  return CellId{static_cast<int>(fx), static_cast<int>(fy)};
}

PointLocation centroid(CellId c, const GridSpec& spec) {
  if (!spec.contains(c))
    throw Error(ErrorKind::Range, "centroid: cell (" + std::to_string(c.col) + ", " +
                                      std::to_string(c.row) + ") outside grid");
  return PointLocation{spec.origin_easting + (c.col + 0.5) * spec.cell_size,
                       spec.origin_northing + (c.row + 0.5) * spec.cell_size};
}

double distance(PointLocation a, PointLocation b) noexcept {
  return std::hypot(a.easting - b.easting, a.northing - b.northing);
}

}  // namespace pvlx
