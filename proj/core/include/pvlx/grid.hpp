#pragma once

#include <compare>
#include <cstddef>
#include <optional>

namespace pvlx {

/// Mean Earth radius used by the local equirectangular projection.
inline constexpr double kEarthRadiusMeters = 6'371'000.0;

/// Planar position in meters, relative to the grid's projection reference.
struct PointLocation {
  double easting = 0.0;
  double northing = 0.0;

  friend bool operator==(const PointLocation&, const PointLocation&) = default;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Grid cell address. Ordered row-major, so ascending CellId is ascending
/// linear index.
struct CellId {
  int col = 0;
  int row = 0;

  friend bool operator==(const CellId&, const CellId&) = default;
  friend std::strong_ordering operator<=>(const CellId& a, const CellId& b) {
    if (auto c = a.row <=> b.row; c != 0) return c;
    return a.col <=> b.col;
  }
};

struct Projection {
  double ref_lat = 0.0;  ///< degrees
  double ref_lon = 0.0;  ///< degrees
};

/// Square-cell planar grid. Cell (col, row) covers
/// [origin + col*size, origin + (col+1)*size) x [... row ...).
struct GridSpec {
  double origin_easting = 0.0;
  double origin_northing = 0.0;
  double cell_size = 100.0;
  int n_cols = 1;
  int n_rows = 1;
  Projection projection;

  /// Throws Error(InvalidArgument) if the geometry is unusable.
  void validate() const;

  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(n_cols) * static_cast<std::size_t>(n_rows);
  }
  bool contains(CellId c) const noexcept {
    return c.col >= 0 && c.col < n_cols && c.row >= 0 && c.row < n_rows;
  }
  std::size_t index(CellId c) const noexcept {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(n_cols) +
           static_cast<std::size_t>(c.col);
  }
  CellId cell_at(std::size_t index) const noexcept {
    return CellId{static_cast<int>(index % static_cast<std::size_t>(n_cols)),
                  static_cast<int>(index / static_cast<std::size_t>(n_cols))};
  }
  double width() const noexcept { return cell_size * n_cols; }
  double height() const noexcept { return cell_size * n_rows; }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.origin_easting == b.origin_easting && a.origin_northing == b.origin_northing &&
           a.cell_size == b.cell_size && a.n_cols == b.n_cols && a.n_rows == b.n_rows &&
           a.projection.ref_lat == b.projection.ref_lat &&
           a.projection.ref_lon == b.projection.ref_lon;
  }
};

/// Local equirectangular projection about the grid's reference point.
PointLocation project(double lat, double lon, const GridSpec& spec);
LatLon unproject(PointLocation p, const GridSpec& spec);

/// Floor binning; std::nullopt means the point lies outside the grid.
std::optional<CellId> cell_of(PointLocation p, const GridSpec& spec) noexcept;

/// Throws Error(Range) for a CellId outside the grid.
PointLocation centroid(CellId c, const GridSpec& spec);

double distance(PointLocation a, PointLocation b) noexcept;

}  // namespace pvlx
