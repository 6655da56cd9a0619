#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pvlx/grid.hpp"

namespace pvlx {

/// Uniform bucket grid over a point set for fixed-radius queries.
class PointBucketIndex {
 public:
  PointBucketIndex(std::span<const PointLocation> points, double bucket_size);

  /// Calls fn(point_index, distance) for every point within `radius` of
  /// `center`. Visit order is fixed by the bucket layout and insertion order.
  template <class Fn>
  void for_each_within(PointLocation center, double radius, Fn&& fn) const {
    if (points_.empty()) return;
    const auto clamp_col = [&](double x) {
      return static_cast<long>(std::floor((x - min_e_) / bucket_size_));
    };
    const auto clamp_row = [&](double y) {
      return static_cast<long>(std::floor((y - min_n_) / bucket_size_));
    };
    long c0 = clamp_col(center.easting - radius), c1 = clamp_col(center.easting + radius);
    long r0 = clamp_row(center.northing - radius), r1 = clamp_row(center.northing + radius);
    if (c1 < 0 || r1 < 0 || c0 >= n_cols_ || r0 >= n_rows_) return;
    c0 = std::max(c0, 0L);
    r0 = std::max(r0, 0L);
    c1 = std::min(c1, n_cols_ - 1);
    r1 = std::min(r1, n_rows_ - 1);
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c) {
        const std::size_t b = static_cast<std::size_t>(r * n_cols_ + c);
        for (std::uint32_t k = offsets_[b]; k < offsets_[b + 1]; ++k) {
          const std::uint32_t idx = order_[k];
          const double d = distance(center, points_[idx]);
          if (d <= radius) fn(static_cast<std::size_t>(idx), d);
        }
      }
    }
  }

  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::vector<PointLocation> points_;
  double bucket_size_ = 1.0;
  double min_e_ = 0.0;
  double min_n_ = 0.0;
  long n_cols_ = 0;
  long n_rows_ = 0;
  std::vector<std::uint32_t> offsets_;  // CSR bucket offsets, size n_buckets + 1
  std::vector<std::uint32_t> order_;    // point indices grouped by bucket
};

}  // namespace pvlx
