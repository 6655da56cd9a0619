#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pvlx {

/// Sample quantile by linear interpolation between order statistics
/// (h = (n - 1) p). `sorted` must be ascending and nonempty; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// Convenience wrapper that copies and sorts.
double quantile(std::span<const double> values, double p);

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation (n - 1); 0 when n == 1
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Throws Error(EmptySummary) on empty input.
SummaryStats summarize(std::span<const double> values);

/// Upper tail P(X > x) of a chi-square distribution with `df` degrees of freedom.
double chi_square_upper_tail(double x, double df);

/// Gauss-Hermite rule for weight exp(-x^2), nodes ascending. Weights are
/// returned on the log scale so large rules do not underflow.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

GaussHermiteRule gauss_hermite(int n);

}  // namespace pvlx
