#include "pvlx/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>

#include "pvlx/error.hpp"

namespace pvlx {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::EmptySummary, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "quantile: p outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptySummary, "summary of empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());

  SummaryStats s;
  s.n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  return s;
}

double chi_square_upper_tail(double x, double df) {
  if (!(df > 0.0)) throw Error(ErrorKind::InvalidArgument, "chi-square: df must be positive");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "gauss_hermite: need n >= 1");
  // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix of the
  // Hermite recurrence, off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.log_weights.resize(n);
  // Orthonormal Hermite recurrence: p_0 .. p_{n-1} at x, returns p_n.
  const auto recur = [n](double x, double& pn_1, double& christoffel) {
    double prev = 0.0, cur = std::pow(std::numbers::pi, -0.25);
    christoffel = cur * cur;
    for (int k = 0; k < n; ++k) {
      const double next = std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
      prev = cur;
      cur = next;
      if (k + 1 < n) christoffel += cur * cur;
    }
    pn_1 = prev;
    return cur;
  };
  for (int k = 0; k < n; ++k) {
    // Newton polish of the eigenvalue, then the Christoffel weight.
    double x = eig.eigenvalues()(k), pn_1 = 0.0, ch = 0.0;
    for (int it = 0; it < 3; ++it) {
      const double pn = recur(x, pn_1, ch);
      if (pn_1 == 0.0) break;
      x -= pn / (std::sqrt(2.0 * n) * pn_1);
    }
    recur(x, pn_1, ch);
    rule.nodes[k] = x;
    rule.log_weights[k] = -std::log(ch);
  }
  // Symmetrize to remove eigen-solver round-off in the odd moments.
  for (int k = 0; k < n / 2; ++k) {
    const int m = n - 1 - k;
    const double x = 0.5 * (rule.nodes[m] - rule.nodes[k]);
    rule.nodes[k] = -x;
    rule.nodes[m] = x;
    const double lw = 0.5 * (rule.log_weights[k] + rule.log_weights[m]);
    rule.log_weights[k] = rule.log_weights[m] = lw;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace pvlx
