#include "pvlx/optimize.hpp"

#include <cmath>
#include <limits>

namespace pvlx {

BfgsResult minimize_bfgs(const Objective& fn, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const BfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = x0.cwiseMax(lower).cwiseMin(upper);
  res.grad.resize(n);
  res.f = fn(res.x, res.grad);
  res.evaluations = 1;
  res.trace.push_back(res.f);
  if (!std::isfinite(res.f)) return res;

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool h_fresh = true;
  std::vector<bool> frozen(n, false);
  int stalled = 0;

  const auto project = [&](const Eigen::VectorXd& x) { return x.cwiseMax(lower).cwiseMin(upper); };

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    bool set_changed = false;
    Eigen::VectorXd pg = res.grad;
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool fz = (res.x[j] <= lower[j] && res.grad[j] > 0.0) ||
                      (res.x[j] >= upper[j] && res.grad[j] < 0.0);
      if (fz != frozen[j]) set_changed = true;
      frozen[j] = fz;
      if (fz) pg[j] = 0.0;
    }
    if (pg.cwiseAbs().maxCoeff() <= opts.grad_tol * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      break;
    }
    if (set_changed && !h_fresh) {
      h_inv.setIdentity();
      h_fresh = true;
    }

    Eigen::VectorXd dir = -(h_inv * pg);
    for (Eigen::Index j = 0; j < n; ++j)
      if (frozen[j]) dir[j] = 0.0;
    if (dir.dot(pg) >= 0.0) {
      h_inv.setIdentity();
      h_fresh = true;
      dir = -pg;
    }
    double t = 1.0;
    if (h_fresh) {
      const double norm = dir.cwiseAbs().maxCoeff();
      if (norm > opts.max_step) t = opts.max_step / norm;
    }

    bool accepted = false;
    Eigen::VectorXd x_new, g_new(n);
    double f_new = 0.0;
    for (int k = 0; k < opts.max_backtracks; ++k, t *= 0.5) {
      x_new = project(res.x + t * dir);
      const Eigen::VectorXd step = x_new - res.x;
      if (step.cwiseAbs().maxCoeff() == 0.0) break;
      f_new = fn(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + opts.armijo * res.grad.dot(step)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!h_fresh) {
        h_inv.setIdentity();
        h_fresh = true;
        continue;
      }
      // No descent along steepest direction either: accept if the gradient
      // is small relative to the function scale.
      res.converged =
          pg.cwiseAbs().maxCoeff() <= 1e3 * opts.grad_tol * std::max(1.0, std::abs(res.f));
      break;
    }

    // Steps that no longer change f mean the objective's rounding floor.
    if (res.f - f_new <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(res.f)) {
      if (++stalled >= 3) {
        res.converged =
            pg.cwiseAbs().maxCoeff() <= 1e3 * opts.grad_tol * std::max(1.0, std::abs(res.f));
        break;
      }
    } else {
      stalled = 0;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (h_fresh) {
        h_inv *= sy / y.squaredNorm();
        h_fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
               rho * (hy * s.transpose() + s * hy.transpose());
    }
    res.x = x_new;
    res.f = f_new;
    res.grad = g_new;
    res.trace.push_back(res.f);
  }
  return res;
}

}  // namespace pvlx
