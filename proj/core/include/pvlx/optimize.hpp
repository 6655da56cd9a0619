#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace pvlx {

/// Objective for minimization: returns f(x) and writes the gradient.
/// A non-finite return value is treated as "outside the domain".
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BfgsOptions {
  int max_iter = 500;
  /// Converged when max_j |projected gradient_j| <= grad_tol * max(1, |f|).
  double grad_tol = 1e-9;
  double armijo = 1e-4;
  int max_backtracks = 50;
  double max_step = 5.0;  ///< cap on the infinity norm of the first trial step
};

struct BfgsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  ///< f after each accepted step, starting with f(x0)
};

/// Box-constrained BFGS with backtracking (Armijo) line search. Variables
/// pinned at a bound with the gradient pushing outward are frozen for the
/// step; the inverse-Hessian approximation is reset when that set changes.
BfgsResult minimize_bfgs(const Objective& fn, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const BfgsOptions& opts = {});

}  // namespace pvlx
