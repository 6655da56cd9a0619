#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvlx/stats.hpp"

namespace pvlx {

/// One participant at one activity-space level.
struct RegressionRow {
  std::string participant_id;
  double gamma = 50.0;
  double response = 0.0;  ///< contextual exposure, >= 0
  int male = 0;
  double n_grids = 0.0;  ///< |A_gamma|
  double age = 0.0;      ///< years
};

/// Fixed-effect columns, in design order.
enum class Term { Intercept = 0, Male, Grids, Age, Age2, Age3 };
inline constexpr int kNumTerms = 6;
const char* to_string(Term t) noexcept;

/// Design for log mu = b0 + b_i + b1 Male + b2 Grids + b3 z + b4 z^2 + b5 z^3,
/// z = (age - age_center) / age_scale.
struct Design {
  Eigen::MatrixXd x;  ///< n x 6
  Eigen::VectorXd y;
  std::vector<int> subject;  ///< row -> subject index, rows of a subject contiguous
  std::vector<std::string> subject_ids;
  std::vector<int> subject_start;  ///< size n_subjects + 1
  double age_center = 0.0;
  double age_scale = 1.0;
  std::array<bool, kNumTerms> constant_column{};  ///< non-intercept column with no variation
  std::vector<std::string> warnings;

  int n_subjects() const noexcept { return static_cast<int>(subject_ids.size()); }
};

/// Groups rows by participant (first-appearance order), standardizes age
/// (mean 0, unit population variance over rows) and forms the polynomial
/// columns. Throws Error(InvalidArgument) for a negative or non-finite
/// response and Error(Degenerate) for a constant response. Constant
/// covariate columns and single-level data are reported in `warnings`.
Design build_design(std::span<const RegressionRow> rows);

/// Negative binomial log density with mean mu and Var = mu + mu^2 / phi,
/// extended to real y >= 0 through log-gamma.
double nb_log_density(double y, double mu, double phi);

/// Marginal log-likelihood of the random-intercept NB model, integrated per
/// subject by adaptive Gauss-Hermite quadrature (or the plain NB likelihood
/// when the random intercept is disabled). Parameters are laid out as
/// [beta (one per column of x), log phi, log sigma_b]; the last entry is
/// absent without a random intercept.
class NbMarginalLikelihood {
 public:
  NbMarginalLikelihood(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<int> subject_start,
                       int quadrature_points, bool random_intercept = true);

  int n_params() const noexcept {
    return static_cast<int>(x_.cols()) + (random_intercept_ ? 2 : 1);
  }
  bool random_intercept() const noexcept { return random_intercept_; }
  int n_subjects() const noexcept { return static_cast<int>(subject_start_.size()) - 1; }

  double value(const Eigen::VectorXd& theta) const;
  /// Value and exact gradient of the quadrature approximation, including the
  /// dependence of the adaptive nodes on the parameters.
  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

  /// Per-subject conditional modes of b at theta.
  Eigen::VectorXd modes(const Eigen::VectorXd& theta) const;

 private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::vector<int> subject_start_;
  GaussHermiteRule rule_;
  bool random_intercept_;
};

struct NbGlmmFit;

struct FitConfig {
  int quadrature_points = 15;
  int max_iter = 500;
  double tol = 1e-9;
  bool random_intercept = true;
  bool compute_se = true;
  int min_subjects = 10;
  std::vector<Term> dropped;  ///< columns fixed at zero (reduced models)
  const NbGlmmFit* warm_start = nullptr;  ///< skips the fixed-effects start when set
};

struct NbGlmmFit {
  std::array<double, kNumTerms> beta{};
  std::array<double, kNumTerms> se{};  ///< NaN when not estimated
  std::array<bool, kNumTerms> estimated{};
  double phi = 1.0;
  double sigma_b2 = 0.0;
  double loglik = 0.0;
  bool converged = false;
  bool sigma_at_boundary = false;
  int iterations = 0;
  double age_center = 0.0;
  double age_scale = 1.0;
  int quadrature_points = 15;
  int n_obs = 0;
  int n_subjects = 0;
  std::vector<double> loglik_trace;  ///< marginal log-likelihood per accepted step
  std::vector<std::string> warnings;
};

NbGlmmFit fit(const Design& design, const FitConfig& config = {});
NbGlmmFit fit(std::span<const RegressionRow> rows, const FitConfig& config = {});

enum class LrtBlock { Age, Male, Grids };
const char* to_string(LrtBlock b) noexcept;
std::vector<Term> block_terms(LrtBlock b);

struct LrtResult {
  LrtBlock block = LrtBlock::Grids;
  double deviance = 0.0;  ///< 2 (l_full - l_reduced), clamped at 0
  int df = 1;
  std::optional<double> p_value;  ///< empty when the reduced fit failed
  bool reduced_converged = false;
  double reduced_loglik = 0.0;
};

/// Refits without the block's columns (warm-started from `full`) and compares.
LrtResult lrt(const NbGlmmFit& full, const Design& design, LrtBlock block,
              const FitConfig& config = {});
LrtResult lrt(const NbGlmmFit& full, std::span<const RegressionRow> rows, LrtBlock block,
              const FitConfig& config = {});

/// Linear predictor at b_i = 0, using the fit's stored age transform. Terms
/// left out of a fit hold zero coefficients.
double predict_log_mu(const NbGlmmFit& fit, const RegressionRow& row);

}  // namespace pvlx
