#include "pvlx/nbglmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <spdlog/spdlog.h>

#include "pvlx/error.hpp"
#include "pvlx/optimize.hpp"

namespace pvlx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogPhiMin = -10.0;
constexpr double kLogPhiMax = 14.0;
constexpr double kLogSigmaMin = -9.0;  // sigma_b^2 ~ 1.5e-8, reported as 0
constexpr double kLogSigmaMax = 3.0;
constexpr double kLogSigmaStart = -2.302585092994046;  // log(0.1)
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

const char* to_string(Term t) noexcept {
  switch (t) {
    case Term::Intercept: return "(Intercept)";
    case Term::Male: return "Male";
    case Term::Grids: return "#Grids";
    case Term::Age: return "Age";
    case Term::Age2: return "Age^2";
    case Term::Age3: return "Age^3";
  }
  return "?";
}

const char* to_string(LrtBlock b) noexcept {
  switch (b) {
    case LrtBlock::Age: return "Age";
    case LrtBlock::Male: return "Male";
    case LrtBlock::Grids: return "#Grids";
  }
  return "?";
}

std::vector<Term> block_terms(LrtBlock b) {
  switch (b) {
    case LrtBlock::Age: return {Term::Age, Term::Age2, Term::Age3};
    case LrtBlock::Male: return {Term::Male};
    case LrtBlock::Grids: return {Term::Grids};
  }
  return {};
}

Design build_design(std::span<const RegressionRow> rows) {
  if (rows.empty()) throw Error(ErrorKind::InsufficientData, "build_design: no rows");

  std::map<std::string, int> index_of;
  std::vector<std::vector<std::size_t>> members;
  Design d;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!(r.response >= 0.0) || !std::isfinite(r.response))
      throw Error(ErrorKind::InvalidArgument,
                  "build_design: response must be finite and >= 0 (participant " + r.participant_id + ")");
    if (!std::isfinite(r.age) || !std::isfinite(r.n_grids))
      throw Error(ErrorKind::InvalidArgument, "build_design: non-finite covariate for " + r.participant_id);
    auto [it, inserted] = index_of.try_emplace(r.participant_id, static_cast<int>(members.size()));
    if (inserted) {
      members.emplace_back();
      d.subject_ids.push_back(r.participant_id);
    }
    members[static_cast<std::size_t>(it->second)].push_back(i);
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  double age_sum = 0.0;
  for (const auto& r : rows) age_sum += r.age;
  d.age_center = age_sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& r : rows) ss += (r.age - d.age_center) * (r.age - d.age_center);
  d.age_scale = std::sqrt(ss / static_cast<double>(n));
  if (!(d.age_scale > 0.0)) d.age_scale = 1.0;

  d.x.resize(n, kNumTerms);
  d.y.resize(n);
  d.subject.reserve(rows.size());
  d.subject_start.push_back(0);
  Eigen::Index k = 0;
  for (std::size_t s = 0; s < members.size(); ++s) {
    for (std::size_t i : members[s]) {
      const auto& r = rows[i];
      const double z = (r.age - d.age_center) / d.age_scale;
      d.x(k, 0) = 1.0;
      d.x(k, 1) = r.male;
      d.x(k, 2) = r.n_grids;
      d.x(k, 3) = z;
      d.x(k, 4) = z * z;
      d.x(k, 5) = z * z * z;
      d.y[k] = r.response;
      d.subject.push_back(static_cast<int>(s));
      ++k;
    }
    d.subject_start.push_back(static_cast<int>(k));
  }

  if (d.y.maxCoeff() == d.y.minCoeff())
    throw Error(ErrorKind::Degenerate, "build_design: response is constant");
  for (int j = 1; j < kNumTerms; ++j) {
    const auto col = d.x.col(j);
    if (col.maxCoeff() == col.minCoeff()) {
      d.constant_column[static_cast<std::size_t>(j)] = true;
      d.warnings.push_back(std::string("column ") + to_string(static_cast<Term>(j)) +
                           " is constant and will not be estimated");
    }
  }
  bool any_repeat = false;
  for (std::size_t s = 0; s < members.size(); ++s) any_repeat |= members[s].size() >= 2;
  if (!any_repeat)
    d.warnings.emplace_back("every participant has a single row; sigma_b^2 is weakly identified");
  if (members.size() < 10)
    d.warnings.push_back("only " + std::to_string(members.size()) + " participants");
  return d;
}

namespace {

constexpr double kStirlingPhi = 1e5;

// log Gamma(phi + y) - log Gamma(phi), Stirling differences for large phi.
double log_gamma_ratio(double y, double phi) {
  if (phi < kStirlingPhi) return std::lgamma(y + phi) - std::lgamma(phi);
  const double z = phi + y;
  return (phi - 0.5) * std::log1p(y / phi) + y * std::log(z) - y + 1.0 / (12.0 * z) - 1.0 / (12.0 * phi) -
         1.0 / (360.0 * z * z * z) + 1.0 / (360.0 * phi * phi * phi);
}

// digamma(phi + y) - digamma(phi); the derivative of log_gamma_ratio in phi.
double digamma_diff(double y, double phi) {
  if (phi < kStirlingPhi) return boost::math::digamma(y + phi) - boost::math::digamma(phi);
  const double z = phi + y;
  return std::log1p(y / phi) - 0.5 / z + 0.5 / phi - 1.0 / (12.0 * z * z) + 1.0 / (12.0 * phi * phi) +
         1.0 / (120.0 * z * z * z * z) - 1.0 / (120.0 * phi * phi * phi * phi);
}

}  // namespace

double nb_log_density(double y, double mu, double phi) {
  return log_gamma_ratio(y, phi) - std::lgamma(y + 1.0) -
         phi * std::log1p(mu / phi) + y * (std::log(mu) - std::log(phi + mu));
}

NbMarginalLikelihood::NbMarginalLikelihood(Eigen::MatrixXd x, Eigen::VectorXd y,
                                           std::vector<int> subject_start, int quadrature_points,
                                           bool random_intercept)
    : x_(std::move(x)),
      y_(std::move(y)),
      subject_start_(std::move(subject_start)),
      rule_(gauss_hermite(quadrature_points)),
      random_intercept_(random_intercept) {
  if (x_.rows() != y_.size())
    throw Error(ErrorKind::InvalidArgument, "likelihood: x and y sizes differ");
  if (subject_start_.size() < 2 || subject_start_.front() != 0 ||
      subject_start_.back() != static_cast<int>(y_.size()))
    throw Error(ErrorKind::InvalidArgument, "likelihood: bad subject partition");
}

double NbMarginalLikelihood::value(const Eigen::VectorXd& theta) const {
  return evaluate(theta, nullptr);
}

double NbMarginalLikelihood::value_and_gradient(const Eigen::VectorXd& theta,
                                                Eigen::VectorXd& grad) const {
  grad.resize(n_params());
  return evaluate(theta, &grad);
}

namespace {

struct ModeResult {
  double b = 0.0;
  double h = 0.0;  // -f''(b)
};

// Newton with bisection safeguard on the (strictly decreasing) score in b.
template <class Score>
ModeResult find_mode(Score&& score) {
  double b = 0.0, lo = -std::numeric_limits<double>::infinity(),
         hi = std::numeric_limits<double>::infinity();
  double g = 0.0, h = 0.0;
  for (int it = 0; it < 200; ++it) {
    score(b, g, h);
    if (g == 0.0) break;
    if (g > 0.0)
      lo = b;
    else
      hi = b;
    double next = b + g / h;
    if (!(next > lo && next < hi)) {
      if (std::isfinite(lo) && std::isfinite(hi))
        next = 0.5 * (lo + hi);
      else
        next = g > 0.0 ? b + std::max(1.0, 2.0 * std::abs(b)) : b - std::max(1.0, 2.0 * std::abs(b));
    }
    const double step = next - b;
    b = next;
    if (std::abs(step) <= 1e-13 * std::max(1.0, std::abs(b))) {
      score(b, g, h);
      break;
    }
  }
  return {b, h};
}

}  // namespace

Eigen::VectorXd NbMarginalLikelihood::modes(const Eigen::VectorXd& theta) const {
  const Eigen::Index p = x_.cols();
  const Eigen::VectorXd eta = x_ * theta.head(p);
  const double phi = std::exp(theta[p]);
  const double inv_s2 = random_intercept_ ? std::exp(-2.0 * theta[p + 1]) : 0.0;
  Eigen::VectorXd out(n_subjects());
  for (int i = 0; i < n_subjects(); ++i) {
    const int a = subject_start_[i], e = subject_start_[i + 1];
    out[i] = find_mode([&](double b, double& g, double& h) {
               g = -b * inv_s2;
               h = inv_s2;
               for (int j = a; j < e; ++j) {
                 const double mu = std::exp(eta[j] + b);
                 const double den = phi + mu;
                 g += phi * (y_[j] - mu) / den;
                 h += (y_[j] + phi) * phi * mu / (den * den);
               }
             }).b;
  }
  return out;
}

double NbMarginalLikelihood::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  const Eigen::Index p = x_.cols();
  const Eigen::Index n = x_.rows();
  if (theta.size() != n_params()) throw Error(ErrorKind::InvalidArgument, "likelihood: bad parameter size");
  const Eigen::VectorXd eta = x_ * theta.head(p);
  const double tau = theta[p];
  const double phi = std::exp(tau);

  // Terms of the NB log density that do not depend on the linear predictor.
  Eigen::VectorXd lg(n), dg(grad ? n : 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double y = y_[j];
    lg[j] = log_gamma_ratio(y, phi) - std::lgamma(y + 1.0);
    if (grad) dg[j] = digamma_diff(y, phi);
  }

  const int n_subj = n_subjects();
  const int np = n_params();
  std::vector<double> ll(static_cast<std::size_t>(n_subj), 0.0);
  Eigen::MatrixXd gsub;
  if (grad) gsub.setZero(np, n_subj);

  if (!random_intercept_) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_subj; ++i) {
      double acc = 0.0;
      for (int j = subject_start_[i]; j < subject_start_[i + 1]; ++j) {
        const double y = y_[j];
        const double mu = std::exp(eta[j]);
        const double den = phi + mu;
        acc += lg[j] + y * eta[j] - phi * std::log1p(mu / phi) - y * std::log(den);
        if (grad) {
          const double l_eta = phi * (y - mu) / den;
          gsub.col(i).head(p) += l_eta * x_.row(j).transpose();
          gsub(p, i) += phi * (dg[j] - std::log1p(mu / phi) + (mu - y) / den);
        }
      }
      ll[static_cast<std::size_t>(i)] = acc;
    }
  } else {
    const double rho = theta[p + 1];
    const double inv_s2 = std::exp(-2.0 * rho);
    const auto& nodes = rule_.nodes;
    const auto& lw = rule_.log_weights;
    const int K = static_cast<int>(nodes.size());

#pragma omp parallel
    {
      std::vector<double> mu_buf;
      std::vector<double> logterm(static_cast<std::size_t>(K)), bk(static_cast<std::size_t>(K)),
          pi(static_cast<std::size_t>(K));
#pragma omp for schedule(static)
      for (int i = 0; i < n_subj; ++i) {
        const int a = subject_start_[i], e = subject_start_[i + 1];
        const int m = e - a;
        const ModeResult mode = find_mode([&](double b, double& g, double& h) {
          g = -b * inv_s2;
          h = inv_s2;
          for (int j = a; j < e; ++j) {
            const double mu = std::exp(eta[j] + b);
            const double den = phi + mu;
            g += phi * (y_[j] - mu) / den;
            h += (y_[j] + phi) * phi * mu / (den * den);
          }
        });
        const double bhat = mode.b;
        const double h = mode.h;
        const double s = 1.0 / std::sqrt(h);

        double lg_sum = 0.0;
        for (int j = a; j < e; ++j) lg_sum += lg[j];

        mu_buf.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(K));
        double max_term = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
          const double b = bhat + std::numbers::sqrt2 * s * nodes[k];
          bk[k] = b;
          double f = -kHalfLog2Pi - rho - 0.5 * b * b * inv_s2;
          for (int j = a; j < e; ++j) {
            const double y = y_[j];
            const double et = eta[j] + b;
            const double mu = std::exp(et);
            mu_buf[static_cast<std::size_t>(k * m + (j - a))] = mu;
            f += y * et - phi * std::log1p(mu / phi) - y * std::log(phi + mu);
          }
          logterm[k] = lw[k] + nodes[k] * nodes[k] + f;
          max_term = std::max(max_term, logterm[k]);
        }
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
          pi[k] = std::exp(logterm[k] - max_term);
          sum += pi[k];
        }
        ll[static_cast<std::size_t>(i)] =
            lg_sum + std::log(std::numbers::sqrt2 * s) + max_term + std::log(sum);
        if (!grad) continue;
        for (int k = 0; k < K; ++k) pi[k] /= sum;

        // Derivatives at the mode, used for d(bhat)/dtheta and d(s)/dtheta.
        Eigen::VectorXd fb_beta = Eigen::VectorXd::Zero(p), fbb_beta = Eigen::VectorXd::Zero(p);
        double fbbb = 0.0, fb_tau = 0.0, fbb_tau = 0.0;
        for (int j = a; j < e; ++j) {
          const double y = y_[j];
          const double mu = std::exp(eta[j] + bhat);
          const double den = phi + mu;
          const double den2 = den * den, den3 = den2 * den;
          const double l_ee = -(y + phi) * phi * mu / den2;
          const double l_eee = -(y + phi) * phi * mu * (phi - mu) / den3;
          const double l_et = phi * (y - mu) * mu / den2;
          const double dg_dphi = ((2.0 * phi + y) * den - 2.0 * (y + phi) * phi) / den3;
          const double l_eet = -phi * mu * dg_dphi;
          fb_beta += l_ee * x_.row(j).transpose();
          fbb_beta += l_eee * x_.row(j).transpose();
          fbbb += l_eee;
          fb_tau += l_et;
          fbb_tau += l_eet;
        }
        const double fb_rho = 2.0 * bhat * inv_s2;
        const double fbb_rho = 2.0 * inv_s2;

        // Softmax-weighted node quantities.
        Eigen::VectorXd g_beta = Eigen::VectorXd::Zero(p);
        double g_tau = 0.0, g_rho = 0.0, F1 = 0.0, F2 = 0.0;
        for (int j = a; j < e; ++j) {
          const double y = y_[j];
          double a_j = 0.0;
          for (int k = 0; k < K; ++k) {
            const double mu = mu_buf[static_cast<std::size_t>(k * m + (j - a))];
            const double den = phi + mu;
            const double l_eta = phi * (y - mu) / den;
            a_j += pi[k] * l_eta;
            g_tau += pi[k] * phi * (-std::log1p(mu / phi) + (mu - y) / den);
          }
          g_beta += a_j * x_.row(j).transpose();
          g_tau += phi * dg[j];
        }
        for (int k = 0; k < K; ++k) {
          double fb = -bk[k] * inv_s2;
          for (int j = a; j < e; ++j) {
            const double mu = mu_buf[static_cast<std::size_t>(k * m + (j - a))];
            fb += phi * (y_[j] - mu) / (phi + mu);
          }
          F1 += pi[k] * fb;
          F2 += pi[k] * fb * std::numbers::sqrt2 * nodes[k];
          g_rho += pi[k] * (-1.0 + bk[k] * bk[k] * inv_s2);
        }

        // d/dtheta = dlog s + sum_k pi_k df_k/dtheta + F1 dbhat + F2 ds.
        const auto chain = [&](double fb_t, double fbb_t) {
          const double db = fb_t / h;
          const double dlog_s = 0.5 * (fbbb * db + fbb_t) / h;
          return dlog_s + F1 * db + F2 * s * dlog_s;
        };
        auto col = gsub.col(i);
        for (Eigen::Index q = 0; q < p; ++q) col[q] = g_beta[q] + chain(fb_beta[q], fbb_beta[q]);
        col[p] = g_tau + chain(fb_tau, fbb_tau);
        col[p + 1] = g_rho + chain(fb_rho, fbb_rho);
      }
    }
  }

  // Fixed-order reduction: identical results for any thread count.
  double total = 0.0;
  for (double v : ll) total += v;
  if (grad) {
    grad->setZero(np);
    for (int i = 0; i < n_subj; ++i) *grad += gsub.col(i);
  }
  return total;
}

namespace {

struct InternalModel {
  std::vector<int> cols;      // design columns being estimated
  Eigen::VectorXd scale;      // per estimated column
  Eigen::MatrixXd xs;         // scaled design restricted to cols
};

InternalModel make_internal(const Design& d, const std::vector<Term>& dropped) {
  InternalModel im;
  for (int j = 0; j < kNumTerms; ++j) {
    if (d.constant_column[static_cast<std::size_t>(j)]) continue;
    if (std::find(dropped.begin(), dropped.end(), static_cast<Term>(j)) != dropped.end()) continue;
    im.cols.push_back(j);
  }
  const auto n = d.x.rows();
  const auto p = static_cast<Eigen::Index>(im.cols.size());
  im.scale.resize(p);
  im.xs.resize(n, p);
  for (Eigen::Index q = 0; q < p; ++q) {
    const auto col = d.x.col(im.cols[static_cast<std::size_t>(q)]);
    double sc = im.cols[static_cast<std::size_t>(q)] == 0 ? 1.0 : std::sqrt(col.squaredNorm() / n);
    if (!(sc > 0.0)) sc = 1.0;
    im.scale[q] = sc;
    im.xs.col(q) = col / sc;
  }
  return im;
}

// Log-link least squares, then moment estimate of phi.
Eigen::VectorXd crude_start(const InternalModel& im, const Eigen::VectorXd& y) {
  const auto p = im.xs.cols();
  const double ybar = y.mean();
  const double offset = std::max(1e-8, 0.1 * ybar);
  const Eigen::VectorXd z = (y.array() + offset).log().matrix();
  Eigen::VectorXd beta = im.xs.colPivHouseholderQr().solve(z);
  if (!beta.allFinite()) beta.setZero();
  Eigen::VectorXd mu = (im.xs * beta).array().exp().matrix();
  const auto intercept = std::find(im.cols.begin(), im.cols.end(), 0);
  if (intercept != im.cols.end() && mu.mean() > 0.0) {
    beta[intercept - im.cols.begin()] += std::log(ybar) - std::log(mu.mean());
    mu = (im.xs * beta).array().exp().matrix();
  }
  const double resid_var = (y - mu).squaredNorm() / static_cast<double>(y.size());
  const double excess = resid_var - mu.mean();
  double phi = excess > 0.0 ? mu.squaredNorm() / static_cast<double>(y.size()) / excess : 1e3;
  phi = std::clamp(phi, std::exp(kLogPhiMin + 1.0), std::exp(kLogPhiMax - 1.0));
  Eigen::VectorXd theta(p + 1);
  theta.head(p) = beta;
  theta[p] = std::log(phi);
  return theta;
}

BfgsResult maximize(const NbMarginalLikelihood& lik, const Eigen::VectorXd& start, const FitConfig& cfg) {
  const auto np = lik.n_params();
  const auto p = np - (lik.random_intercept() ? 2 : 1);
  Eigen::VectorXd lower = Eigen::VectorXd::Constant(np, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::infinity());
  lower[p] = kLogPhiMin;
  upper[p] = kLogPhiMax;
  if (lik.random_intercept()) {
    lower[p + 1] = kLogSigmaMin;
    upper[p + 1] = kLogSigmaMax;
  }
  BfgsOptions opts;
  opts.max_iter = cfg.max_iter;
  opts.grad_tol = cfg.tol;
  Objective neg = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g) {
    const double v = lik.value_and_gradient(th, g);
    g = -g;
    return -v;
  };
  auto res = minimize_bfgs(neg, start, lower, upper, opts);
  spdlog::debug("maximize: {} iterations, {} evaluations", res.iterations, res.evaluations);
  res.f = -res.f;
  res.grad = -res.grad;
  for (double& t : res.trace) t = -t;
  return res;
}

// Observed information by central differences of the analytic gradient over
// the parameters listed in `free`.
Eigen::MatrixXd observed_information(const NbMarginalLikelihood& lik, const Eigen::VectorXd& theta,
                                     const std::vector<int>& free) {
  const auto nf = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd info(nf, nf);
  Eigen::VectorXd gp, gm;
  for (Eigen::Index c = 0; c < nf; ++c) {
    const int j = free[static_cast<std::size_t>(c)];
    const double step = 1e-5 * std::max(1.0, std::abs(theta[j]));
    Eigen::VectorXd tp = theta, tm = theta;
    tp[j] += step;
    tm[j] -= step;
    lik.value_and_gradient(tp, gp);
    lik.value_and_gradient(tm, gm);
    for (Eigen::Index r = 0; r < nf; ++r)
      info(r, c) = -(gp[free[static_cast<std::size_t>(r)]] - gm[free[static_cast<std::size_t>(r)]]) / (2.0 * step);
  }
  return 0.5 * (info + info.transpose());
}

}  // namespace

NbGlmmFit fit(const Design& design, const FitConfig& config) {
  if (design.n_subjects() < config.min_subjects)
    throw Error(ErrorKind::InsufficientData, "fit: need at least " + std::to_string(config.min_subjects) +
                                                 " participants, got " + std::to_string(design.n_subjects()));
  const InternalModel im = make_internal(design, config.dropped);
  const auto p = static_cast<Eigen::Index>(im.cols.size());

  NbGlmmFit out;
  out.age_center = design.age_center;
  out.age_scale = design.age_scale;
  out.quadrature_points = config.quadrature_points;
  out.n_obs = static_cast<int>(design.y.size());
  out.n_subjects = design.n_subjects();
  out.warnings = design.warnings;
  out.se.fill(kNaN);

  Eigen::VectorXd theta;
  if (config.warm_start) {
    const NbGlmmFit& w = *config.warm_start;
    theta.resize(p + (config.random_intercept ? 2 : 1));
    for (Eigen::Index q = 0; q < p; ++q)
      theta[q] = w.beta[static_cast<std::size_t>(im.cols[static_cast<std::size_t>(q)])] * im.scale[q];
    theta[p] = std::clamp(std::log(w.phi), kLogPhiMin, kLogPhiMax);
    if (config.random_intercept)
      theta[p + 1] = w.sigma_b2 > 0.0 ? std::clamp(0.5 * std::log(w.sigma_b2), kLogSigmaMin, kLogSigmaMax)
                                      : kLogSigmaMin;
  } else {
    const Eigen::VectorXd crude = crude_start(im, design.y);
    const NbMarginalLikelihood fixed(im.xs, design.y, design.subject_start, config.quadrature_points, false);
    const BfgsResult fe = maximize(fixed, crude, config);
    theta.resize(p + (config.random_intercept ? 2 : 1));
    theta.head(p + 1) = fe.x;
    if (config.random_intercept) theta[p + 1] = kLogSigmaStart;
  }

  const NbMarginalLikelihood lik(im.xs, design.y, design.subject_start, config.quadrature_points,
                                 config.random_intercept);
  const BfgsResult res = maximize(lik, theta, config);

  out.converged = res.converged;
  out.iterations = res.iterations;
  out.loglik = res.f;
  out.loglik_trace = res.trace;
  out.phi = std::exp(res.x[p]);
  if (res.x[p] >= kLogPhiMax)
    out.warnings.emplace_back("phi reached its upper bound; the response shows no overdispersion (Poisson limit)");
  if (config.random_intercept) {
    out.sigma_at_boundary = res.x[p + 1] <= kLogSigmaMin;
    out.sigma_b2 = out.sigma_at_boundary ? 0.0 : std::exp(2.0 * res.x[p + 1]);
  }
  for (Eigen::Index q = 0; q < p; ++q) {
    const auto j = static_cast<std::size_t>(im.cols[static_cast<std::size_t>(q)]);
    out.beta[j] = res.x[q] / im.scale[q];
    out.estimated[j] = true;
  }
  if (!out.converged)
    spdlog::warn("fit: optimizer stopped after {} iterations without converging", res.iterations);

  if (config.compute_se) {
    std::vector<int> free;
    for (int q = 0; q < lik.n_params(); ++q) {
      const bool at_bound = (q == p && (res.x[q] <= kLogPhiMin || res.x[q] >= kLogPhiMax)) ||
                            (q == p + 1 && (res.x[q] <= kLogSigmaMin || res.x[q] >= kLogSigmaMax));
      if (!at_bound) free.push_back(q);
    }
    const Eigen::MatrixXd info = observed_information(lik, res.x, free);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const bool pd = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                    (ldlt.vectorD().array() > 0.0).all();
    if (!pd) {
      out.warnings.emplace_back("observed information is not positive definite; standard errors unavailable");
    } else {
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
      for (std::size_t c = 0; c < free.size(); ++c) {
        const int q = free[c];
        if (q >= p) continue;
        const auto j = static_cast<std::size_t>(im.cols[static_cast<std::size_t>(q)]);
        out.se[j] = std::sqrt(cov(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c))) / im.scale[q];
      }
    }
  }
  return out;
}

NbGlmmFit fit(std::span<const RegressionRow> rows, const FitConfig& config) {
  return fit(build_design(rows), config);
}

LrtResult lrt(const NbGlmmFit& full, const Design& design, LrtBlock block, const FitConfig& config) {
  LrtResult out;
  out.block = block;
  std::vector<Term> drop = config.dropped;
  int df = 0;
  for (Term t : block_terms(block)) {
    if (full.estimated[static_cast<std::size_t>(t)]) ++df;
    drop.push_back(t);
  }
  out.df = df;
  if (df == 0) {
    // Nothing to remove: the reduced model is the full model.
    out.deviance = 0.0;
    out.p_value = 1.0;
    out.reduced_converged = full.converged;
    out.reduced_loglik = full.loglik;
    return out;
  }
  FitConfig cfg = config;
  cfg.dropped = drop;
  cfg.compute_se = false;
  cfg.warm_start = &full;
  const NbGlmmFit reduced = fit(design, cfg);
  out.reduced_converged = reduced.converged;
  out.reduced_loglik = reduced.loglik;
  const double dev = 2.0 * (full.loglik - reduced.loglik);
  if (dev < -1e-6 * std::max(1.0, std::abs(full.loglik)))
    spdlog::warn("lrt {}: reduced model fits better than the full model (deviance {:.3g})", to_string(block), dev);
  out.deviance = std::max(0.0, dev);
  if (reduced.converged) out.p_value = chi_square_upper_tail(out.deviance, df);
  return out;
}

LrtResult lrt(const NbGlmmFit& full, std::span<const RegressionRow> rows, LrtBlock block,
              const FitConfig& config) {
  return lrt(full, build_design(rows), block, config);
}

double predict_log_mu(const NbGlmmFit& fit, const RegressionRow& row) {
  const double z = (row.age - fit.age_center) / fit.age_scale;
  const std::array<double, kNumTerms> x{1.0, static_cast<double>(row.male), row.n_grids, z, z * z, z * z * z};
  double eta = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) eta += fit.beta[j] * x[j];
  return eta;
}

}  // namespace pvlx
