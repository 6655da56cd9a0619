#include "pvlx/synth.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <random>

#include "pvlx/error.hpp"
#include "pvlx/rng.hpp"

namespace pvlx {

namespace {

// Independent RNG streams derived from the master seed.
enum Stream : std::uint64_t {
  kClusters = 1,
  kHomestead = 2,
  kPerson = 3,
  kPersonYear = 4,
  kTrajectory = 5,
  kSubject = 6,
  kResponse = 7,
};

double normal(Rng& rng) {
  // Box-Muller.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<PointLocation> cluster_centers(const ScenarioConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kClusters));
  const double w = cfg.grid.width(), h = cfg.grid.height();
  std::vector<PointLocation> centers;
  for (int k = 0; k < cfg.n_clusters; ++k)
    centers.push_back({cfg.grid.origin_easting + w * (0.1 + 0.8 * uniform01(rng)),
                       cfg.grid.origin_northing + h * (0.1 + 0.8 * uniform01(rng))});
  return centers;
}

bool inside(const GridSpec& g, PointLocation p) { return cell_of(p, g).has_value(); }

}  // namespace

void ScenarioConfig::validate() const {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorKind::Config, "synth." + field + ": " + why);
  };
  if (n_persons < 1) fail("n_persons", "must be >= 1");
  if (n_years < 1) fail("n_years", "must be >= 1");
  if (!(hiv_prevalence >= 0.0 && hiv_prevalence <= 1.0)) fail("hiv_prevalence", "must be in [0, 1]");
  if (!(vl_log10_sd >= 0.0)) fail("vl_log10_sd", "must be >= 0");
  if (!std::isfinite(vl_log10_mean)) fail("vl_log10_mean", "must be finite");
  if (!(vl_missing_fraction >= 0.0 && vl_missing_fraction <= 1.0)) fail("vl_missing_fraction", "must be in [0, 1]");
  if (!(outside_fraction >= 0.0 && outside_fraction <= 1.0)) fail("outside_fraction", "must be in [0, 1]");
  if (n_clusters < 1) fail("n_clusters", "must be >= 1");
  if (!(cluster_spread_m > 0.0)) fail("cluster_spread_m", "must be positive");
  if (n_participants_gps < 0 || n_participants_gps > n_persons)
    fail("n_participants_gps", "must be in [0, n_persons]");
  if (anchors_per_participant < 1) fail("anchors_per_participant", "must be >= 1");
  if (!(dwell_exponent >= 0.0)) fail("dwell_exponent", "must be >= 0");
  if (fixes_per_participant < 1) fail("fixes_per_participant", "must be >= 1");
  if (!(sampling_interval_s > 0.0)) fail("sampling_interval_s", "must be positive");
  if (!(mean_bout_fixes >= 1.0)) fail("mean_bout_fixes", "must be >= 1");
  if (!(anchor_range_m >= 0.0) || !(movement_noise_m >= 0.0)) fail("movement_noise_m", "must be >= 0");
  if (!(gap_probability >= 0.0 && gap_probability <= 1.0)) fail("gap_probability", "must be in [0, 1]");
  try {
    grid.validate();
  } catch (const Error& e) {
    fail("grid", e.what());
  }
}

std::string person_id_for(int index) { return fmt::format("P{:06d}", index + 1); }

std::vector<double> dwell_shares(int anchors, double exponent) {
  std::vector<double> s(static_cast<std::size_t>(anchors));
  double total = 0.0;
  for (int k = 0; k < anchors; ++k) total += s[static_cast<std::size_t>(k)] = std::pow(k + 1.0, -exponent);
  for (double& v : s) v /= total;
  return s;
}

std::optional<PointLocation> synthetic_homestead(const ScenarioConfig& cfg, int index) {
  Rng rng(derive_seed(cfg.seed, kHomestead, static_cast<std::uint64_t>(index)));
  if (uniform01(rng) < cfg.outside_fraction) return std::nullopt;
  const GridSpec& g = cfg.grid;
  if (cfg.layout == HomesteadLayout::Uniform)
    return PointLocation{g.origin_easting + g.width() * uniform01(rng),
                         g.origin_northing + g.height() * uniform01(rng)};
  const auto centers = cluster_centers(cfg);
  const auto& c = centers[uniform_index(rng, centers.size())];
  for (int attempt = 0; attempt < 64; ++attempt) {
    const PointLocation p{c.easting + cfg.cluster_spread_m * normal(rng),
                          c.northing + cfg.cluster_spread_m * normal(rng)};
    if (inside(g, p)) return p;
  }
  return c;
}

std::vector<PersonYearRecord> gen_cohort(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<PersonYearRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_persons) * static_cast<std::size_t>(cfg.n_years));
  for (int i = 0; i < cfg.n_persons; ++i) {
    Rng rng(derive_seed(cfg.seed, kPerson, static_cast<std::uint64_t>(i)));
    const Sex sex = uniform01(rng) < 0.5 ? Sex::Male : Sex::Female;
    const double age0 = std::floor(15.0 + 38.0 * uniform01(rng));
    const bool positive = uniform01(rng) < cfg.hiv_prevalence;
    const auto home = synthetic_homestead(cfg, i);
    for (int y = 0; y < cfg.n_years; ++y) {
      Rng yr(derive_seed(cfg.seed, kPersonYear, static_cast<std::uint64_t>(i) * 1024u + static_cast<std::uint64_t>(y)));
      PersonYearRecord r;
      r.person_id = person_id_for(i);
      r.year = cfg.first_year + y;
      r.sex = sex;
      r.age = age0 + y;
      r.hiv_status = positive ? HivStatus::Positive : HivStatus::Negative;
      r.homestead = home;
      r.ds_round = fmt::format("R{}", r.year);
      const double log_vl = cfg.vl_log10_mean + cfg.vl_log10_sd * normal(yr);
      const bool missing = uniform01(yr) < cfg.vl_missing_fraction;
      if (positive && !missing) r.viral_load = std::pow(10.0, log_vl);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<GpsFix> gen_trajectories(const ScenarioConfig& cfg) {
  cfg.validate();
  const GridSpec& g = cfg.grid;
  const auto shares = dwell_shares(cfg.anchors_per_participant, cfg.dwell_exponent);
  std::vector<double> cdf(shares.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < shares.size(); ++k) cdf[k] = acc += shares[k];
  cdf.back() = 1.0;

  std::vector<GpsFix> out;
  out.reserve(static_cast<std::size_t>(cfg.n_participants_gps) *
              static_cast<std::size_t>(cfg.fixes_per_participant));
  for (int i = 0; i < cfg.n_participants_gps; ++i) {
    Rng rng(derive_seed(cfg.seed, kTrajectory, static_cast<std::uint64_t>(i)));
    const std::string id = person_id_for(i);
    const auto home = synthetic_homestead(cfg, i);
    std::vector<PointLocation> anchors;
    anchors.push_back(home ? *home
                           : PointLocation{g.origin_easting + g.width() * uniform01(rng),
                                           g.origin_northing + g.height() * uniform01(rng)});
    for (int k = 1; k < cfg.anchors_per_participant; ++k)
      anchors.push_back({anchors[0].easting + cfg.anchor_range_m * normal(rng),
                         anchors[0].northing + cfg.anchor_range_m * normal(rng)});

    const double leave = 1.0 / cfg.mean_bout_fixes;
    const auto pick = [&] {
      const double u = uniform01(rng);
      std::size_t k = 0;
      while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
      return k;
    };
    std::size_t current = pick();
    double t = static_cast<double>(cfg.start_time);
    for (int f = 0; f < cfg.fixes_per_participant; ++f) {
      if (f > 0 && uniform01(rng) < leave) current = pick();
      const PointLocation p{anchors[current].easting + cfg.movement_noise_m * normal(rng),
                            anchors[current].northing + cfg.movement_noise_m * normal(rng)};
      const LatLon ll = unproject(p, g);
      out.push_back({id, static_cast<std::int64_t>(std::llround(t)), ll.lat, ll.lon});
      t += cfg.sampling_interval_s;
      if (uniform01(rng) < cfg.gap_probability) t += 8.0 * cfg.sampling_interval_s;
    }
  }
  return out;
}

std::vector<RegressionRow> simulate_glmm(const GlmmSimulation& sim, std::uint64_t seed) {
  if (sim.n_subjects < 1 || sim.gammas.empty())
    throw Error(ErrorKind::InvalidArgument, "simulate_glmm: need subjects and gamma levels");
  if (!(sim.phi > 0.0) || !(sim.sigma_b2 >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "simulate_glmm: phi must be > 0 and sigma_b2 >= 0");

  struct Subject {
    int male;
    double age, g, r, b;
  };
  std::vector<Subject> subjects;
  double age_sum = 0.0;
  for (int i = 0; i < sim.n_subjects; ++i) {
    Rng rng(derive_seed(seed, kSubject, static_cast<std::uint64_t>(i)));
    Subject s;
    s.male = uniform01(rng) < 0.5 ? 1 : 0;
    s.age = sim.age_min + (sim.age_max - sim.age_min) * uniform01(rng);
    s.g = 1.0 + (sim.grids_base_max - 1.0) * uniform01(rng);
    s.r = 1.0 + (sim.grids_growth_max - 1.0) * uniform01(rng);
    s.b = std::sqrt(sim.sigma_b2) * normal(rng);
    subjects.push_back(s);
    age_sum += s.age;
  }
  // Every subject has the same number of rows, so subject-level moments
  // equal the row-level ones used by build_design.
  const double center = age_sum / sim.n_subjects;
  double ss = 0.0;
  for (const auto& s : subjects) ss += (s.age - center) * (s.age - center);
  const double scale = std::sqrt(ss / sim.n_subjects);

  std::vector<RegressionRow> rows;
  rows.reserve(subjects.size() * sim.gammas.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = subjects[i];
    Rng rng(derive_seed(seed, kResponse, i));
    const double z = (s.age - center) / scale;
    for (double gamma : sim.gammas) {
      const double n_grids = std::round(s.g * std::pow(s.r, (gamma - 50.0) / 45.0));
      const double eta = sim.beta[0] + sim.beta[1] * s.male + sim.beta[2] * n_grids + sim.beta[3] * z +
                         sim.beta[4] * z * z + sim.beta[5] * z * z * z + s.b;
      const double mu = std::exp(eta);
      std::gamma_distribution<double> lambda(sim.phi, mu / sim.phi);
      const double rate = lambda(rng);
      long y = 0;
      if (rate > 0.0) y = std::poisson_distribution<long>(rate)(rng);
      rows.push_back({person_id_for(static_cast<int>(i)), gamma, static_cast<double>(y), s.male, n_grids, s.age});
    }
  }
  return rows;
}

}  // namespace pvlx
