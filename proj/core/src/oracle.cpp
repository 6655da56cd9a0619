#include "pvlx/oracle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>
#include <spdlog/spdlog.h>

#include "pvlx/error.hpp"
#include "pvlx/nbglmm.hpp"
#include "pvlx/rng.hpp"
#include "pvlx/synth.hpp"

namespace pvlx {

namespace {

OracleReport skipped(std::string name, std::string why) {
  OracleReport r;
  r.check = std::move(name);
  r.skipped = true;
  r.passed = true;
  r.detail = std::move(why);
  return r;
}

// Tracks the worst relative deviation seen so far.
struct Worst {
  OracleReport& r;
  void add(double oracle, double pipeline) {
    ++r.n_compared;
    const double abs_dev = std::abs(oracle - pipeline);
    const double rel_dev = abs_dev == 0.0 ? 0.0 : abs_dev / std::max(std::abs(oracle), 1e-300);
    r.max_abs_dev = std::max(r.max_abs_dev, abs_dev);
    if (rel_dev >= r.max_rel_dev) {
      r.max_rel_dev = rel_dev;
      r.oracle_value = oracle;
      r.pipeline_value = pipeline;
    }
  }
};

}  // namespace

ExhaustiveSpace exhaustive_activity_space(std::span<const double> weights, double gamma) {
  const std::size_t n = weights.size();
  if (n == 0 || n > 20) throw Error(ErrorKind::InvalidArgument, "exhaustive_activity_space: need 1..20 weights");
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = total * (gamma / 100.0) - 1e-12;
  ExhaustiveSpace best{n + 1, 0.0};
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    if (k > best.min_cardinality) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) s += weights[i];
    if (s < target) continue;
    if (k < best.min_cardinality) {
      best = {k, s};
    } else {
      best.best_weight = std::max(best.best_weight, s);
    }
  }
  return best;
}

OracleReport check_smoothing(const SmoothingInput& in, std::span<const Surface> surfaces,
                             std::size_t max_cells, std::uint64_t seed, double tolerance) {
  if (surfaces.empty()) return skipped("kernel_smoothing", "no surfaces");
  OracleReport r;
  r.check = "kernel_smoothing";
  r.tolerance = tolerance;
  std::size_t mask_mismatch = 0;

  const std::size_t n_cells = in.grid.cell_count();
  std::vector<std::size_t> cells;
  if (n_cells <= max_cells) {
    for (std::size_t i = 0; i < n_cells; ++i) cells.push_back(i);
  } else {
    Rng rng(derive_seed(seed, 101));
    for (std::size_t i = 0; i < max_cells; ++i) cells.push_back(uniform_index(rng, n_cells));
  }

  Worst worst{r};
  for (const Surface& s : surfaces) {
    if (!(s.grid == in.grid) || s.values.size() != n_cells)
      throw Error(ErrorKind::InvalidArgument, "check_smoothing: surface grid does not match input");
    for (std::size_t ci : cells) {
      const PointLocation c = centroid(in.grid.cell_at(ci), in.grid);
      double sw = 0.0, swx = 0.0;
      for (const auto& rec : in.records) {
        if (!rec.homestead) continue;
        const auto v = individual_metric(rec, s.metric, in.cti, in.vl_floor);
        if (!v) continue;
        const double d = std::hypot(rec.homestead->easting - c.easting, rec.homestead->northing - c.northing);
        if (d > in.kernel.radius_km * 1000.0) continue;
        const double sigma = in.kernel.sigma_km * 1000.0;
        const double w = std::exp(-d * d / (2.0 * sigma * sigma));
        sw += w;
        swx += w * *v;
      }
      const auto& got = s.values[ci];
      if ((sw > 0.0) != got.has_value()) {
        ++mask_mismatch;
        continue;
      }
      if (got) worst.add(swx / sw, *got);
    }
  }
  r.passed = mask_mismatch == 0 && r.max_rel_dev < tolerance;
  r.detail = fmt::format("{} cells x {} surfaces, {} mask mismatches", cells.size(), surfaces.size(),
                         mask_mismatch);
  return r;
}

OracleReport check_activity_spaces(std::span<const ActivityDistribution> dists,
                                   std::span<const double> gammas, std::size_t n_random,
                                   std::uint64_t seed) {
  OracleReport r;
  r.check = "activity_space_optimality";
  r.tolerance = 1e-12;
  std::vector<ActivityDistribution> pool;
  for (const auto& d : dists)
    if (!d.weights.empty() && d.weights.size() <= 12) pool.push_back(d);
  Rng rng(derive_seed(seed, 102));
  for (std::size_t k = 0; k < n_random; ++k) {
    ActivityDistribution d;
    d.participant_id = fmt::format("random{}", k);
    const auto n = 1 + uniform_index(rng, 12);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values make weight ties common.
      const double w = uniform01(rng) < 0.3 ? 1.0 + static_cast<double>(uniform_index(rng, 3)) : uniform01(rng);
      d.weights.emplace_back(CellId{static_cast<int>(i), 0}, w);
      total += w;
    }
    for (auto& [c, w] : d.weights) w /= total;
    pool.push_back(std::move(d));
  }
  if (pool.empty() || gammas.empty()) return skipped(r.check, "no distributions with <= 12 cells");

  std::size_t card_fail = 0, weight_fail = 0;
  Worst worst{r};
  for (const auto& d : pool) {
    std::vector<double> w;
    for (const auto& [c, v] : d.weights) w.push_back(v);
    for (double g : gammas) {
      const ActivitySpace greedy = activity_space(d, g);
      const ExhaustiveSpace ex = exhaustive_activity_space(w, g);
      if (greedy.cells.size() != ex.min_cardinality) ++card_fail;
      if (greedy.covered_fraction < ex.best_weight - r.tolerance) ++weight_fail;
      worst.add(ex.best_weight, greedy.covered_fraction);
    }
  }
  r.passed = card_fail == 0 && weight_fail == 0;
  r.detail = fmt::format("{} distributions x {} gammas, {} cardinality and {} weight failures", pool.size(),
                         gammas.size(), card_fail, weight_fail);
  return r;
}

OracleReport check_exposures(std::span<const ActivityDistribution> dists,
                             std::span<const Surface> surfaces,
                             std::span<const ExposureRecord> records, double tolerance) {
  if (records.empty() || surfaces.empty()) return skipped("exposure_recomputation", "no exposure rows");
  OracleReport r;
  r.check = "exposure_recomputation";
  r.tolerance = tolerance;
  std::map<std::string, const ActivityDistribution*> by_id;
  for (const auto& d : dists) by_id[d.participant_id] = &d;
  std::array<const Surface*, 6> by_metric{};
  for (const auto& s : surfaces) by_metric[metric_index(s.metric)] = &s;

  std::size_t mismatched = 0, unchecked = 0;
  Worst worst{r};
  for (const auto& rec : records) {
    auto it = by_id.find(rec.participant_id);
    const Surface* s = by_metric[metric_index(rec.metric)];
    if (it == by_id.end() || s == nullptr) {
      ++unchecked;
      continue;
    }
    auto ranked = it->second->weights;
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second > b.second || (a.second == b.second && a.first < b.first);
    });
    double cum = 0.0, sw = 0.0, swv = 0.0;
    std::size_t masked = 0, n = 0;
    for (const auto& [cell, w] : ranked) {
      if (cum >= rec.gamma / 100.0 - 1e-12) break;
      cum += w;
      ++n;
      const auto& v = s->values[s->grid.index(cell)];
      if (!v) {
        ++masked;
        continue;
      }
      sw += w;
      swv += w * *v;
    }
    const bool defined = sw > 0.0;
    if (defined != rec.value.has_value() || (rec.value && (n != rec.n_cells || masked != rec.masked_dropped))) {
      ++mismatched;
      continue;
    }
    if (defined) worst.add(swv / sw, *rec.value);
  }
  r.passed = mismatched == 0 && r.max_rel_dev <= tolerance;
  r.detail = fmt::format("{} rows compared, {} structural mismatches, {} without inputs", r.n_compared,
                         mismatched, unchecked);
  return r;
}

OracleReport check_glmm_calibration(std::uint64_t seed, int replicates, int subjects) {
  OracleReport r;
  r.check = "glmm_calibration";
  r.tolerance = 0.9;  // minimum coverage of the +-3 SE intervals
  GlmmSimulation sim;
  sim.n_subjects = subjects;
  int covered = 0, total = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    const auto rows = simulate_glmm(sim, derive_seed(seed, 103, static_cast<std::uint64_t>(rep)));
    const NbGlmmFit f = fit(rows);
    for (int j = 0; j < kNumTerms; ++j) {
      ++total;
      const auto k = static_cast<std::size_t>(j);
      if (std::isfinite(f.se[k]) && std::abs(f.beta[k] - sim.beta[k]) <= 3.0 * f.se[k]) ++covered;
    }
  }
  const double coverage = static_cast<double>(covered) / total;
  r.n_compared = static_cast<std::size_t>(total);
  r.oracle_value = 1.0;
  r.pipeline_value = coverage;
  r.max_abs_dev = 1.0 - coverage;
  r.max_rel_dev = 1.0 - coverage;
  r.passed = coverage >= r.tolerance;
  r.detail = fmt::format("{} of {} coefficients within 3 SE over {} replicates", covered, total, replicates);
  return r;
}

std::vector<OracleReport> oracle_suite(const ScenarioOutputs& o) {
  std::vector<OracleReport> out;
  const bool have_records = !o.smoothing.records.empty();
  out.push_back(have_records ? check_smoothing(o.smoothing, o.surfaces, 500, o.seed)
                             : skipped("kernel_smoothing", "empty scenario"));
  out.push_back(check_activity_spaces(o.distributions, o.gammas, o.distributions.empty() ? 0 : 200, o.seed));
  out.push_back(check_exposures(o.distributions, o.surfaces, o.exposures));
  if (o.include_glmm && have_records)
    out.push_back(check_glmm_calibration(o.seed));
  else
    out.push_back(skipped("glmm_calibration", have_records ? "disabled" : "empty scenario"));
  for (const auto& r : out) {
    if (r.skipped)
      spdlog::warn("oracle {}: skipped ({})", r.check, r.detail);
    else if (!r.passed)
      spdlog::error("oracle {}: FAILED ({}; max rel dev {:.3g})", r.check, r.detail, r.max_rel_dev);
  }
  return out;
}

}  // namespace pvlx
