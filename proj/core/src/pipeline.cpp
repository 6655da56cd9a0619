#include "pvlx/pipeline.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <set>
#include <spdlog/spdlog.h>

#include "pvlx/activity.hpp"
#include "pvlx/cohort.hpp"
#include "pvlx/exposure.hpp"
#include "pvlx/io.hpp"
#include "pvlx/nbglmm.hpp"
#include "pvlx/oracle.hpp"
#include "pvlx/rng.hpp"
#include "pvlx/surface.hpp"
#include "pvlx/synth.hpp"

namespace pvlx {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Io:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidCoordinate:
    case ErrorKind::Range:
    case ErrorKind::PipelineOrder: return kExitConfig;
    case ErrorKind::InsufficientData:
    case ErrorKind::EmptyDistribution:
    case ErrorKind::EmptySummary:
    case ErrorKind::EmptyStratum:
    case ErrorKind::UndefinedExposure:
    case ErrorKind::Degenerate: return kExitInsufficientData;
    case ErrorKind::NonConvergence: return kExitNonConvergence;
  }
  return kExitFailure;
}

std::string files::surface(MetricKind m, int year) { return fmt::format("surface_{}_{}.csv", to_string(m), year); }
std::string files::model(MetricKind m) { return fmt::format("model_{}.json", to_string(m)); }

namespace {

// RNG stream ids used by the pipeline itself.
constexpr std::uint64_t kImputationStream = 11;

constexpr std::array<double, 3> kSizeGammas{50.0, 95.0, 100.0};

template <class Fn>
int guarded(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    spdlog::error("{}: {} ({})", name, e.what(), to_string(e.kind()));
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}: {}", name, e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}: unexpected error: {}", name, e.what());
    return kExitFailure;
  }
}

io::Provenance provenance(const PipelineConfig& cfg) { return {cfg.hash(), cfg.seed}; }

void prepare_output_dir(const PipelineConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir))
    throw Error(ErrorKind::Config,
                fmt::format("output_dir: cannot create '{}': {}", cfg.output_dir.string(), ec.message()));
}

void require_file(const fs::path& p, std::string_view produced_by) {
  if (!fs::exists(p))
    throw Error(ErrorKind::PipelineOrder, fmt::format("missing input '{}'; run `{}` first", p.string(), produced_by));
}

std::vector<PersonYearRecord> load_imputed_cohort(const PipelineConfig& cfg) {
  const fs::path p = cfg.output_dir / files::kCohortImputed;
  require_file(p, "surfaces");
  return io::read_cohort(p);
}

int resolve_surface_year(const PipelineConfig& cfg, std::span<const PersonYearRecord> cohort) {
  if (cfg.surface_year) return *cfg.surface_year;
  if (cohort.empty()) throw Error(ErrorKind::InsufficientData, "surface_year: cohort is empty");
  int y = cohort.front().year;
  for (const auto& r : cohort) y = std::max(y, r.year);
  return y;
}

// Residents smoothed for `year`: that year's, or every year's when pooled.
std::vector<PersonYearRecord> smoothing_records(const PipelineConfig& cfg, std::span<const PersonYearRecord> cohort,
                                                int year) {
  if (!cfg.pool_years) return eligible_for_year(cohort, year, cfg.grid);
  std::set<int> years;
  for (const auto& r : cohort) years.insert(r.year);
  std::vector<PersonYearRecord> out;
  for (int y : years) {
    auto e = eligible_for_year(cohort, y, cfg.grid);
    out.insert(out.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
  }
  return out;
}

std::vector<Surface> load_surfaces(const PipelineConfig& cfg, int year) {
  std::vector<Surface> out;
  for (MetricKind m : kAllMetrics) {
    const fs::path p = cfg.output_dir / files::surface(m, year);
    require_file(p, "surfaces");
    out.push_back(io::read_surface(p, m, year, cfg.grid));
  }
  return out;
}

std::vector<ActivityDistribution> load_distributions(const PipelineConfig& cfg) {
  const fs::path p = cfg.gps_file();
  if (!fs::exists(p)) throw Error(ErrorKind::Config, fmt::format("gps_path: '{}' does not exist", p.string()));
  const auto fixes = io::read_gps(p);
  const auto groups = group_by_participant(fixes);
  std::vector<std::pair<std::string, const std::vector<GpsFix>*>> items;
  for (const auto& [id, v] : groups) items.emplace_back(id, &v);
  std::vector<std::optional<ActivityDistribution>> slots(items.size());
  std::vector<std::string> skipped(items.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(items.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      slots[k] = ingest_trajectory(*items[k].second, cfg.grid, cfg.ingest);
    } catch (const Error& e) {
      skipped[k] = e.what();
    }
  }
  std::vector<ActivityDistribution> out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (slots[k])
      out.push_back(std::move(*slots[k]));
    else
      spdlog::warn("exposure: participant {} skipped: {}", items[k].first, skipped[k]);
  }
  return out;
}

std::vector<double> exposure_gammas(const PipelineConfig& cfg) {
  std::set<double> g(cfg.gamma_grid.begin(), cfg.gamma_grid.end());
  g.insert(100.0);
  return {g.begin(), g.end()};
}

}  // namespace

int cmd_synth(const PipelineConfig& cfg) {
  return guarded("synth", [&] {
    prepare_output_dir(cfg);
    for (auto [key, path] : {std::pair{"cohort_path", cfg.cohort_file()}, std::pair{"gps_path", cfg.gps_file()}})
      if (path.has_parent_path() && !fs::is_directory(path.parent_path()))
        throw Error(ErrorKind::Config,
                    fmt::format("{}: directory '{}' does not exist", key, path.parent_path().string()));
    const ScenarioConfig sc = cfg.scenario();
    const auto prov = provenance(cfg);
    const auto cohort = gen_cohort(sc);
    io::write_cohort(cfg.cohort_file(), cohort, prov, false);
    const auto fixes = gen_trajectories(sc);
    io::write_gps(cfg.gps_file(), fixes, prov);
    spdlog::info("synth: {} person-years, {} GPS fixes for {} participants", cohort.size(), fixes.size(),
                 sc.n_participants_gps);
    return kExitOk;
  });
}

int cmd_surfaces(const PipelineConfig& cfg) {
  return guarded("surfaces", [&] {
    prepare_output_dir(cfg);
    const fs::path in = cfg.cohort_file();
    if (!fs::exists(in)) throw Error(ErrorKind::Config, fmt::format("cohort_path: '{}' does not exist", in.string()));
    auto cohort = io::read_cohort(in);
    if (cohort.empty()) throw Error(ErrorKind::InsufficientData, "surfaces: cohort file has no records");
    const bool has_source =
        std::any_of(cohort.begin(), cohort.end(), [](const auto& r) { return r.vl_source != VlSource::None; });
    if (!has_source) {
      const auto strata = build_strata(cohort);
      cohort = impute_viral_loads(cohort, strata, derive_seed(cfg.seed, kImputationStream));
    }
    const auto prov = provenance(cfg);
    io::write_cohort(cfg.output_dir / files::kCohortImputed, cohort, prov, true);

    std::set<int> years;
    for (const auto& r : cohort) years.insert(r.year);
    const int summary_year = resolve_surface_year(cfg, cohort);
    if (cfg.pool_years) years = {summary_year};
    std::size_t written_years = 0;
    for (int year : years) {
      const auto eligible = smoothing_records(cfg, cohort, year);
      if (eligible.empty()) {
        spdlog::warn("surfaces: no eligible residents in {}; year skipped", year);
        continue;
      }
      SmoothingInput sin{eligible, year, cfg.grid, cfg.kernel, cfg.cti, cfg.vl_floor};
      const auto surfaces = smooth_all(sin);
      for (const auto& s : surfaces) io::write_surface(cfg.output_dir / files::surface(s.metric, year), s, prov);
      ++written_years;
      if (year != summary_year) continue;
      std::vector<io::SummaryRow> rows;
      for (const auto& s : surfaces) {
        io::SummaryRow row{s.metric, std::nullopt, {}};
        try {
          row.stats = surface_summary(s);
        } catch (const Error& e) {
          row.flag = e.what();
          spdlog::warn("surfaces: {}", e.what());
        }
        rows.push_back(std::move(row));
      }
      io::write_summary(cfg.output_dir / files::kSummary, rows, prov);
    }
    if (written_years == 0) throw Error(ErrorKind::InsufficientData, "surfaces: no eligible residents in any year");
    if (cfg.pool_years)
      spdlog::info("surfaces: person-years of every round pooled into the {} surfaces", summary_year);
    else if (!years.contains(summary_year))
      spdlog::warn("surfaces: surface_year {} has no cohort records; no summary written", summary_year);
    spdlog::info("surfaces: {} year(s) x 6 surfaces written", written_years);
    return kExitOk;
  });
}

int cmd_exposure(const PipelineConfig& cfg) {
  return guarded("exposure", [&] {
    prepare_output_dir(cfg);
    const auto cohort = load_imputed_cohort(cfg);
    const int year = resolve_surface_year(cfg, cohort);
    const auto surfaces = load_surfaces(cfg, year);
    const auto dists = load_distributions(cfg);
    if (dists.empty()) throw Error(ErrorKind::InsufficientData, "exposure: no participant has a usable trajectory");
    const auto prov = provenance(cfg);

    std::vector<io::ActivitySizeRow> sizes;
    for (const auto& d : dists)
      for (double g : kSizeGammas) {
        const auto space = activity_space(d, g);
        sizes.push_back({d.participant_id, g, space.cells.size(), space.covered_fraction});
      }
    io::write_activity_sizes(cfg.output_dir / files::kActivitySizes, sizes, prov);
    io::write_activity_spaces(cfg.output_dir / files::kActivitySpaces, dists, kSizeGammas, prov);

    const auto gammas = exposure_gammas(cfg);
    const auto records = exposure_matrix(dists, surfaces, gammas);
    std::size_t flagged = 0;
    for (const auto& r : records) flagged += !r.value.has_value();
    if (flagged > 0) spdlog::warn("exposure: {} of {} rows undefined (written as NA)", flagged, records.size());
    io::write_exposure(cfg.output_dir / files::kExposure, records, prov);
    spdlog::info("exposure: {} participants, {} rows for year {}", dists.size(), records.size(), year);
    return kExitOk;
  });
}

int cmd_regress(const PipelineConfig& cfg) {
  return guarded("regress", [&] {
    prepare_output_dir(cfg);
    const auto cohort = load_imputed_cohort(cfg);
    const int year = resolve_surface_year(cfg, cohort);
    const fs::path exp_path = cfg.output_dir / files::kExposure;
    require_file(exp_path, "exposure");
    const auto records = io::read_exposure(exp_path);

    std::map<std::string, const PersonYearRecord*> person;
    for (const auto& r : cohort)
      if (r.year == year) person[r.person_id] = &r;
    const std::set<double> levels(cfg.gamma_grid.begin(), cfg.gamma_grid.end());
    const auto prov = provenance(cfg);

    int code = kExitOk;
    std::set<std::string> missing;
    for (MetricKind m : kAllMetrics) {
      std::vector<RegressionRow> rows;
      for (const auto& r : records) {
        if (r.metric != m || !r.value || !levels.contains(r.gamma)) continue;
        auto it = person.find(r.participant_id);
        if (it == person.end()) {
          missing.insert(r.participant_id);
          continue;
        }
        rows.push_back({r.participant_id, r.gamma, *r.value, it->second->sex == Sex::Male ? 1 : 0,
                        static_cast<double>(r.n_cells), it->second->age});
      }
      io::ModelReport rep;
      rep.response = to_string(m);
      try {
        const Design design = build_design(rows);
        rep.fit = fit(design, cfg.regress);
        for (LrtBlock b : {LrtBlock::Age, LrtBlock::Male, LrtBlock::Grids})
          rep.lrts.push_back(lrt(rep.fit, design, b, cfg.regress));
        const bool ok = rep.fit.converged && std::all_of(rep.lrts.begin(), rep.lrts.end(),
                                                         [](const LrtResult& l) { return l.reduced_converged; });
        if (!ok) {
          spdlog::error("regress {}: optimizer did not converge", to_string(m));
          if (code == kExitOk) code = kExitNonConvergence;
        }
      } catch (const Error& e) {
        rep.error = e.what();
        spdlog::error("regress {}: {}", to_string(m), e.what());
        if (code == kExitOk || exit_code_for(e.kind()) == kExitInsufficientData) code = exit_code_for(e.kind());
      }
      io::write_model_report(cfg.output_dir / files::model(m), rep, prov);
    }
    if (!missing.empty())
      spdlog::warn("regress: {} participant(s) without a {} cohort record left out", missing.size(), year);
    return code;
  });
}

int cmd_riskgroups(const PipelineConfig& cfg) {
  return guarded("riskgroups", [&] {
    prepare_output_dir(cfg);
    const fs::path exp_path = cfg.output_dir / files::kExposure;
    const fs::path spaces_path = cfg.output_dir / files::kActivitySpaces;
    require_file(exp_path, "exposure");
    require_file(spaces_path, "exposure");
    const auto records = io::read_exposure(exp_path);
    const io::Table spaces = io::read_table(spaces_path);
    const auto c_id = spaces.column("participant_id", spaces_path), c_g = spaces.column("gamma", spaces_path),
               c_col = spaces.column("cell_col", spaces_path), c_row = spaces.column("cell_row", spaces_path);
    std::map<std::string, std::vector<CellId>> full;
    for (const auto& row : spaces.rows)
      if (std::stod(row[c_g]) == 100.0) full[row[c_id]].push_back({std::stoi(row[c_col]), std::stoi(row[c_row])});

    std::vector<RiskClassification> groups;
    for (RiskBasis b : {RiskBasis::PVL, RiskBasis::PVL_P})
      groups.push_back(classify_risk(records, b, full, cfg.risk_hi, cfg.risk_lo));
    const auto prov = provenance(cfg);
    io::write_risk_members(cfg.output_dir / files::kRiskMembers, groups, prov);
    io::write_risk_geojson(cfg.output_dir / files::kRiskGeojson, groups, cfg.grid, prov);
    for (const auto& g : groups)
      spdlog::info("riskgroups {}: {} high, {} low of {}", to_string(g.high.basis), g.high.members.size(),
                   g.low.members.size(), g.n_participants);
    return kExitOk;
  });
}

int cmd_oracle(const PipelineConfig& cfg) {
  return guarded("oracle", [&] {
    prepare_output_dir(cfg);
    ScenarioOutputs o;
    o.seed = cfg.seed;
    o.gammas = {30, 50, 80, 95, 99};
    o.include_glmm = cfg.oracle_glmm;
    o.smoothing.grid = cfg.grid;
    o.smoothing.kernel = cfg.kernel;
    o.smoothing.cti = cfg.cti;
    o.smoothing.vl_floor = cfg.vl_floor;

    std::vector<PersonYearRecord> eligible;
    const fs::path cohort_path = cfg.output_dir / files::kCohortImputed;
    if (fs::exists(cohort_path)) {
      const auto cohort = io::read_cohort(cohort_path);
      if (!cohort.empty()) {
        const int year = resolve_surface_year(cfg, cohort);
        eligible = smoothing_records(cfg, cohort, year);
        o.smoothing.year = year;
        if (!eligible.empty()) o.surfaces = load_surfaces(cfg, year);
      }
    }
    o.smoothing.records = eligible;
    if (fs::exists(cfg.gps_file())) o.distributions = load_distributions(cfg);
    if (fs::exists(cfg.output_dir / files::kExposure)) o.exposures = io::read_exposure(cfg.output_dir / files::kExposure);
    if (eligible.empty() && o.distributions.empty()) spdlog::warn("oracle: empty scenario; checks skipped");

    const auto reports = oracle_suite(o);
    io::write_oracle_report(cfg.output_dir / files::kOracle, reports, provenance(cfg));
    const bool ok = std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed; });
    for (const auto& r : reports)
      spdlog::info("oracle {}: {}", r.check, r.skipped ? "skipped" : (r.passed ? "pass" : "FAIL"));
    return ok ? kExitOk : kExitFailure;
  });
}

int cmd_all(const PipelineConfig& cfg) {
  if (cfg.cohort_path.empty() && cfg.gps_path.empty())
    if (int rc = cmd_synth(cfg); rc != kExitOk) return rc;
  for (auto step : {cmd_surfaces, cmd_exposure, cmd_regress, cmd_riskgroups, cmd_oracle})
    if (int rc = step(cfg); rc != kExitOk) return rc;
  return kExitOk;
}

}  // namespace pvlx
