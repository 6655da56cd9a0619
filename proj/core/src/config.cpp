#include "pvlx/config.hpp"

#include <algorithm>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <sstream>

#include "pvlx/error.hpp"
#include "pvlx/io.hpp"

namespace pvlx {

namespace {

[[noreturn]] void bad(std::string_view key, const std::string& why) {
  throw Error(ErrorKind::Config, fmt::format("{}: {}", key, why));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T number(std::string_view key, std::string_view v) {
  v = trim(v);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    bad(key, fmt::format("expected a number, got '{}'", v));
  return out;
}

bool boolean(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, fmt::format("expected true/false, got '{}'", v));
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::string key;
  bool is_path;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define PVLX_DOUBLE(KEY, FIELD)                                                              \
  Entry {                                                                                    \
    KEY, false, [](PipelineConfig& c, std::string_view v) { c.FIELD = number<double>(KEY, v); }, \
        [](const PipelineConfig& c) { return io::format_double(c.FIELD); }                   \
  }
#define PVLX_INT(KEY, FIELD)                                                              \
  Entry {                                                                                 \
    KEY, false, [](PipelineConfig& c, std::string_view v) { c.FIELD = number<int>(KEY, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.FIELD); }                   \
  }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      {"cohort_path", true, [](PipelineConfig& c, std::string_view v) { c.cohort_path = std::string(trim(v)); },
       [](const PipelineConfig& c) { return c.cohort_path.string(); }},
      {"gps_path", true, [](PipelineConfig& c, std::string_view v) { c.gps_path = std::string(trim(v)); },
       [](const PipelineConfig& c) { return c.gps_path.string(); }},
      {"output_dir", true,
       [](PipelineConfig& c, std::string_view v) {
         if (trim(v).empty()) bad("output_dir", "must not be empty");
         c.output_dir = std::string(trim(v));
       },
       [](const PipelineConfig& c) { return c.output_dir.string(); }},
      PVLX_DOUBLE("grid.ref_lat", grid.projection.ref_lat),
      PVLX_DOUBLE("grid.ref_lon", grid.projection.ref_lon),
      PVLX_DOUBLE("grid.origin_easting", grid.origin_easting),
      PVLX_DOUBLE("grid.origin_northing", grid.origin_northing),
      PVLX_DOUBLE("grid.cell_size", grid.cell_size),
      PVLX_INT("grid.n_cols", grid.n_cols),
      PVLX_INT("grid.n_rows", grid.n_rows),
      PVLX_DOUBLE("kernel.sigma_km", kernel.sigma_km),
      PVLX_DOUBLE("kernel.radius_km", kernel.radius_km),
      PVLX_DOUBLE("cti.beta0", cti.beta0),
      PVLX_DOUBLE("cti.c", cti.c),
      PVLX_DOUBLE("cti.v0", cti.v0),
      PVLX_INT("cti.acts", cti.acts),
      PVLX_DOUBLE("cti.pdv_threshold", cti.pdv_threshold),
      PVLX_DOUBLE("vl_floor", vl_floor),
      PVLX_DOUBLE("gap_cap_s", ingest.gap_cap_s),
      {"total_time_denominator", false,
       [](PipelineConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "in_area")
           c.ingest.denominator = TimeDenominator::InArea;
         else if (v == "all")
           c.ingest.denominator = TimeDenominator::All;
         else
           bad("total_time_denominator", fmt::format("expected in_area or all, got '{}'", v));
       },
       [](const PipelineConfig& c) {
         return std::string(c.ingest.denominator == TimeDenominator::All ? "all" : "in_area");
       }},
      {"gamma_grid", false,
       [](PipelineConfig& c, std::string_view v) {
         std::vector<double> g;
         std::size_t start = 0;
         const std::string s(v);
         while (start <= s.size()) {
           const auto comma = s.find(',', start);
           g.push_back(number<double>("gamma_grid", std::string_view(s).substr(start, comma - start)));
           if (comma == std::string::npos) break;
           start = comma + 1;
         }
         c.gamma_grid = std::move(g);
       },
       [](const PipelineConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.gamma_grid.size(); ++i)
           out += (i ? "," : "") + io::format_double(c.gamma_grid[i]);
         return out;
       }},
      {"surface_year", false,
       [](PipelineConfig& c, std::string_view v) {
         if (trim(v) == "auto")
           c.surface_year.reset();
         else
           c.surface_year = number<int>("surface_year", v);
       },
       [](const PipelineConfig& c) { return c.surface_year ? std::to_string(*c.surface_year) : std::string("auto"); }},
      {"surface_mode", false,
       [](PipelineConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "per_year")
           c.pool_years = false;
         else if (v == "pooled")
           c.pool_years = true;
         else
           bad("surface_mode", fmt::format("expected per_year or pooled, got '{}'", v));
       },
       [](const PipelineConfig& c) { return std::string(c.pool_years ? "pooled" : "per_year"); }},
      PVLX_DOUBLE("risk.hi", risk_hi),
      PVLX_DOUBLE("risk.lo", risk_lo),
      {"seed", false, [](PipelineConfig& c, std::string_view v) { c.seed = number<std::uint64_t>("seed", v); },
       [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      PVLX_INT("synth.n_persons", synth.n_persons),
      PVLX_INT("synth.first_year", synth.first_year),
      PVLX_INT("synth.n_years", synth.n_years),
      PVLX_DOUBLE("synth.hiv_prevalence", synth.hiv_prevalence),
      PVLX_DOUBLE("synth.vl_log10_mean", synth.vl_log10_mean),
      PVLX_DOUBLE("synth.vl_log10_sd", synth.vl_log10_sd),
      PVLX_DOUBLE("synth.vl_missing_fraction", synth.vl_missing_fraction),
      PVLX_DOUBLE("synth.outside_fraction", synth.outside_fraction),
      {"synth.layout", false,
       [](PipelineConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "uniform")
           c.synth.layout = HomesteadLayout::Uniform;
         else if (v == "clustered")
           c.synth.layout = HomesteadLayout::Clustered;
         else
           bad("synth.layout", fmt::format("expected uniform or clustered, got '{}'", v));
       },
       [](const PipelineConfig& c) {
         return std::string(c.synth.layout == HomesteadLayout::Uniform ? "uniform" : "clustered");
       }},
      PVLX_INT("synth.n_clusters", synth.n_clusters),
      PVLX_DOUBLE("synth.cluster_spread_m", synth.cluster_spread_m),
      PVLX_INT("synth.n_participants", synth.n_participants_gps),
      PVLX_INT("synth.anchors", synth.anchors_per_participant),
      PVLX_DOUBLE("synth.dwell_exponent", synth.dwell_exponent),
      PVLX_INT("synth.fixes_per_participant", synth.fixes_per_participant),
      PVLX_DOUBLE("synth.sampling_interval_s", synth.sampling_interval_s),
      PVLX_DOUBLE("synth.mean_bout_fixes", synth.mean_bout_fixes),
      PVLX_DOUBLE("synth.anchor_range_m", synth.anchor_range_m),
      PVLX_DOUBLE("synth.movement_noise_m", synth.movement_noise_m),
      PVLX_DOUBLE("synth.gap_probability", synth.gap_probability),
      {"synth.start_time", false,
       [](PipelineConfig& c, std::string_view v) {
         try {
           c.synth.start_time = io::parse_iso8601(v);
         } catch (const Error& e) {
           bad("synth.start_time", e.what());
         }
       },
       [](const PipelineConfig& c) { return io::format_iso8601(c.synth.start_time); }},
      PVLX_INT("regress.quadrature_points", regress.quadrature_points),
      PVLX_INT("regress.max_iter", regress.max_iter),
      PVLX_DOUBLE("regress.tol", regress.tol),
      PVLX_INT("regress.min_subjects", regress.min_subjects),
      {"oracle.glmm", false,
       [](PipelineConfig& c, std::string_view v) { c.oracle_glmm = boolean("oracle.glmm", v); },
       [](const PipelineConfig& c) { return fmt_bool(c.oracle_glmm); }},
  };
  return entries;
}

#undef PVLX_DOUBLE
#undef PVLX_INT

}  // namespace

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  const auto& reg = registry();
  auto it = std::find_if(reg.begin(), reg.end(), [&](const Entry& e) { return e.key == key; });
  if (it == reg.end()) bad(key, "unknown configuration key");
  it->set(cfg, value);
}

PipelineConfig parse_config(std::string_view text, std::string_view source) {
  PipelineConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::Config, fmt::format("{}:{}: expected 'key = value'", source, n));
    set_config_value(cfg, body.substr(0, eq), body.substr(eq + 1));
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw Error(ErrorKind::Config, "config: cannot read '" + file.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), file.string());
}

std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : registry()) out.emplace_back(e.key, e.get(cfg));
  return out;
}

void PipelineConfig::validate() const {
  const auto wrap = [](std::string_view key, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config) throw;
      bad(key, e.what());
    }
  };
  wrap("grid", [&] { grid.validate(); });
  wrap("kernel", [&] { kernel.validate(); });
  wrap("cti", [&] { cti.validate(); });
  if (!(vl_floor > 0.0)) bad("vl_floor", "must be positive");
  if (!(ingest.gap_cap_s > 0.0)) bad("gap_cap_s", "must be positive");
  if (gamma_grid.empty()) bad("gamma_grid", "must list at least one level");
  for (double g : gamma_grid)
    if (!(g > 0.0 && g <= 100.0)) bad("gamma_grid", fmt::format("level {} outside (0, 100]", g));
  if (!(risk_hi >= 0.0 && risk_hi <= 100.0)) bad("risk.hi", "must be in [0, 100]");
  if (!(risk_lo >= 0.0 && risk_lo <= 100.0)) bad("risk.lo", "must be in [0, 100]");
  if (regress.quadrature_points < 1 || regress.quadrature_points > 100)
    bad("regress.quadrature_points", "must be in [1, 100]");
  if (regress.max_iter < 1) bad("regress.max_iter", "must be >= 1");
  if (!(regress.tol > 0.0)) bad("regress.tol", "must be positive");
  if (regress.min_subjects < 1) bad("regress.min_subjects", "must be >= 1");
  scenario().validate();
  if (std::filesystem::exists(output_dir) && !std::filesystem::is_directory(output_dir))
    bad("output_dir", fmt::format("'{}' exists and is not a directory", output_dir.string()));
}

std::filesystem::path PipelineConfig::cohort_file() const {
  return cohort_path.empty() ? output_dir / "cohort.csv" : cohort_path;
}

std::filesystem::path PipelineConfig::gps_file() const {
  return gps_path.empty() ? output_dir / "gps.csv" : gps_path;
}

std::string PipelineConfig::canonical() const {
  std::vector<std::string> lines;
  const auto& reg = registry();
  for (const auto& e : reg)
    if (!e.is_path) lines.push_back(e.key + "=" + e.get(*this));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::uint64_t PipelineConfig::hash() const { return io::fnv1a64(canonical()); }

ScenarioConfig PipelineConfig::scenario() const {
  ScenarioConfig s = synth;
  s.grid = grid;
  s.seed = seed;
  return s;
}

}  // namespace pvlx
