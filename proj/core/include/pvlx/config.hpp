#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pvlx/activity.hpp"
#include "pvlx/grid.hpp"
#include "pvlx/nbglmm.hpp"
#include "pvlx/surface.hpp"
#include "pvlx/synth.hpp"

namespace pvlx {

struct PipelineConfig {
  std::filesystem::path cohort_path;  ///< empty: <output_dir>/cohort.csv
  std::filesystem::path gps_path;     ///< empty: <output_dir>/gps.csv
  std::filesystem::path output_dir = "pvlx_out";

  GridSpec grid = ScenarioConfig{}.grid;
  KernelParams kernel;
  CtiParams cti;
  double vl_floor = 1.0;
  IngestOptions ingest;
  std::vector<double> gamma_grid{50, 55, 60, 65, 70, 75, 80, 85, 90, 95};
  std::optional<int> surface_year;  ///< empty: latest year in the cohort
  bool pool_years = false;  ///< one surface set from every year's residents, labelled surface_year
  double risk_hi = 80.0;
  double risk_lo = 20.0;
  std::uint64_t seed = 20240611;

  ScenarioConfig synth;  ///< grid and seed are taken from the fields above
  FitConfig regress;
  bool oracle_glmm = true;

  void validate() const;

  std::filesystem::path cohort_file() const;
  std::filesystem::path gps_file() const;

  /// Sorted key=value lines for every setting except paths.
  std::string canonical() const;
  std::uint64_t hash() const;

  /// ScenarioConfig with the shared grid and seed filled in.
  ScenarioConfig scenario() const;
};

/// Sets one key; throws Error(Config) naming the key on a bad key or value.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// key = value lines; '#' starts a comment.
PipelineConfig parse_config(std::string_view text, std::string_view source = "<config>");
PipelineConfig load_config(const std::filesystem::path& file);

/// All recognized keys with their current values.
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& cfg);

}  // namespace pvlx
