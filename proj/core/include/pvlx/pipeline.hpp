#pragma once

#include <filesystem>
#include <string>

#include "pvlx/config.hpp"
#include "pvlx/error.hpp"

namespace pvlx {

/// Process exit codes of the pipeline subcommands.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  ///< oracle check failed or unexpected error
  kExitConfig = 2,
  kExitInsufficientData = 3,
  kExitNonConvergence = 4,
};

int exit_code_for(ErrorKind kind) noexcept;

/// Output file names inside output_dir.
namespace files {
inline constexpr const char* kCohortImputed = "cohort_imputed.csv";
inline constexpr const char* kSummary = "surface_summary.csv";
inline constexpr const char* kActivitySizes = "activity_sizes.csv";
inline constexpr const char* kActivitySpaces = "activity_spaces.csv";
inline constexpr const char* kExposure = "exposure.csv";
inline constexpr const char* kRiskMembers = "riskgroups_members.csv";
inline constexpr const char* kRiskGeojson = "riskgroups.geojson";
inline constexpr const char* kOracle = "oracle_report.json";
std::string surface(MetricKind m, int year);
std::string model(MetricKind m);
}  // namespace files

/// Each subcommand logs its own errors and returns an ExitCode.
int cmd_synth(const PipelineConfig& cfg);
int cmd_surfaces(const PipelineConfig& cfg);
int cmd_exposure(const PipelineConfig& cfg);
int cmd_regress(const PipelineConfig& cfg);
int cmd_riskgroups(const PipelineConfig& cfg);
int cmd_oracle(const PipelineConfig& cfg);

/// synth (only when cohort_path and gps_path are unset), surfaces, exposure,
/// regress, riskgroups, oracle; stops at the first non-zero exit code.
int cmd_all(const PipelineConfig& cfg);

}  // namespace pvlx
