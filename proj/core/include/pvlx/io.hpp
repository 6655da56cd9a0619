#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pvlx/activity.hpp"
#include "pvlx/cohort.hpp"
#include "pvlx/exposure.hpp"
#include "pvlx/nbglmm.hpp"
#include "pvlx/oracle.hpp"
#include "pvlx/stats.hpp"
#include "pvlx/surface.hpp"

namespace pvlx::io {

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view data) noexcept;

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  /// "# pvlx config_hash=<16 hex digits> seed=<n>"
  std::string comment() const;
  std::string hash_hex() const;
};

/// %.17g, which round-trips every double.
std::string format_double(double v);

/// Parses "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds and a "Z" or
/// "+HH:MM"/"-HH:MM" suffix (none means UTC). Returns UTC epoch seconds,
/// rounded to the nearest second.
std::int64_t parse_iso8601(std::string_view s);
std::string format_iso8601(std::int64_t epoch_seconds);

/// Comma-separated table with '#' comment lines and a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  /// Column index; throws Error(Io) naming the file when absent.
  std::size_t column(std::string_view name, const std::filesystem::path& file) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};
Table read_table(const std::filesystem::path& file);

std::vector<PersonYearRecord> read_cohort(const std::filesystem::path& file);
void write_cohort(const std::filesystem::path& file, std::span<const PersonYearRecord> cohort,
                  const Provenance& prov, bool with_source);

std::vector<GpsFix> read_gps(const std::filesystem::path& file);
void write_gps(const std::filesystem::path& file, std::span<const GpsFix> fixes, const Provenance& prov);

void write_surface(const std::filesystem::path& file, const Surface& surface, const Provenance& prov);
Surface read_surface(const std::filesystem::path& file, MetricKind metric, int year, const GridSpec& grid);

/// One row per metric; empty stats are written as NA with a flag comment.
struct SummaryRow {
  MetricKind metric = MetricKind::MVL;
  std::optional<SummaryStats> stats;
  std::string flag;
};
void write_summary(const std::filesystem::path& file, std::span<const SummaryRow> rows, const Provenance& prov);

struct ActivitySizeRow {
  std::string participant_id;
  double gamma = 100.0;
  std::size_t n_cells = 0;
  double covered_fraction = 0.0;
};
void write_activity_sizes(const std::filesystem::path& file, std::span<const ActivitySizeRow> rows,
                          const Provenance& prov);
void write_activity_spaces(const std::filesystem::path& file, std::span<const ActivityDistribution> dists,
                           std::span<const double> gammas, const Provenance& prov);

void write_exposure(const std::filesystem::path& file, std::span<const ExposureRecord> records,
                    const Provenance& prov);
std::vector<ExposureRecord> read_exposure(const std::filesystem::path& file);

/// Member list: basis,group,participant_id.
void write_risk_members(const std::filesystem::path& file, std::span<const RiskClassification> groups,
                        const Provenance& prov);
/// Cell polygons in lon/lat with basis and group properties.
void write_risk_geojson(const std::filesystem::path& file, std::span<const RiskClassification> groups,
                        const GridSpec& grid, const Provenance& prov);

struct ModelReport {
  std::string response;  ///< exposure metric name
  NbGlmmFit fit;
  std::vector<LrtResult> lrts;
  std::string error;  ///< non-empty when the fit could not run
};
void write_model_report(const std::filesystem::path& file, const ModelReport& report, const Provenance& prov);

void write_oracle_report(const std::filesystem::path& file, std::span<const OracleReport> reports,
                         const Provenance& prov);

/// Writes `content` to `file` through a temporary sibling and a rename.
void write_text(const std::filesystem::path& file, const std::string& content);

}  // namespace pvlx::io
