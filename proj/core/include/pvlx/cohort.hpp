#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvlx/grid.hpp"

namespace pvlx {

enum class Sex { Male, Female };
enum class HivStatus { Positive, Negative };
enum class VlSource { None, Measured, Imputed };

const char* to_string(Sex s) noexcept;
const char* to_string(HivStatus s) noexcept;
const char* to_string(VlSource s) noexcept;

/// One cohort member in one calendar year.
struct PersonYearRecord {
  std::string person_id;
  int year = 0;
  Sex sex = Sex::Female;
  double age = 15.0;
  HivStatus hiv_status = HivStatus::Negative;
  std::optional<double> viral_load;        ///< copies/ml
  std::optional<PointLocation> homestead;  ///< absent: resident outside the study area
  std::string ds_round;
  VlSource vl_source = VlSource::None;

  bool positive() const noexcept { return hiv_status == HivStatus::Positive; }
};

/// Checks the record invariants (VL only on positives, VL >= 0, unique
/// person-year). Throws Error(InvalidArgument) naming the first offender.
void validate_cohort(std::span<const PersonYearRecord> cohort);

/// Five-year age band, 15-19 through 50-54.
struct AgeBand {
  int lower = 15;
  int upper = 19;

  friend auto operator<=>(const AgeBand&, const AgeBand&) = default;
};

inline constexpr int kMinBandAge = 15;
inline constexpr int kMaxBandAge = 54;

/// Band containing `age`; ages outside 15-54 are clamped to the nearest band
/// and `clamped` (if given) is set.
AgeBand age_band_for(double age, bool* clamped = nullptr);

struct StratumKey {
  std::string ds_round;
  Sex sex = Sex::Female;
  AgeBand band;

  friend auto operator<=>(const StratumKey&, const StratumKey&) = default;
};

struct ImputationStratum {
  StratumKey key;
  std::vector<double> donor_pool;  ///< measured VLs in cohort order
};

using StrataMap = std::map<StratumKey, ImputationStratum>;

/// Groups measured viral loads of HIV-positive records by (round, sex, band).
/// Empty strata are omitted. `clamped_ages` receives the count of records
/// whose age had to be clamped into 15-54.
StrataMap build_strata(std::span<const PersonYearRecord> cohort,
                       std::size_t* clamped_ages = nullptr);

/// Fills every missing viral load on HIV-positive records by uniform
/// sampling with replacement from the matching donor pool. Falls back to
/// (round, sex, all ages), then (all rounds, sex, band), then
/// (all rounds, sex, all ages); throws Error(EmptyStratum) past that.
std::vector<PersonYearRecord> impute_viral_loads(std::span<const PersonYearRecord> cohort,
                                                 const StrataMap& strata, std::uint64_t seed);

/// Records of `year` whose homestead is present and inside the grid.
std::vector<PersonYearRecord> eligible_for_year(std::span<const PersonYearRecord> cohort,
                                                int year, const GridSpec& spec);

}  // namespace pvlx
