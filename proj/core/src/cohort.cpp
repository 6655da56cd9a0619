#include "pvlx/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <spdlog/spdlog.h>

#include "pvlx/error.hpp"
#include "pvlx/rng.hpp"

namespace pvlx {

const char* to_string(Sex s) noexcept { return s == Sex::Male ? "male" : "female"; }

const char* to_string(HivStatus s) noexcept {
  return s == HivStatus::Positive ? "positive" : "negative";
}

const char* to_string(VlSource s) noexcept {
  switch (s) {
    case VlSource::Measured: return "measured";
    case VlSource::Imputed: return "imputed";
    case VlSource::None: return "";
  }
  return "";
}

void validate_cohort(std::span<const PersonYearRecord> cohort) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& r : cohort) {
    const std::string who = r.person_id + "/" + std::to_string(r.year);
    if (r.viral_load) {
      if (!r.positive())
        throw Error(ErrorKind::InvalidArgument, "cohort: viral load on HIV-negative record " + who);
      if (!(*r.viral_load >= 0.0) || !std::isfinite(*r.viral_load))
        throw Error(ErrorKind::InvalidArgument, "cohort: invalid viral load on record " + who);
    }
    if (!std::isfinite(r.age)) throw Error(ErrorKind::InvalidArgument, "cohort: bad age on " + who);
    if (r.homestead &&
        (!std::isfinite(r.homestead->easting) || !std::isfinite(r.homestead->northing)))
      throw Error(ErrorKind::InvalidCoordinate, "cohort: non-finite homestead on " + who);
    if (!seen.emplace(r.person_id, r.year).second)
      throw Error(ErrorKind::InvalidArgument, "cohort: duplicate person-year " + who);
  }
}

AgeBand age_band_for(double age, bool* clamped) {
  int a = static_cast<int>(std::floor(age));
  bool was_clamped = false;
  if (a < kMinBandAge) {
    a = kMinBandAge;
    was_clamped = true;
  } else if (a > kMaxBandAge) {
    a = kMaxBandAge;
    was_clamped = true;
  }
  if (clamped) *clamped = was_clamped;
  const int lower = kMinBandAge + 5 * ((a - kMinBandAge) / 5);
  return AgeBand{lower, lower + 4};
}

StrataMap build_strata(std::span<const PersonYearRecord> cohort, std::size_t* clamped_ages) {
  if (cohort.empty()) throw Error(ErrorKind::InsufficientData, "build_strata: empty cohort");
  StrataMap strata;
  std::size_t n_clamped = 0;
  for (const auto& r : cohort) {
    bool clamped = false;
    const AgeBand band = age_band_for(r.age, &clamped);
    if (clamped) ++n_clamped;
    // Only measured values are donors, never earlier imputations.
    if (!r.positive() || !r.viral_load || r.vl_source == VlSource::Imputed) continue;
    StratumKey key{r.ds_round, r.sex, band};
    auto [it, inserted] = strata.try_emplace(key);
    if (inserted) it->second.key = key;
    it->second.donor_pool.push_back(*r.viral_load);
  }
  if (n_clamped > 0)
    spdlog::warn("build_strata: {} record(s) with age outside 15-54 clamped to the nearest band",
                 n_clamped);
  if (clamped_ages) *clamped_ages = n_clamped;
  return strata;
}

namespace {

struct WidenedPools {
  std::map<std::pair<std::string, Sex>, std::vector<double>> round_sex;
  std::map<std::pair<Sex, AgeBand>, std::vector<double>> sex_band;
  std::map<Sex, std::vector<double>> sex_only;

  explicit WidenedPools(const StrataMap& strata) {
    for (const auto& [key, stratum] : strata) {
      auto append = [&](std::vector<double>& dst) {
        dst.insert(dst.end(), stratum.donor_pool.begin(), stratum.donor_pool.end());
      };
      append(round_sex[{key.ds_round, key.sex}]);
      append(sex_band[{key.sex, key.band}]);
      append(sex_only[key.sex]);
    }
  }
};

template <class Map, class Key>
const std::vector<double>* find_pool(const Map& m, const Key& k) {
  auto it = m.find(k);
  return (it == m.end() || it->second.empty()) ? nullptr : &it->second;
}

}  // namespace

std::vector<PersonYearRecord> impute_viral_loads(std::span<const PersonYearRecord> cohort,
                                                 const StrataMap& strata, std::uint64_t seed) {
  const WidenedPools widened(strata);
  Rng rng(seed);
  std::vector<PersonYearRecord> out(cohort.begin(), cohort.end());
  std::size_t n_imputed = 0;
  std::size_t n_widened = 0;

  for (auto& r : out) {
    if (!r.positive()) continue;
    if (r.viral_load) {
      if (r.vl_source == VlSource::None) r.vl_source = VlSource::Measured;
      continue;
    }
    const AgeBand band = age_band_for(r.age);
    const std::vector<double>* pool = nullptr;
    if (auto it = strata.find(StratumKey{r.ds_round, r.sex, band});
        it != strata.end() && !it->second.donor_pool.empty()) {
      pool = &it->second.donor_pool;
    } else {
      ++n_widened;
      pool = find_pool(widened.round_sex, std::pair{r.ds_round, r.sex});
      if (!pool) pool = find_pool(widened.sex_band, std::pair{r.sex, band});
      if (!pool) pool = find_pool(widened.sex_only, r.sex);
    }
    if (!pool)
      throw Error(ErrorKind::EmptyStratum,
                  "impute: no donor viral loads for record " + r.person_id + "/" +
                      std::to_string(r.year) + " (round " + r.ds_round + ", " + to_string(r.sex) +
                      ", age " + std::to_string(r.age) + ")");
    r.viral_load = (*pool)[uniform_index(rng, pool->size())];
    r.vl_source = VlSource::Imputed;
    ++n_imputed;
  }
  if (n_widened > 0)
    spdlog::info("impute: {} of {} imputation(s) used a widened stratum", n_widened, n_imputed);
  return out;
}

std::vector<PersonYearRecord> eligible_for_year(std::span<const PersonYearRecord> cohort,
                                                int year, const GridSpec& spec) {
  std::vector<PersonYearRecord> out;
  for (const auto& r : cohort) {
    if (r.year != year || !r.homestead) continue;
    if (!cell_of(*r.homestead, spec)) continue;
    out.push_back(r);
  }
  return out;
}

}  // namespace pvlx
