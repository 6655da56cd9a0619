#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "pvlx/cohort.hpp"
#include "pvlx/error.hpp"
#include "pvlx/synth.hpp"

using namespace pvlx;

namespace {

PersonYearRecord positive(std::string id, Sex sex, double age, std::optional<double> vl,
                          std::string round = "R1", int year = 2021) {
  PersonYearRecord r;
  r.person_id = std::move(id);
  r.year = year;
  r.sex = sex;
  r.age = age;
  r.hiv_status = HivStatus::Positive;
  r.viral_load = vl;
  r.ds_round = std::move(round);
  r.homestead = PointLocation{50.0, 50.0};
  return r;
}

PersonYearRecord negative(std::string id, double age = 30.0, int year = 2021) {
  PersonYearRecord r;
  r.person_id = std::move(id);
  r.year = year;
  r.age = age;
  r.ds_round = "R1";
  r.homestead = PointLocation{50.0, 50.0};
  return r;
}

}  // namespace

TEST(Cohort, AgeBands) {
  EXPECT_EQ(age_band_for(15.0), (AgeBand{15, 19}));
  EXPECT_EQ(age_band_for(19.99), (AgeBand{15, 19}));
  EXPECT_EQ(age_band_for(22.0), (AgeBand{20, 24}));
  EXPECT_EQ(age_band_for(54.5), (AgeBand{50, 54}));
  bool clamped = false;
  EXPECT_EQ(age_band_for(71.0, &clamped), (AgeBand{50, 54}));
  EXPECT_TRUE(clamped);
  clamped = false;
  EXPECT_EQ(age_band_for(13.0, &clamped), (AgeBand{15, 19}));
  EXPECT_TRUE(clamped);
  clamped = true;
  age_band_for(30.0, &clamped);
  EXPECT_FALSE(clamped);
}

TEST(Cohort, SinglePositiveMakesOneStratum) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Male, 22, 500.0, "R")};
  const StrataMap s = build_strata(c);
  ASSERT_EQ(s.size(), 1u);
  const auto& [key, stratum] = *s.begin();
  EXPECT_EQ(key.ds_round, "R");
  EXPECT_EQ(key.sex, Sex::Male);
  EXPECT_EQ(key.band, (AgeBand{20, 24}));
  EXPECT_EQ(stratum.donor_pool, std::vector<double>{500.0});
}

TEST(Cohort, NoMeasuredLoadsGivesEmptyMap) {
  const std::vector<PersonYearRecord> c{negative("a"), positive("b", Sex::Female, 30, std::nullopt)};
  EXPECT_TRUE(build_strata(c).empty());
  EXPECT_THROW(build_strata({}), Error);
}

TEST(Cohort, SameStratumPoolsTogether) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Female, 31, 500.0),
                                        positive("b", Sex::Female, 33, 80000.0)};
  const StrataMap s = build_strata(c);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.begin()->second.donor_pool.size(), 2u);
}

TEST(Cohort, EveryMeasuredLoadInExactlyOnePool) {
  const std::vector<PersonYearRecord> cohort = gen_cohort(ScenarioConfig{.n_persons = 800});
  std::size_t clamped = 0;
  const StrataMap strata = build_strata(cohort, &clamped);
  std::size_t measured = 0;
  for (const auto& r : cohort) measured += (r.positive() && r.viral_load) ? 1 : 0;
  std::size_t pooled = 0;
  for (const auto& [k, s] : strata) {
    EXPECT_FALSE(s.donor_pool.empty());
    pooled += s.donor_pool.size();
  }
  EXPECT_EQ(pooled, measured);
}

TEST(Cohort, OutOfBandAgesAreClampedAndCounted) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Male, 60, 100.0),
                                        positive("b", Sex::Male, 52, 200.0)};
  std::size_t clamped = 0;
  const StrataMap s = build_strata(c, &clamped);
  EXPECT_EQ(clamped, 1u);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.begin()->second.donor_pool.size(), 2u);
}

TEST(Cohort, MeasuredLoadsAreNeverAltered) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Male, 22, 12000.0),
                                        positive("b", Sex::Male, 23, std::nullopt), negative("n")};
  const auto out = impute_viral_loads(c, build_strata(c), 1);
  EXPECT_EQ(out[0].viral_load, 12000.0);
  EXPECT_EQ(out[0].vl_source, VlSource::Measured);
  EXPECT_EQ(out[1].viral_load, 12000.0);
  EXPECT_EQ(out[1].vl_source, VlSource::Imputed);
  EXPECT_FALSE(out[2].viral_load.has_value());
  EXPECT_EQ(out[2].vl_source, VlSource::None);
}

TEST(Cohort, SingletonPoolForcesValue) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Female, 40, 700.0),
                                        positive("b", Sex::Female, 41, std::nullopt)};
  const auto out = impute_viral_loads(c, build_strata(c), 99);
  EXPECT_EQ(out[1].viral_load, 700.0);
}

TEST(Cohort, TwoValuePoolSplitsEvenly) {
  std::vector<PersonYearRecord> c{positive("d1", Sex::Male, 30, 100.0),
                                  positive("d2", Sex::Male, 31, 1000.0)};
  for (int i = 0; i < 10000; ++i) c.push_back(positive("m" + std::to_string(i), Sex::Male, 32, std::nullopt));
  const auto out = impute_viral_loads(c, build_strata(c), 20240611);
  int low = 0;
  for (std::size_t i = 2; i < out.size(); ++i) {
    ASSERT_TRUE(out[i].viral_load == 100.0 || out[i].viral_load == 1000.0);
    low += out[i].viral_load == 100.0 ? 1 : 0;
  }
  EXPECT_NEAR(low / 10000.0, 0.5, 0.02);
}

TEST(Cohort, FallbackWidensToRoundAndSex) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Female, 20, 333.0, "R1"),
                                        positive("b", Sex::Female, 50, std::nullopt, "R1"),
                                        positive("c", Sex::Male, 50, 999.0, "R1")};
  const auto out = impute_viral_loads(c, build_strata(c), 5);
  EXPECT_EQ(out[1].viral_load, 333.0);
}

TEST(Cohort, FallbackWidensAcrossRounds) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Female, 44, 444.0, "R1"),
                                        positive("b", Sex::Female, 44, std::nullopt, "R2")};
  EXPECT_EQ(impute_viral_loads(c, build_strata(c), 5)[1].viral_load, 444.0);
}

TEST(Cohort, EmptyPoolAfterWideningIsAnError) {
  const std::vector<PersonYearRecord> c{positive("a", Sex::Male, 44, 444.0),
                                        positive("b", Sex::Female, 44, std::nullopt)};
  try {
    impute_viral_loads(c, build_strata(c), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyStratum);
    EXPECT_NE(std::string(e.what()).find("b/2021"), std::string::npos);
  }
}

TEST(Cohort, ImputationProperties) {
  const auto cohort = gen_cohort(ScenarioConfig{.n_persons = 1500});
  const auto strata = build_strata(cohort);
  const auto a = impute_viral_loads(cohort, strata, 77);
  const auto b = impute_viral_loads(cohort, strata, 77);

  std::multiset<double> measured;
  for (const auto& r : cohort)
    if (r.positive() && r.viral_load) measured.insert(*r.viral_load);

  ASSERT_EQ(a.size(), cohort.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].viral_load, b[i].viral_load);
    if (a[i].positive()) {
      ASSERT_TRUE(a[i].viral_load.has_value());
      EXPECT_TRUE(measured.count(*a[i].viral_load) > 0);
    } else {
      EXPECT_FALSE(a[i].viral_load.has_value());
    }
  }
  const auto again = impute_viral_loads(a, build_strata(a), 123);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(again[i].viral_load, a[i].viral_load);
    EXPECT_EQ(again[i].vl_source, a[i].vl_source);
  }
}

TEST(Cohort, EligibleForYear) {
  const GridSpec g{0, 0, 100, 10, 10, {}};
  std::vector<PersonYearRecord> c{negative("in"), positive("pos", Sex::Male, 30, 10.0), negative("away"),
                                  negative("outside"), negative("other-year", 30, 2022)};
  c[2].homestead.reset();
  c[3].homestead = PointLocation{1500.0, 50.0};
  const auto e = eligible_for_year(c, 2021, g);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].person_id, "in");
  EXPECT_EQ(e[1].person_id, "pos");
}

TEST(Cohort, ValidateCohort) {
  std::vector<PersonYearRecord> c{negative("a"), positive("b", Sex::Male, 30, 10.0)};
  EXPECT_NO_THROW(validate_cohort(c));
  c[0].viral_load = 5.0;
  EXPECT_THROW(validate_cohort(c), Error);
  c[0].viral_load.reset();
  c[1].viral_load = -1.0;
  EXPECT_THROW(validate_cohort(c), Error);
  c[1].viral_load = 10.0;
  c.push_back(negative("a"));
  EXPECT_THROW(validate_cohort(c), Error);
}
