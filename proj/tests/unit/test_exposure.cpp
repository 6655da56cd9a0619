#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pvlx/error.hpp"
#include "pvlx/exposure.hpp"
#include "pvlx/rng.hpp"

using namespace pvlx;

namespace {

const GridSpec kGrid{0, 0, 100, 10, 10, {}};

Surface surface_of(MetricKind m, std::vector<std::optional<double>> v) {
  Surface s;
  s.metric = m;
  s.year = 2021;
  s.grid = kGrid;
  v.resize(kGrid.cell_count());
  s.values = std::move(v);
  return s;
}

ActivityDistribution random_dist(Rng& rng, std::size_t n_cells, const std::string& id = "A") {
  std::vector<std::size_t> idx(kGrid.cell_count());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < n_cells; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(n_cells);
  std::sort(idx.begin(), idx.end());
  ActivityDistribution d;
  d.participant_id = id;
  double total = 0.0;
  std::vector<double> w(n_cells);
  for (auto& x : w) total += (x = uniform01(rng) + 1e-6);
  for (std::size_t i = 0; i < n_cells; ++i) d.weights.emplace_back(kGrid.cell_at(idx[i]), w[i] / total);
  d.in_area_fraction = 1.0;
  return d;
}

Surface random_surface(Rng& rng, MetricKind m, double mask_prob = 0.0) {
  std::vector<std::optional<double>> v(kGrid.cell_count());
  for (auto& x : v)
    if (uniform01(rng) >= mask_prob) x = uniform01(rng) * 10.0 - 2.0;
  return surface_of(m, v);
}

ExposureRecord row(const std::string& id, MetricKind m, double v) {
  ExposureRecord r;
  r.participant_id = id;
  r.metric = m;
  r.gamma = 100.0;
  r.value = v;
  return r;
}

std::vector<ExposureRecord> table(const std::vector<double>& mvl, const std::vector<double>& pdv,
                                  RiskBasis basis = RiskBasis::PVL) {
  const MetricKind a = basis == RiskBasis::PVL ? MetricKind::MVL : MetricKind::MVL_P;
  const MetricKind b = basis == RiskBasis::PVL ? MetricKind::PDV : MetricKind::PDV_P;
  std::vector<ExposureRecord> out;
  for (std::size_t i = 0; i < mvl.size(); ++i) {
    const std::string id = "p" + std::to_string(10 + i);
    out.push_back(row(id, a, mvl[i]));
    out.push_back(row(id, b, pdv[i]));
  }
  return out;
}

std::set<std::string> ids(std::initializer_list<int> idx) {
  std::set<std::string> s;
  for (int i : idx) s.insert("p" + std::to_string(10 + i));
  return s;
}

}  // namespace

TEST(Exposure, HandArithmetic) {
  ActivityDistribution d;
  d.participant_id = "A";
  d.weights = {{{0, 0}, 0.75}, {{1, 0}, 0.25}};
  std::vector<std::optional<double>> v(100);
  v[0] = 2.0;
  v[1] = 6.0;
  const auto e = contextual_exposure(d, activity_space(d, 100), surface_of(MetricKind::PDV, v));
  EXPECT_DOUBLE_EQ(*e.value, 3.0);
  EXPECT_EQ(e.n_cells, 2u);
  EXPECT_EQ(e.masked_dropped, 0u);
  EXPECT_EQ(e.metric, MetricKind::PDV);
}

TEST(Exposure, ConstantSurfaceIsExact) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto d = random_dist(rng, 1 + uniform_index(rng, 60));
    const double c = uniform01(rng) * 100.0;
    const Surface s = surface_of(MetricKind::MVL, std::vector<std::optional<double>>(100, c));
    for (double g : {50.0, 95.0, 100.0}) EXPECT_EQ(*contextual_exposure(d, activity_space(d, g), s).value, c);
  }
}

TEST(Exposure, MaskedCellsAreDroppedAndRenormalized) {
  ActivityDistribution d;
  d.weights = {{{0, 0}, 0.5}, {{1, 0}, 0.3}, {{2, 0}, 0.2}};
  std::vector<std::optional<double>> v(100);
  v[0] = 1.0;
  v[2] = 6.0;
  const auto e = contextual_exposure(d, activity_space(d, 100), surface_of(MetricKind::MVL, v));
  EXPECT_DOUBLE_EQ(*e.value, (0.5 * 1.0 + 0.2 * 6.0) / 0.7);
  EXPECT_EQ(e.masked_dropped, 1u);

  v[0].reset();
  v[2].reset();
  try {
    contextual_exposure(d, activity_space(d, 100), surface_of(MetricKind::MVL, v));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UndefinedExposure);
  }
}

TEST(Exposure, MatchesBruteForceOnRandomCases) {
  Rng rng(50);
  for (int t = 0; t < 200; ++t) {
    const auto d = random_dist(rng, 50);
    const Surface s = random_surface(rng, MetricKind::CTI, 0.1);
    const double g = 10.0 + 90.0 * uniform01(rng);
    const auto space = activity_space(d, g);
    double sw = 0.0, swv = 0.0, lo = INFINITY, hi = -INFINITY;
    for (CellId c : space.cells) {
      const auto& v = s.at(c);
      if (!v) continue;
      const double w = std::find_if(d.weights.begin(), d.weights.end(), [&](auto& p) { return p.first == c; })->second;
      sw += w;
      swv += w * *v;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
    if (sw == 0.0) continue;
    const double e = *contextual_exposure(d, space, s).value;
    EXPECT_NEAR(e, swv / sw, 1e-12 * std::max(1.0, std::abs(swv / sw)));
    EXPECT_GE(e, lo - 1e-12);
    EXPECT_LE(e, hi + 1e-12);
  }
}

TEST(Exposure, ShiftEquivariance) {
  Rng rng(60);
  for (int t = 0; t < 100; ++t) {
    const auto d = random_dist(rng, 30);
    Surface s = random_surface(rng, MetricKind::MVL, 0.2);
    Surface shifted = s;
    const double c = uniform01(rng) * 20.0 - 10.0;
    for (auto& v : shifted.values)
      if (v) *v += c;
    const auto space = activity_space(d, 80);
    try {
      const double a = *contextual_exposure(d, space, s).value;
      const double b = *contextual_exposure(d, space, shifted).value;
      EXPECT_NEAR(b - a, c, 1e-12 * std::max(1.0, std::abs(b)));
    } catch (const Error&) {
    }
  }
}

TEST(Exposure, Gamma100EqualsWeightedMeanOverAllCells) {
  Rng rng(70);
  for (int t = 0; t < 100; ++t) {
    const auto d = random_dist(rng, 1 + uniform_index(rng, 40));
    const Surface s = random_surface(rng, MetricKind::PDV);
    double sw = 0.0, swv = 0.0;
    for (const auto& [c, w] : d.weights) {
      sw += w;
      swv += w * *s.at(c);
    }
    EXPECT_NEAR(*contextual_exposure(d, activity_space(d, 100), s).value, swv / sw, 1e-12);
  }
}

TEST(ExposureMatrix, RowsAndOrder) {
  Rng rng(80);
  std::vector<ActivityDistribution> dists{random_dist(rng, 20, "A"), ActivityDistribution{}, random_dist(rng, 5, "C")};
  dists[1].participant_id = "B";
  const std::vector<Surface> surfaces{random_surface(rng, MetricKind::MVL), random_surface(rng, MetricKind::PDV)};
  const std::vector<double> gammas{50, 95, 100};
  const auto m = exposure_matrix(dists, surfaces, gammas);
  ASSERT_EQ(m.size(), 3u * 2u * 3u);
  std::size_t k = 0;
  for (const auto& d : dists)
    for (const auto& s : surfaces)
      for (double g : gammas) {
        const auto& r = m[k++];
        EXPECT_EQ(r.participant_id, d.participant_id);
        EXPECT_EQ(r.metric, s.metric);
        EXPECT_EQ(r.gamma, g);
        if (d.participant_id == "B") {
          EXPECT_FALSE(r.value.has_value());
          EXPECT_FALSE(r.flag.empty());
        } else {
          const auto single = contextual_exposure(d, activity_space(d, g), s);
          EXPECT_EQ(r.value, single.value);
          EXPECT_EQ(r.n_cells, single.n_cells);
          EXPECT_TRUE(r.flag.empty());
        }
      }
}

TEST(ExposureMatrix, SingleParticipantThreeLevels) {
  Rng rng(81);
  const std::vector<ActivityDistribution> d{random_dist(rng, 10)};
  const std::vector<Surface> s{random_surface(rng, MetricKind::MVL_P)};
  const std::vector<double> gammas{50, 95, 100};
  EXPECT_EQ(exposure_matrix(d, s, gammas).size(), 3u);
}

TEST(ExposureMatrix, FullyMaskedBecomesFlaggedRow) {
  Rng rng(82);
  const std::vector<ActivityDistribution> d{random_dist(rng, 10)};
  const std::vector<Surface> s{surface_of(MetricKind::MVL, {})};
  const std::vector<double> gammas{100};
  const auto m = exposure_matrix(d, s, gammas);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_FALSE(m[0].value.has_value());
  EXPECT_EQ(m[0].masked_dropped, 10u);
  EXPECT_FALSE(m[0].flag.empty());
}

TEST(Risk, PerfectlyCorrelatedTenParticipants) {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  // Interpolated cut points: h = 9 p.
  const double p80 = 8.0 + 0.2 * (9.0 - 8.0);
  const double p20 = 2.0 + 0.8 * (3.0 - 2.0);
  std::vector<int> expect_high, expect_low;
  for (int i = 0; i < 10; ++i) {
    if (v[i] >= p80) expect_high.push_back(i);
    if (v[i] <= p20) expect_low.push_back(i);
  }
  ASSERT_EQ(expect_high, (std::vector<int>{8, 9}));
  ASSERT_EQ(expect_low, (std::vector<int>{0, 1}));

  const auto r = classify_risk(table(v, v), RiskBasis::PVL, {});
  EXPECT_DOUBLE_EQ(r.mvl_hi, p80);
  EXPECT_DOUBLE_EQ(r.pdv_lo, p20);
  EXPECT_EQ(r.high.members, ids({8, 9}));
  EXPECT_EQ(r.low.members, ids({0, 1}));
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(r.n_participants, 10u);
}

TEST(Risk, AllEqualIsDegenerate) {
  const std::vector<double> v(8, 3.3);
  const auto r = classify_risk(table(v, v, RiskBasis::PVL_P), RiskBasis::PVL_P, {});
  EXPECT_EQ(r.high.members.size(), 8u);
  EXPECT_EQ(r.low.members.size(), 8u);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.high.basis, RiskBasis::PVL_P);
}

TEST(Risk, AntiCorrelatedGivesEmptyGroups) {
  const std::vector<double> up{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> down{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  const auto r = classify_risk(table(up, down), RiskBasis::PVL, {});
  EXPECT_TRUE(r.high.members.empty());
  EXPECT_TRUE(r.low.members.empty());
}

TEST(Risk, DisjointForIncreasingCorrelatedPairs) {
  Rng rng(90);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + uniform_index(rng, 40);
    std::vector<double> a(n), b(n);
    double x = 0.0, y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = (x += 0.01 + uniform01(rng));
      b[i] = (y += 0.01 + uniform01(rng));
    }
    const auto r = classify_risk(table(a, b), RiskBasis::PVL, {});
    for (const auto& id : r.high.members) EXPECT_EQ(r.low.members.count(id), 0u);
    EXPECT_FALSE(r.high.members.empty());
    EXPECT_FALSE(r.low.members.empty());
  }
}

TEST(Risk, CollectiveCellsAndFiltering) {
  auto t = table({1, 2, 3, 4, 5, 6}, {1, 2, 3, 4, 5, 6});
  t.push_back(row("z-cti", MetricKind::CTI, 100.0));
  ExposureRecord other_gamma = row("p10", MetricKind::MVL, 99.0);
  other_gamma.gamma = 50.0;
  t.push_back(other_gamma);
  const std::map<std::string, std::vector<CellId>> spaces{{"p15", {{1, 1}, {2, 1}}}, {"p10", {{0, 0}}}};
  const auto r = classify_risk(t, RiskBasis::PVL, spaces);
  EXPECT_EQ(r.n_participants, 6u);
  EXPECT_EQ(r.high.members, ids({4, 5}));
  EXPECT_EQ(r.high.collective_cells, (std::set<CellId>{{1, 1}, {2, 1}}));
  EXPECT_EQ(r.low.members, ids({0, 1}));
  EXPECT_EQ(r.low.collective_cells, (std::set<CellId>{{0, 0}}));
}

TEST(Risk, TooFewParticipants) {
  try {
    classify_risk(table({1, 2, 3, 4}, {1, 2, 3, 4}), RiskBasis::PVL, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
  EXPECT_THROW(classify_risk(table({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}), RiskBasis::PVL_P, {}), Error);
}
