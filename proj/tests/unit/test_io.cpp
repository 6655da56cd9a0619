#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pvlx/error.hpp"
#include "pvlx/io.hpp"
#include "pvlx/synth.hpp"

using namespace pvlx;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pvlx_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path file(const std::string& name) const { return dir_ / name; }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  static void put(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

  const io::Provenance prov_{0x0123456789abcdefULL, 42};
  fs::path dir_;
};

}  // namespace

TEST(IoBasics, Fnv1a) {
  EXPECT_EQ(io::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(io::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(io::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(IoBasics, ProvenanceComment) {
  const io::Provenance p{0xabcULL, 7};
  EXPECT_EQ(p.comment(), "# pvlx config_hash=0000000000000abc seed=7");
}

TEST(IoBasics, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -2.5e17}) EXPECT_EQ(std::stod(io::format_double(v)), v);
  EXPECT_EQ(io::format_double(3.0), "3");
}

TEST(IoBasics, Iso8601) {
  EXPECT_EQ(io::parse_iso8601("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(io::parse_iso8601("2022-01-01T00:00:00Z"), 1640995200);
  EXPECT_EQ(io::parse_iso8601("2022-01-01T02:00:00+02:00"), 1640995200);
  EXPECT_EQ(io::parse_iso8601("2021-12-31T22:30:00-01:30"), 1640995200);
  EXPECT_EQ(io::parse_iso8601("2022-01-01T00:00:00.75"), 1640995201);
  EXPECT_EQ(io::parse_iso8601("2022-01-01T00:00:00.25Z"), 1640995200);
  EXPECT_EQ(io::parse_iso8601("2024-02-29T12:00:00"), 1709208000);
  EXPECT_EQ(io::format_iso8601(1640995200), "2022-01-01T00:00:00Z");
  for (std::int64_t t : {0LL, 951782400LL, 1709208000LL, 4102444799LL})
    EXPECT_EQ(io::parse_iso8601(io::format_iso8601(t)), t);
  EXPECT_THROW(io::parse_iso8601("2022-13-01T00:00:00Z"), Error);
  EXPECT_THROW(io::parse_iso8601("yesterday"), Error);
  EXPECT_THROW(io::parse_iso8601("2022-01-01T00:00:00Zjunk"), Error);
}

TEST_F(IoTest, CohortRoundTrip) {
  ScenarioConfig cfg;
  cfg.n_persons = 200;
  const auto cohort = gen_cohort(cfg);
  io::write_cohort(file("c.csv"), cohort, prov_, false);
  const auto back = io::read_cohort(file("c.csv"));
  ASSERT_EQ(back.size(), cohort.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].person_id, cohort[i].person_id);
    EXPECT_EQ(back[i].year, cohort[i].year);
    EXPECT_EQ(back[i].sex, cohort[i].sex);
    EXPECT_EQ(back[i].age, cohort[i].age);
    EXPECT_EQ(back[i].hiv_status, cohort[i].hiv_status);
    EXPECT_EQ(back[i].viral_load, cohort[i].viral_load);
    EXPECT_EQ(back[i].homestead, cohort[i].homestead);
    EXPECT_EQ(back[i].ds_round, cohort[i].ds_round);
  }
  EXPECT_EQ(slurp(file("c.csv")).rfind(prov_.comment() + "\n", 0), 0u);
}

TEST_F(IoTest, CohortRequiresStatus) {
  put(file("c.csv"), "person_id,year,sex,age,hiv_status,viral_load,easting,northing,ds_round\n"
                     "a,2021,male,30,,,1,1,R1\n");
  try {
    io::read_cohort(file("c.csv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  put(file("d.csv"), "person_id,year,sex,age,viral_load\n");
  EXPECT_THROW(io::read_cohort(file("d.csv")), Error);
  EXPECT_THROW(io::read_cohort(file("missing.csv")), Error);
}

TEST_F(IoTest, GpsRoundTrip) {
  ScenarioConfig cfg;
  cfg.n_persons = 10;
  cfg.n_participants_gps = 3;
  cfg.fixes_per_participant = 50;
  const auto fixes = gen_trajectories(cfg);
  io::write_gps(file("g.csv"), fixes, prov_);
  const auto back = io::read_gps(file("g.csv"));
  ASSERT_EQ(back.size(), fixes.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].participant_id, fixes[i].participant_id);
    EXPECT_EQ(back[i].timestamp, fixes[i].timestamp);
    EXPECT_EQ(back[i].lat, fixes[i].lat);
    EXPECT_EQ(back[i].lon, fixes[i].lon);
  }
  EXPECT_NE(slurp(file("g.csv")).find("participant_id,timestamp_iso8601,lat,lon\n"), std::string::npos);
}

TEST_F(IoTest, SurfaceRoundTrip) {
  Surface s;
  s.metric = MetricKind::CTI_P;
  s.year = 2023;
  s.grid = GridSpec{100, 200, 50, 3, 2, {}};
  s.values = {1.5, std::nullopt, 0.1, 1.0 / 3.0, 0.0, 99.0};
  io::write_surface(file("s.csv"), s, prov_);
  const Surface back = io::read_surface(file("s.csv"), s.metric, s.year, s.grid);
  EXPECT_EQ(back.values, s.values);
  const std::string text = slurp(file("s.csv"));
  EXPECT_NE(text.find("col,row,easting,northing,value,masked\n"), std::string::npos);
  EXPECT_NE(text.find("1,0,175,225,NA,1\n"), std::string::npos);
  EXPECT_THROW(io::read_surface(file("s.csv"), s.metric, s.year, GridSpec{100, 200, 50, 4, 2, {}}), Error);
}

TEST_F(IoTest, SummaryLayout) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  const std::vector<io::SummaryRow> rows{{MetricKind::MVL, summarize(v), ""},
                                         {MetricKind::PDV, std::nullopt, "all cells masked"}};
  io::write_summary(file("sum.csv"), rows, prov_);
  const auto t = io::read_table(file("sum.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"metric", "mean", "sd", "min", "q1", "median", "q3", "max"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "MVL");
  EXPECT_EQ(t.rows[0][5], "3");
  EXPECT_EQ(t.rows[1][1], "NA");
  EXPECT_NE(slurp(file("sum.csv")).find("all cells masked"), std::string::npos);
}

TEST_F(IoTest, ExposureRoundTripWithFlags) {
  ExposureRecord a;
  a.participant_id = "P1";
  a.metric = MetricKind::PDV_P;
  a.gamma = 95;
  a.value = 12.25;
  a.n_cells = 4;
  a.masked_dropped = 1;
  ExposureRecord b = a;
  b.metric = MetricKind::MVL;
  b.value.reset();
  b.flag = "undefined";
  const std::vector<ExposureRecord> rows{a, b};
  io::write_exposure(file("e.csv"), rows, prov_);
  const auto back = io::read_exposure(file("e.csv"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].value, 12.25);
  EXPECT_EQ(back[0].metric, MetricKind::PDV_P);
  EXPECT_EQ(back[0].gamma, 95.0);
  EXPECT_EQ(back[0].n_cells, 4u);
  EXPECT_EQ(back[0].masked_dropped, 1u);
  EXPECT_FALSE(back[1].value.has_value());
  EXPECT_FALSE(back[1].flag.empty());
  EXPECT_EQ(io::read_table(file("e.csv")).header,
            (std::vector<std::string>{"participant_id", "metric", "gamma", "value", "n_cells", "masked_dropped"}));
}

TEST_F(IoTest, ActivityExports) {
  ActivityDistribution d;
  d.participant_id = "P9";
  d.weights = {{{0, 0}, 0.6}, {{3, 1}, 0.4}};
  const std::vector<ActivityDistribution> dists{d};
  const std::vector<double> gammas{50, 100};
  io::write_activity_spaces(file("sp.csv"), dists, gammas, prov_);
  const auto t = io::read_table(file("sp.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"participant_id", "gamma", "cell_col", "cell_row", "weight"}));
  EXPECT_EQ(t.rows.size(), 3u);
  const std::vector<io::ActivitySizeRow> sizes{{"P9", 50, 1, 0.6}};
  io::write_activity_sizes(file("sz.csv"), sizes, prov_);
  EXPECT_EQ(io::read_table(file("sz.csv")).header,
            (std::vector<std::string>{"participant_id", "gamma", "n_cells", "covered_fraction"}));
}

TEST_F(IoTest, RiskOutputs) {
  RiskClassification c;
  c.high.basis = c.low.basis = RiskBasis::PVL_P;
  c.low.label = RiskLabel::Low;
  c.high.members = {"A", "B"};
  c.high.collective_cells = {{0, 0}, {1, 0}};
  c.low.members = {"C"};
  c.low.collective_cells = {{2, 2}};
  const std::vector<RiskClassification> groups{c};
  io::write_risk_members(file("m.csv"), groups, prov_);
  const auto t = io::read_table(file("m.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"basis", "group", "participant_id"}));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[2], (std::vector<std::string>{"PVL_P", "low", "C"}));

  const GridSpec g{0, 0, 100, 5, 5, Projection{-28.4, 32.2}};
  io::write_risk_geojson(file("r.geojson"), groups, g, prov_);
  const auto j = nlohmann::json::parse(slurp(file("r.geojson")));
  EXPECT_EQ(j["type"], "FeatureCollection");
  ASSERT_EQ(j["features"].size(), 3u);
  const auto& ring = j["features"][0]["geometry"]["coordinates"][0];
  EXPECT_EQ(ring.size(), 5u);
  EXPECT_EQ(ring[0], ring[4]);
  EXPECT_NEAR(ring[0][0].get<double>(), 32.2, 0.01);
  EXPECT_NEAR(ring[0][1].get<double>(), -28.4, 0.01);
}

TEST_F(IoTest, ModelReport) {
  io::ModelReport rep;
  rep.response = "MVL_P";
  rep.fit.beta = {1, 2, 3, 4, 5, 6};
  rep.fit.estimated.fill(true);
  rep.fit.se = {0.1, 0.2, 0.3, 0.4, 0.5, std::nan("")};
  rep.fit.converged = true;
  rep.lrts.push_back(LrtResult{LrtBlock::Age, 5.0, 3, 0.17, true, -10.0});
  rep.lrts.push_back(LrtResult{LrtBlock::Grids, 0.0, 1, std::nullopt, false, -9.0});
  io::write_model_report(file("m.json"), rep, prov_);
  const auto j = nlohmann::json::parse(slurp(file("m.json")));
  EXPECT_EQ(j["provenance"]["config_hash"], "0123456789abcdef");
  ASSERT_EQ(j["coefficients"].size(), 6u);
  EXPECT_EQ(j["coefficients"][2]["term"], "#Grids");
  EXPECT_TRUE(j["coefficients"][2]["lrt_p_value"].is_null());
  EXPECT_EQ(j["coefficients"][4]["lrt_p_value"], 0.17);
  EXPECT_TRUE(j["coefficients"][5]["std_error"].is_null());
  EXPECT_TRUE(j["coefficients"][1]["lrt_p_value"].is_null());
  EXPECT_EQ(j["lrt"].size(), 2u);
  EXPECT_TRUE(j.contains("variance"));
  for (const char* k : {"phi", "sigma_b2", "loglik", "warnings", "converged"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST_F(IoTest, OracleReport) {
  OracleReport ok{"a", 3, 1, 1, 0, 0, 1e-10, true, false, ""};
  OracleReport bad{"b", 3, 1, 2, 1, 1, 1e-10, false, false, "off"};
  std::vector<OracleReport> reports{ok};
  io::write_oracle_report(file("o.json"), reports, prov_);
  EXPECT_TRUE(nlohmann::json::parse(slurp(file("o.json")))["passed"].get<bool>());
  reports.push_back(bad);
  io::write_oracle_report(file("o.json"), reports, prov_);
  const auto j = nlohmann::json::parse(slurp(file("o.json")));
  EXPECT_FALSE(j["passed"].get<bool>());
  EXPECT_EQ(j["checks"][1]["status"], "fail");
}

TEST_F(IoTest, ReadTableSkipsCommentsAndTrims) {
  put(file("t.csv"), "# comment\n a , b \n\n1, 2\n# mid\n3,4\n");
  const auto t = io::read_table(file("t.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "2");
  EXPECT_EQ(t.line_numbers[1], 6u);
  EXPECT_EQ(t.column("b", file("t.csv")), 1u);
  EXPECT_THROW(t.column("zz", file("t.csv")), Error);
}

TEST_F(IoTest, WriteTextReplacesAtomically) {
  io::write_text(file("x.txt"), "one");
  io::write_text(file("x.txt"), "two");
  EXPECT_EQ(slurp(file("x.txt")), "two");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir_)) ++n;
  EXPECT_EQ(n, 1u);
}
