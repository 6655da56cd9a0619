#include "pvlx/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pvlx/error.hpp"

namespace pvlx::io {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Provenance::hash_hex() const { return fmt::format("{:016x}", config_hash); }

std::string Provenance::comment() const {
  return fmt::format("# pvlx config_hash={} seed={}", hash_hex(), seed);
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

namespace {

[[noreturn]] void parse_fail(const fs::path& file, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Io, fmt::format("{}:{}: {}", file.string(), line, what));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "na" || s == "NaN";
}

struct Writer {
  std::ostringstream out;
  explicit Writer(const Provenance& prov) { out << prov.comment() << '\n'; }
  template <class... Args>
  void line(fmt::format_string<Args...> f, Args&&... args) {
    out << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
};

}  // namespace

void write_text(const fs::path& file, const std::string& content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    f << content;
    if (!f) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::int64_t parse_iso8601(std::string_view s) {
  s = trim(s);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  const auto num = [&](std::size_t pos, std::size_t len, int& v) {
    if (pos + len > s.size()) return false;
    auto r = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    return r.ec == std::errc() && r.ptr == s.data() + pos + len;
  };
  const auto at = [&](std::size_t pos, char c) { return pos < s.size() && s[pos] == c; };
  if (!(num(0, 4, y) && at(4, '-') && num(5, 2, mo) && at(7, '-') && num(8, 2, d) &&
        (at(10, 'T') || at(10, ' ')) && num(11, 2, h) && at(13, ':') && num(14, 2, mi) && at(16, ':') &&
        num(17, 2, sec)))
    throw Error(ErrorKind::InvalidArgument, "bad ISO-8601 timestamp '" + std::string(s) + "'");
  std::size_t pos = 19;
  double frac = 0.0;
  if (at(pos, '.')) {
    std::size_t end = pos + 1;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    frac = std::stod("0" + std::string(s.substr(pos, end - pos)));
    pos = end;
  }
  int offset_s = 0;
  if (at(pos, 'Z')) {
    ++pos;
  } else if (at(pos, '+') || at(pos, '-')) {
    int oh = 0, om = 0;
    const int sign = s[pos] == '-' ? -1 : 1;
    if (!(num(pos + 1, 2, oh) && at(pos + 3, ':') && num(pos + 4, 2, om)))
      throw Error(ErrorKind::InvalidArgument, "bad UTC offset in '" + std::string(s) + "'");
    offset_s = sign * (oh * 3600 + om * 60);
    pos += 6;
  }
  if (pos != s.size()) throw Error(ErrorKind::InvalidArgument, "trailing text in timestamp '" + std::string(s) + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60)
    throw Error(ErrorKind::InvalidArgument, "invalid date/time in '" + std::string(s) + "'");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec - offset_s +
         static_cast<std::int64_t>(std::floor(frac + 0.5));
}

std::string format_iso8601(std::int64_t t) {
  using namespace std::chrono;
  const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
  const std::int64_t rem = t - static_cast<std::int64_t>(days) * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600,
                     (rem / 60) % 60, rem % 60);
}

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::column(std::string_view name, const fs::path& file) const {
  if (auto c = find_column(name)) return *c;
  throw Error(ErrorKind::Io, fmt::format("{}: missing column '{}'", file.string(), name));
}

Table read_table(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + file.string());
  Table t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto cells = split(body);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      parse_fail(file, n, fmt::format("expected {} fields, found {}", t.header.size(), cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(n);
  }
  if (t.header.empty()) throw Error(ErrorKind::Io, file.string() + ": no header row");
  return t;
}

std::vector<PersonYearRecord> read_cohort(const fs::path& file) {
  const Table t = read_table(file);
  const auto c_id = t.column("person_id", file), c_year = t.column("year", file), c_sex = t.column("sex", file),
             c_age = t.column("age", file), c_hiv = t.column("hiv_status", file),
             c_vl = t.column("viral_load", file), c_e = t.column("easting", file),
             c_n = t.column("northing", file), c_round = t.column("ds_round", file);
  const auto c_src = t.find_column("vl_source");

  std::vector<PersonYearRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t ln = t.line_numbers[i];
    PersonYearRecord r;
    r.person_id = row[c_id];
    if (r.person_id.empty()) parse_fail(file, ln, "empty person_id");
    const auto year = parse_number<int>(row[c_year]);
    if (!year) parse_fail(file, ln, "bad year '" + row[c_year] + "'");
    r.year = *year;
    const std::string sex = lower(row[c_sex]);
    if (sex == "male" || sex == "m")
      r.sex = Sex::Male;
    else if (sex == "female" || sex == "f")
      r.sex = Sex::Female;
    else
      parse_fail(file, ln, "bad sex '" + row[c_sex] + "'");
    const auto age = parse_number<double>(row[c_age]);
    if (!age) parse_fail(file, ln, "bad age '" + row[c_age] + "'");
    r.age = *age;
    const std::string hiv = lower(row[c_hiv]);
    if (hiv == "positive" || hiv == "pos" || hiv == "1")
      r.hiv_status = HivStatus::Positive;
    else if (hiv == "negative" || hiv == "neg" || hiv == "0")
      r.hiv_status = HivStatus::Negative;
    else
      parse_fail(file, ln, "hiv_status is required (got '" + row[c_hiv] + "')");
    if (!is_missing(row[c_vl])) {
      const auto vl = parse_number<double>(row[c_vl]);
      if (!vl) parse_fail(file, ln, "bad viral_load '" + row[c_vl] + "'");
      r.viral_load = *vl;
    }
    const bool e_missing = is_missing(row[c_e]), n_missing = is_missing(row[c_n]);
    if (e_missing != n_missing) parse_fail(file, ln, "easting and northing must both be present or both empty");
    if (!e_missing) {
      const auto e = parse_number<double>(row[c_e]), n = parse_number<double>(row[c_n]);
      if (!e || !n) parse_fail(file, ln, "bad homestead coordinates");
      r.homestead = PointLocation{*e, *n};
    }
    r.ds_round = row[c_round];
    if (c_src) {
      const std::string& src = row[*c_src];
      if (src == "measured")
        r.vl_source = VlSource::Measured;
      else if (src == "imputed")
        r.vl_source = VlSource::Imputed;
      else if (!src.empty())
        parse_fail(file, ln, "bad vl_source '" + src + "'");
    }
    out.push_back(std::move(r));
  }
  validate_cohort(out);
  return out;
}

void write_cohort(const fs::path& file, std::span<const PersonYearRecord> cohort, const Provenance& prov,
                  bool with_source) {
  Writer w(prov);
  w.out << "person_id,year,sex,age,hiv_status,viral_load,easting,northing,ds_round"
        << (with_source ? ",vl_source" : "") << '\n';
  for (const auto& r : cohort) {
    w.out << r.person_id << ',' << r.year << ',' << to_string(r.sex) << ',' << format_double(r.age) << ','
          << to_string(r.hiv_status) << ',' << (r.viral_load ? format_double(*r.viral_load) : "") << ','
          << (r.homestead ? format_double(r.homestead->easting) : "") << ','
          << (r.homestead ? format_double(r.homestead->northing) : "") << ',' << r.ds_round;
    if (with_source) w.out << ',' << to_string(r.vl_source);
    w.out << '\n';
  }
  write_text(file, w.out.str());
}

std::vector<GpsFix> read_gps(const fs::path& file) {
  const Table t = read_table(file);
  const auto c_id = t.column("participant_id", file), c_t = t.column("timestamp_iso8601", file),
             c_lat = t.column("lat", file), c_lon = t.column("lon", file);
  std::vector<GpsFix> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    GpsFix f;
    f.participant_id = row[c_id];
    try {
      f.timestamp = parse_iso8601(row[c_t]);
    } catch (const Error& e) {
      parse_fail(file, t.line_numbers[i], e.what());
    }
    // Unparseable coordinates become NaN and are dropped with a warning at ingestion.
    f.lat = parse_number<double>(row[c_lat]).value_or(std::numeric_limits<double>::quiet_NaN());
    f.lon = parse_number<double>(row[c_lon]).value_or(std::numeric_limits<double>::quiet_NaN());
    out.push_back(std::move(f));
  }
  return out;
}

void write_gps(const fs::path& file, std::span<const GpsFix> fixes, const Provenance& prov) {
  Writer w(prov);
  w.out << "participant_id,timestamp_iso8601,lat,lon\n";
  for (const auto& f : fixes)
    w.out << f.participant_id << ',' << format_iso8601(f.timestamp) << ',' << format_double(f.lat) << ','
          << format_double(f.lon) << '\n';
  write_text(file, w.out.str());
}

void write_surface(const fs::path& file, const Surface& s, const Provenance& prov) {
  Writer w(prov);
  w.line("# metric={} year={}", to_string(s.metric), s.year);
  w.out << "col,row,easting,northing,value,masked\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const CellId c = s.grid.cell_at(i);
    const PointLocation p = centroid(c, s.grid);
    const auto& v = s.values[i];
    w.out << c.col << ',' << c.row << ',' << format_double(p.easting) << ',' << format_double(p.northing) << ','
          << (v ? format_double(*v) : "NA") << ',' << (v ? 0 : 1) << '\n';
  }
  write_text(file, w.out.str());
}

Surface read_surface(const fs::path& file, MetricKind metric, int year, const GridSpec& grid) {
  const Table t = read_table(file);
  const auto c_col = t.column("col", file), c_row = t.column("row", file), c_v = t.column("value", file),
             c_m = t.column("masked", file);
  Surface s;
  s.metric = metric;
  s.year = year;
  s.grid = grid;
  s.values.assign(grid.cell_count(), std::nullopt);
  std::vector<bool> seen(grid.cell_count(), false);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto col = parse_number<int>(row[c_col]), r = parse_number<int>(row[c_row]);
    if (!col || !r || !grid.contains({*col, *r})) parse_fail(file, t.line_numbers[i], "cell outside grid");
    const std::size_t idx = grid.index({*col, *r});
    seen[idx] = true;
    if (row[c_m] == "1") continue;
    const auto v = parse_number<double>(row[c_v]);
    if (!v) parse_fail(file, t.line_numbers[i], "bad value '" + row[c_v] + "'");
    s.values[idx] = *v;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error(ErrorKind::Io, file.string() + ": surface does not cover the configured grid");
  return s;
}

void write_summary(const fs::path& file, std::span<const SummaryRow> rows, const Provenance& prov) {
  Writer w(prov);
  for (const auto& r : rows)
    if (!r.flag.empty()) w.line("# flag {}: {}", to_string(r.metric), r.flag);
  w.out << "metric,mean,sd,min,q1,median,q3,max\n";
  for (const auto& r : rows) {
    if (!r.stats) {
      w.line("{},NA,NA,NA,NA,NA,NA,NA", to_string(r.metric));
      continue;
    }
    const auto& s = *r.stats;
    w.line("{},{},{},{},{},{},{},{}", to_string(r.metric), format_double(s.mean), format_double(s.sd),
           format_double(s.min), format_double(s.q1), format_double(s.median), format_double(s.q3),
           format_double(s.max));
  }
  write_text(file, w.out.str());
}

void write_activity_sizes(const fs::path& file, std::span<const ActivitySizeRow> rows, const Provenance& prov) {
  Writer w(prov);
  w.out << "participant_id,gamma,n_cells,covered_fraction\n";
  for (const auto& r : rows)
    w.line("{},{},{},{}", r.participant_id, format_double(r.gamma), r.n_cells, format_double(r.covered_fraction));
  write_text(file, w.out.str());
}

void write_activity_spaces(const fs::path& file, std::span<const ActivityDistribution> dists,
                           std::span<const double> gammas, const Provenance& prov) {
  Writer w(prov);
  w.out << "participant_id,gamma,cell_col,cell_row,weight\n";
  for (const auto& d : dists) {
    if (d.weights.empty()) continue;
    for (double g : gammas) {
      const ActivitySpace space = activity_space(d, g);
      for (CellId c : space.cells) {
        auto it = std::lower_bound(d.weights.begin(), d.weights.end(), c,
                                   [](const auto& p, CellId k) { return p.first < k; });
        w.line("{},{},{},{},{}", d.participant_id, format_double(g), c.col, c.row, format_double(it->second));
      }
    }
  }
  write_text(file, w.out.str());
}

void write_exposure(const fs::path& file, std::span<const ExposureRecord> records, const Provenance& prov) {
  Writer w(prov);
  w.out << "participant_id,metric,gamma,value,n_cells,masked_dropped\n";
  for (const auto& r : records)
    w.line("{},{},{},{},{},{}", r.participant_id, to_string(r.metric), format_double(r.gamma),
           r.value ? format_double(*r.value) : std::string("NA"), r.n_cells, r.masked_dropped);
  write_text(file, w.out.str());
}

std::vector<ExposureRecord> read_exposure(const fs::path& file) {
  const Table t = read_table(file);
  const auto c_id = t.column("participant_id", file), c_m = t.column("metric", file),
             c_g = t.column("gamma", file), c_v = t.column("value", file), c_n = t.column("n_cells", file),
             c_d = t.column("masked_dropped", file);
  std::vector<ExposureRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    ExposureRecord r;
    r.participant_id = row[c_id];
    try {
      r.metric = parse_metric(row[c_m]);
    } catch (const Error& e) {
      parse_fail(file, t.line_numbers[i], e.what());
    }
    const auto g = parse_number<double>(row[c_g]);
    const auto n = parse_number<std::size_t>(row[c_n]);
    const auto d = parse_number<std::size_t>(row[c_d]);
    if (!g || !n || !d) parse_fail(file, t.line_numbers[i], "bad numeric field");
    r.gamma = *g;
    r.n_cells = *n;
    r.masked_dropped = *d;
    if (!is_missing(row[c_v])) {
      const auto v = parse_number<double>(row[c_v]);
      if (!v) parse_fail(file, t.line_numbers[i], "bad value '" + row[c_v] + "'");
      r.value = *v;
    } else {
      r.flag = "NA";
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_risk_members(const fs::path& file, std::span<const RiskClassification> groups, const Provenance& prov) {
  Writer w(prov);
  w.out << "basis,group,participant_id\n";
  for (const auto& rc : groups)
    for (const RiskGroup* g : {&rc.high, &rc.low})
      for (const auto& id : g->members) w.line("{},{},{}", to_string(g->basis), to_string(g->label), id);
  write_text(file, w.out.str());
}

void write_risk_geojson(const fs::path& file, std::span<const RiskClassification> groups, const GridSpec& grid,
                        const Provenance& prov) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["provenance"] = {{"config_hash", prov.hash_hex()}, {"seed", prov.seed}};
  fc["features"] = ordered_json::array();
  for (const auto& rc : groups) {
    for (const RiskGroup* g : {&rc.high, &rc.low}) {
      for (CellId c : g->collective_cells) {
        const double e0 = grid.origin_easting + c.col * grid.cell_size;
        const double n0 = grid.origin_northing + c.row * grid.cell_size;
        ordered_json ring = ordered_json::array();
        for (auto [de, dn] : {std::pair{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}) {
          const LatLon ll = unproject({e0 + de * grid.cell_size, n0 + dn * grid.cell_size}, grid);
          ring.push_back({ll.lon, ll.lat});
        }
        ordered_json feature;
        feature["type"] = "Feature";
        feature["properties"] = {{"basis", to_string(g->basis)},
                                 {"group", to_string(g->label)},
                                 {"col", c.col},
                                 {"row", c.row},
                                 {"fill", g->label == RiskLabel::High ? "#d7301f" : "#2b8cbe"}};
        feature["geometry"] = {{"type", "Polygon"}, {"coordinates", ordered_json::array({ring})}};
        fc["features"].push_back(std::move(feature));
      }
    }
  }
  write_text(file, fc.dump(1) + "\n");
}

namespace {

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

void write_model_report(const fs::path& file, const ModelReport& rep, const Provenance& prov) {
  ordered_json j;
  j["provenance"] = {{"config_hash", prov.hash_hex()}, {"seed", prov.seed}};
  j["response"] = rep.response;
  j["model"] = "negative binomial GLMM, random intercept per participant, adaptive Gauss-Hermite quadrature";
  j["variance"] = "mu + mu^2 / phi";
  j["response_scale"] = "exposure in surface units, not rescaled";
  if (!rep.error.empty()) {
    j["converged"] = false;
    j["error"] = rep.error;
    write_text(file, j.dump(2) + "\n");
    return;
  }
  const NbGlmmFit& f = rep.fit;
  j["converged"] = f.converged;
  j["n_obs"] = f.n_obs;
  j["n_participants"] = f.n_subjects;
  j["quadrature_points"] = f.quadrature_points;
  j["age_center"] = f.age_center;
  j["age_scale"] = f.age_scale;

  const auto p_for = [&](Term t) -> ordered_json {
    for (const auto& l : rep.lrts) {
      const auto terms = block_terms(l.block);
      if (std::find(terms.begin(), terms.end(), t) != terms.end())
        return l.p_value ? ordered_json(*l.p_value) : ordered_json(nullptr);
    }
    return nullptr;
  };
  j["coefficients"] = ordered_json::array();
  for (int k = 0; k < kNumTerms; ++k) {
    const auto t = static_cast<Term>(k);
    const auto i = static_cast<std::size_t>(k);
    ordered_json row;
    row["term"] = to_string(t);
    row["estimate"] = f.estimated[i] ? ordered_json(f.beta[i]) : ordered_json(nullptr);
    row["std_error"] = f.estimated[i] ? number_or_null(f.se[i]) : ordered_json(nullptr);
    row["lrt_p_value"] = p_for(t);
    j["coefficients"].push_back(std::move(row));
  }
  j["phi"] = f.phi;
  j["sigma_b2"] = f.sigma_b2;
  j["sigma_b2_at_boundary"] = f.sigma_at_boundary;
  j["loglik"] = f.loglik;
  j["iterations"] = f.iterations;
  j["lrt"] = ordered_json::array();
  for (const auto& l : rep.lrts) {
    j["lrt"].push_back({{"block", to_string(l.block)},
                        {"df", l.df},
                        {"deviance", l.deviance},
                        {"p_value", l.p_value ? ordered_json(*l.p_value) : ordered_json(nullptr)},
                        {"reduced_converged", l.reduced_converged},
                        {"reduced_loglik", l.reduced_loglik}});
  }
  j["loglik_trace"] = f.loglik_trace;
  j["warnings"] = f.warnings;
  write_text(file, j.dump(2) + "\n");
}

void write_oracle_report(const fs::path& file, std::span<const OracleReport> reports, const Provenance& prov) {
  ordered_json j;
  j["provenance"] = {{"config_hash", prov.hash_hex()}, {"seed", prov.seed}};
  bool all = true;
  j["checks"] = ordered_json::array();
  for (const auto& r : reports) {
    all = all && r.passed;
    j["checks"].push_back({{"check", r.check},
                           {"status", r.skipped ? "skipped" : (r.passed ? "pass" : "fail")},
                           {"n_compared", r.n_compared},
                           {"oracle_value", number_or_null(r.oracle_value)},
                           {"pipeline_value", number_or_null(r.pipeline_value)},
                           {"max_abs_dev", number_or_null(r.max_abs_dev)},
                           {"max_rel_dev", number_or_null(r.max_rel_dev)},
                           {"tolerance", r.tolerance},
                           {"detail", r.detail}});
  }
  j["passed"] = all;
  write_text(file, j.dump(2) + "\n");
}

}  // namespace pvlx::io
