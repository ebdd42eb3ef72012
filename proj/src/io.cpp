#include "brmax/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "brmax/errors.hpp"

namespace brmax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line, const std::string& source, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(source, lineno, "unterminated quote");
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& source, std::size_t line, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v))
    throw ParseError(source, line, "bad number for " + what + ": '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& source, std::size_t line, const std::string& what) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(source, line, "bad integer for " + what + ": '" + s + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path.string());
  return f;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::size_t> CsvTable::require(const std::vector<std::string>& names) const {
  std::vector<std::size_t> pos;
  std::vector<std::string> missing;
  for (const auto& n : names) {
    const auto it = std::find(header.begin(), header.end(), n);
    if (it == header.end())
      missing.push_back(n);
    else
      pos.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  if (!missing.empty()) {
    std::string msg = source + ": missing column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }
  return pos;
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::size_t lineno = 0, start = 0;
  bool have_header = false;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    ++lineno;
    start = end + 1;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_csv_line(line, source, lineno);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size())
        throw ParseError(source, lineno,
                         "expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
      t.lines.push_back(lineno);
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw SchemaError(source + ": empty file (no header row)");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

// ---------------------------------------------------------------------------

double StationRecord::covariate(const std::string& name) const {
  if (name == "x_km") return x_km;
  if (name == "y_km") return y_km;
  if (name == "elevation_m") return elevation_m;
  if (name == "rel_elevation_m") return rel_elevation_m;
  if (name == "ocean_proximity") return ocean_proximity;
  if (name == "lake_cover") return lake_cover;
  throw ConfigInvalid("unknown covariate '" + name + "'");
}

SiteSet StationTable::sites() const {
  std::vector<Point> pts;
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    pts.push_back({r.x_km, r.y_km});
    ids.push_back(r.id);
  }
  return SiteSet(std::move(pts), std::move(ids));
}

int StationTable::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].id == id) return static_cast<int>(i);
  throw ValidationError("unknown station '" + id + "'");
}

StationTable parse_stations(const CsvTable& csv) {
  const auto col = csv.require(kStationColumns);
  StationTable t;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& f = csv.rows[r];
    const auto line = csv.lines[r];
    StationRecord s;
    s.id = f[col[0]];
    if (s.id.empty()) throw ParseError(csv.source, line, "empty station id");
    double* dst[] = {&s.x_km, &s.y_km, &s.elevation_m, &s.rel_elevation_m, &s.ocean_proximity, &s.lake_cover};
    for (std::size_t k = 0; k < 6; ++k) *dst[k] = parse_double(f[col[k + 1]], csv.source, line, kStationColumns[k + 1]);
    for (const auto& prev : t.rows)
      if (prev.id == s.id) throw ParseError(csv.source, line, "duplicate station id '" + s.id + "'");
    t.rows.push_back(std::move(s));
  }
  if (t.rows.empty()) throw ValidationError(csv.source + ": no stations");
  return t;
}

StationTable load_stations(const std::filesystem::path& path) { return parse_stations(read_csv(path)); }

void save_stations(const std::filesystem::path& path, const StationTable& stations) {
  auto f = open_out(path);
  for (std::size_t k = 0; k < kStationColumns.size(); ++k) f << (k ? "," : "") << kStationColumns[k];
  f << '\n';
  for (const auto& s : stations.rows)
    f << csv_field(s.id) << ',' << format_double(s.x_km) << ',' << format_double(s.y_km) << ','
      << format_double(s.elevation_m) << ',' << format_double(s.rel_elevation_m) << ','
      << format_double(s.ocean_proximity) << ',' << format_double(s.lake_cover) << '\n';
}

Design Design::fit(const StationTable& stations, std::vector<std::string> covariates, bool standardize) {
  Design d;
  d.covariates = std::move(covariates);
  d.standardize = standardize;
  const auto k = static_cast<Eigen::Index>(d.covariates.size());
  d.centre = Eigen::VectorXd::Zero(k);
  d.scale = Eigen::VectorXd::Ones(k);
  if (!standardize) return d;
  const double n = static_cast<double>(stations.size());
  for (Eigen::Index c = 0; c < k; ++c) {
    double m = 0.0, v = 0.0;
    for (const auto& s : stations.rows) m += s.covariate(d.covariates[static_cast<std::size_t>(c)]) / n;
    for (const auto& s : stations.rows) {
      const double r = s.covariate(d.covariates[static_cast<std::size_t>(c)]) - m;
      v += r * r;
    }
    d.centre(c) = m;
    const double sd = n > 1 ? std::sqrt(v / (n - 1)) : 0.0;
    d.scale(c) = sd > 0.0 ? sd : 1.0;
  }
  return d;
}

Eigen::MatrixXd Design::matrix(const StationTable& stations) const {
  const auto k = static_cast<Eigen::Index>(covariates.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(stations.size()), k + 1);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    for (Eigen::Index c = 0; c < k; ++c)
      x(r, c + 1) = (stations.rows[i].covariate(covariates[static_cast<std::size_t>(c)]) - centre(c)) / scale(c);
  }
  return x;
}

Eigen::MatrixXd Design::matrix_at(const std::vector<Point>& points) const {
  const auto k = static_cast<Eigen::Index>(covariates.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), k + 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto& name = covariates[static_cast<std::size_t>(c)];
      const double raw = name == "x_km" ? points[i].x : name == "y_km" ? points[i].y : centre(c);
      x(r, c + 1) = (raw - centre(c)) / scale(c);
    }
  }
  return x;
}

Dataset parse_minima(const CsvTable& csv, const StationTable& stations, LoadReport* report) {
  const auto col = csv.require({"winter", "station", "min_c", "days"});
  if (csv.rows.empty()) throw ValidationError(csv.source + ": no minima rows");
  std::vector<int> winters;
  for (std::size_t r = 0; r < csv.rows.size(); ++r)
    winters.push_back(parse_int(csv.rows[r][col[0]], csv.source, csv.lines[r], "winter"));
  std::sort(winters.begin(), winters.end());
  winters.erase(std::unique(winters.begin(), winters.end()), winters.end());

  Dataset d;
  d.sites = stations.sites();
  d.years = winters;
  const auto n = static_cast<Eigen::Index>(winters.size());
  const auto m = static_cast<Eigen::Index>(stations.size());
  d.minima = Eigen::MatrixXd::Constant(n, m, kNaN);
  d.t = Eigen::MatrixXd::Constant(n, m, kNaN);
  d.days.assign(winters.size(), std::vector<std::vector<int>>(stations.size()));
  std::vector<char> seen(winters.size() * stations.size(), 0);
  LoadReport rep;

  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& f = csv.rows[r];
    const auto line = csv.lines[r];
    const int winter = parse_int(f[col[0]], csv.source, line, "winter");
    const auto i = static_cast<std::size_t>(std::lower_bound(winters.begin(), winters.end(), winter) - winters.begin());
    int j = -1;
    for (std::size_t s = 0; s < stations.size(); ++s)
      if (stations.rows[s].id == f[col[1]]) j = static_cast<int>(s);
    if (j < 0) throw ParseError(csv.source, line, "unknown station '" + f[col[1]] + "'");
    auto& flag = seen[i * stations.size() + static_cast<std::size_t>(j)];
    if (flag) throw ParseError(csv.source, line, "duplicate entry for winter " + f[col[0]] + ", station " + f[col[1]]);
    flag = 1;
    if (f[col[2]].empty()) {
      ++rep.blank_entries;
      continue;
    }
    const double y = parse_double(f[col[2]], csv.source, line, "min_c");
    std::vector<int> days;
    if (!f[col[3]].empty())
      for (const auto& tok : split(f[col[3]], ';')) {
        const int day = parse_int(tok, csv.source, line, "days");
        if (day < 0 || day >= winter_length(winter))
          throw ParseError(csv.source, line, "day " + tok + " outside the winter window");
        days.push_back(day);
      }
    if (days.empty()) throw ParseError(csv.source, line, "a present minimum needs at least one occurrence day");
    const auto ii = static_cast<Eigen::Index>(i);
    d.minima(ii, j) = y;
    d.t(ii, j) = time_covariate(winter, *std::min_element(days.begin(), days.end()));
    d.days[i][static_cast<std::size_t>(j)] = std::move(days);
  }
  rep.absent_entries = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 0));
  rep.observed_per_year.assign(winters.size(), 0);
  rep.observed_per_station.assign(stations.size(), 0);
  for (std::size_t i = 0; i < winters.size(); ++i)
    for (std::size_t j = 0; j < stations.size(); ++j)
      if (d.observed(i, j)) {
        ++rep.observed_per_year[i];
        ++rep.observed_per_station[j];
      }
  if (report) *report = rep;
  return d;
}

LoadedData load_dataset(const std::filesystem::path& stations_path, const std::filesystem::path& minima_path,
                        const std::vector<std::string>& covariates, bool standardize) {
  LoadedData out;
  out.stations = load_stations(stations_path);
  out.design = Design::fit(out.stations, covariates, standardize);
  out.data = parse_minima(read_csv(minima_path), out.stations, &out.report);
  out.data.x = out.design.matrix(out.stations);
  out.data.validate();
  return out;
}

void save_minima(const std::filesystem::path& path, const StationTable& stations, const Dataset& data) {
  auto f = open_out(path);
  f << "winter,station,min_c,days\n";
  for (std::size_t i = 0; i < data.n_years(); ++i)
    for (std::size_t j = 0; j < stations.size(); ++j) {
      f << data.years[i] << ',' << csv_field(stations.rows[j].id) << ',';
      if (data.observed(i, j)) {
        f << format_double(data.minima(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ',';
        const auto& days = data.days[i][j];
        for (std::size_t k = 0; k < days.size(); ++k) f << (k ? ";" : "") << days[k];
      } else {
        f << ',';
      }
      f << '\n';
    }
}

// ---------------------------------------------------------------------------

void save_partitions(const std::filesystem::path& path, const std::vector<int>& winters,
                     const std::vector<SetPartition>& partitions) {
  if (winters.size() != partitions.size()) throw ValidationError("save_partitions: size mismatch");
  auto f = open_out(path);
  f << "winter,partition\n";
  for (std::size_t i = 0; i < winters.size(); ++i) f << winters[i] << ',' << csv_field(partitions[i].to_string()) << '\n';
}

std::vector<SetPartition> load_partitions(const std::filesystem::path& path, const std::vector<int>& winters) {
  const auto csv = read_csv(path);
  const auto col = csv.require({"winter", "partition"});
  std::vector<SetPartition> out(winters.size());
  std::vector<char> seen(winters.size(), 0);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const int w = parse_int(csv.rows[r][col[0]], csv.source, csv.lines[r], "winter");
    const auto it = std::find(winters.begin(), winters.end(), w);
    if (it == winters.end()) throw ParseError(csv.source, csv.lines[r], "winter not in the dataset");
    const auto i = static_cast<std::size_t>(it - winters.begin());
    try {
      out[i] = SetPartition::parse(csv.rows[r][col[1]]);
    } catch (const ValidationError& e) {
      throw ParseError(csv.source, csv.lines[r], e.what());
    }
    seen[i] = 1;
  }
  if (std::count(seen.begin(), seen.end(), 0) > 0) throw SchemaError(csv.source + ": some winters have no partition");
  return out;
}

void save_samples(const std::filesystem::path& path, const PosteriorSamples& ps) {
  auto f = open_out(path);
  f << "chain,iteration";
  for (const auto& n : ps.names) f << ',' << n;
  f << '\n';
  for (Eigen::Index r = 0; r < ps.values.rows(); ++r) {
    f << ps.chain[static_cast<std::size_t>(r)] << ',' << ps.iteration[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < ps.values.cols(); ++c) f << ',' << format_double(ps.values(r, c));
    f << '\n';
  }
}

PosteriorSamples load_samples(const std::filesystem::path& path) {
  const auto csv = read_csv(path);
  if (csv.require({"chain", "iteration"}) != std::vector<std::size_t>{0, 1})
    throw SchemaError(csv.source + ": samples must start with chain,iteration");
  PosteriorSamples ps;
  ps.names.assign(csv.header.begin() + 2, csv.header.end());
  ps.values.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(ps.names.size()));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& f = csv.rows[r];
    ps.chain.push_back(parse_int(f[0], csv.source, csv.lines[r], "chain"));
    ps.iteration.push_back(parse_int(f[1], csv.source, csv.lines[r], "iteration"));
    for (std::size_t c = 0; c < ps.names.size(); ++c)
      ps.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(f[c + 2], csv.source, csv.lines[r], ps.names[c]);
  }
  return ps;
}

void save_partition_samples(const std::filesystem::path& path, const PosteriorSamples& ps,
                            const std::vector<int>& winters) {
  auto f = open_out(path);
  f << "row,winter,partition\n";
  for (std::size_t k = 0; k < ps.partition_rows.size(); ++k)
    for (std::size_t i = 0; i < winters.size(); ++i)
      f << ps.partition_rows[k] << ',' << winters[i] << ',' << csv_field(ps.partitions[k][i].to_string()) << '\n';
}

void load_partition_samples(const std::filesystem::path& path, PosteriorSamples& ps,
                            const std::vector<int>& winters) {
  const auto csv = read_csv(path);
  const auto col = csv.require({"row", "winter", "partition"});
  ps.partition_rows.clear();
  ps.partitions.clear();
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& f = csv.rows[r];
    const int row = parse_int(f[col[0]], csv.source, csv.lines[r], "row");
    const int w = parse_int(f[col[1]], csv.source, csv.lines[r], "winter");
    const auto it = std::find(winters.begin(), winters.end(), w);
    if (it == winters.end()) throw ParseError(csv.source, csv.lines[r], "winter not in the dataset");
    if (ps.partition_rows.empty() || ps.partition_rows.back() != row) {
      ps.partition_rows.push_back(row);
      ps.partitions.emplace_back(winters.size());
    }
    ps.partitions.back()[static_cast<std::size_t>(it - winters.begin())] = SetPartition::parse(f[col[2]]);
  }
}

void save_summary(const std::filesystem::path& path, const std::vector<ParamSummary>& summary) {
  auto f = open_out(path);
  f << "parameter,mean,sd,q025,q975,rhat,ess\n";
  for (const auto& s : summary)
    f << s.name << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ',' << format_double(s.q025) << ','
      << format_double(s.q975) << ',' << format_double(s.rhat) << ',' << format_double(s.ess) << '\n';
}

void save_acceptance(const std::filesystem::path& path, const std::vector<AcceptanceRate>& rates) {
  auto f = open_out(path);
  f << "chain,block,burn_in,sampling\n";
  for (const auto& a : rates)
    f << a.chain << ',' << csv_field(a.block) << ',' << format_double(a.burn_in) << ',' << format_double(a.sampling)
      << '\n';
}

// ---------------------------------------------------------------------------

Config Config::parse(std::string_view text, const std::string& source) {
  Config c;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    c.values_[key] = trim(body.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_text(path), path.string()); }

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Config::has(const std::string& key) const { return values_.contains(key); }

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.starts_with(prefix)) out.push_back(k);
  return out;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  resolved_[key] = v;
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto s = get(key, format_double(fallback));
  try {
    return parse_double(s, "config", 0, key);
  } catch (const ParseError&) {
    throw ConfigInvalid("config key " + key + ": expected a number, got '" + s + "'");
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto s = get(key, std::to_string(fallback));
  try {
    return parse_int(s, "config", 0, key);
  } catch (const ParseError&) {
    throw ConfigInvalid("config key " + key + ": expected an integer, got '" + s + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto s = get(key, std::to_string(fallback));
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigInvalid("config key " + key + ": expected an unsigned integer, got '" + s + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto s = get(key, fallback ? "true" : "false");
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigInvalid("config key " + key + ": expected true/false, got '" + s + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  std::string def;
  for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? "," : "") + format_double(fallback[i]);
  const auto s = get(key, def);
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& tok : split(s, ',')) {
    try {
      out.push_back(parse_double(tok, "config", 0, key));
    } catch (const ParseError&) {
      throw ConfigInvalid("config key " + key + ": bad number '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
  std::string def;
  for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? "," : "") + fallback[i];
  const auto s = get(key, def);
  if (s.empty()) return {};
  return split(s, ',');
}

std::string Config::resolved() const {
  std::map<std::string, std::string> all = values_;
  for (const auto& [k, v] : resolved_) all[k] = v;
  std::string out;
  for (const auto& [k, v] : all) out += k + " = " + v + "\n";
  return out;
}

void Config::write_resolved(const std::filesystem::path& path) const {
  auto f = open_out(path);
  f << resolved();
}

ScalarPrior parse_scalar_prior(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::vector<double> v;
  double x = 0.0;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw ConfigInvalid("bad prior '" + text + "'");
  if (kind == "uniform" && v.size() == 2) return ScalarPrior::uniform(v[0], v[1]);
  if (kind == "normal" && v.size() == 2) return ScalarPrior::normal(v[0], v[1]);
  if (kind == "normal" && v.size() == 4) return ScalarPrior::normal(v[0], v[1], v[2], v[3]);
  throw ConfigInvalid("bad prior '" + text + "' (uniform lo hi | normal mean sd [lo hi])");
}

std::vector<std::vector<Param>> parse_blocks(const std::string& text) {
  std::vector<std::vector<Param>> out;
  for (const auto& b : split(text, ';')) {
    if (b.empty()) continue;
    std::vector<Param> block;
    for (const auto& name : split(b, ',')) block.push_back(param_from_name(name));
    out.push_back(std::move(block));
  }
  return out;
}

std::vector<int> parse_winters(const std::string& text) {
  std::vector<int> out;
  for (const auto& tok : split(text, ',')) {
    const auto dash = tok.find('-', 1);
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoi(tok));
      } else {
        const int a = std::stoi(tok.substr(0, dash)), b = std::stoi(tok.substr(dash + 1));
        if (b < a) throw ConfigInvalid("bad winter range '" + tok + "'");
        for (int w = a; w <= b; ++w) out.push_back(w);
      }
    } catch (const std::logic_error&) {
      throw ConfigInvalid("bad winter list '" + text + "'");
    }
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ConfigInvalid("repeated winter in '" + text + "'");
  return out;
}

namespace {

std::string prior_text(const ScalarPrior& s) {
  if (s.kind == ScalarPrior::Kind::Uniform) return "uniform " + format_double(s.lo) + " " + format_double(s.hi);
  if (std::isinf(s.lo) && std::isinf(s.hi)) return "normal " + format_double(s.mean) + " " + format_double(s.sd);
  return "normal " + format_double(s.mean) + " " + format_double(s.sd) + " " + format_double(s.lo) + " " +
         format_double(s.hi);
}

std::string blocks_text(const std::vector<std::vector<Param>>& blocks) {
  std::string s;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) s += ';';
    for (std::size_t i = 0; i < blocks[b].size(); ++i) s += (i ? "," : "") + std::string(param_name(blocks[b][i]));
  }
  return s;
}

}  // namespace

ChainConfig chain_config(const Config& cfg) {
  ChainConfig c;
  c.n_chains = cfg.get_int("mcmc.chains", c.n_chains);
  c.n_iter = cfg.get_int("mcmc.iterations", c.n_iter);
  c.burn_in = cfg.get_int("mcmc.burn_in", c.burn_in);
  c.thin = cfg.get_int("mcmc.thin", c.thin);
  c.sweeps_per_iter = cfg.get_int("mcmc.sweeps", c.sweeps_per_iter);
  c.blocks = parse_blocks(cfg.get("mcmc.blocks", blocks_text(c.blocks)));
  c.u_block_size = cfg.get_int("mcmc.u_block_size", c.u_block_size);
  c.mvn_samples = cfg.get_int("mcmc.mvn_samples", c.mvn_samples);
  c.use_likelihood = !cfg.get_bool("mcmc.prior_only", false);
  c.fix_delta = cfg.get_bool("mcmc.fix_delta", c.fix_delta);
  c.adapt = cfg.get_bool("mcmc.adapt", c.adapt);
  c.partition_thin = cfg.get_int("mcmc.partition_thin", c.partition_thin);
  c.scale_alpha = cfg.get_double("mcmc.scale.alpha", c.scale_alpha);
  c.scale_sigma = cfg.get_double("mcmc.scale.sigma", c.scale_sigma);
  c.scale_xi = cfg.get_double("mcmc.scale.xi", c.scale_xi);
  c.scale_lambda = cfg.get_double("mcmc.scale.lambda", c.scale_lambda);
  c.scale_kappa = cfg.get_double("mcmc.scale.kappa", c.scale_kappa);
  c.scale_delta = cfg.get_double("mcmc.scale.delta", c.scale_delta);
  c.scale_u = cfg.get_double("mcmc.scale.u", c.scale_u);
  c.validate();
  return c;
}

PriorSpec prior_spec(const Config& cfg, std::size_t p) {
  auto s = PriorSpec::defaults(p);
  s.beta_flat = cfg.get_bool("prior.beta_flat", false);
  const auto mean = cfg.get_doubles("prior.beta_mean", {0.0});
  const double sd = cfg.get_double("prior.beta_sd", 100.0);
  if (mean.size() == 1)
    s.beta_mean.setConstant(mean[0]);
  else if (mean.size() == p)
    s.beta_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(p));
  else
    throw ConfigInvalid("prior.beta_mean needs 1 or " + std::to_string(p) + " values");
  s.beta_cov = sd * sd * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  s.tau2_shape = cfg.get_double("prior.tau2_shape", s.tau2_shape);
  s.tau2_rate = cfg.get_double("prior.tau2_rate", s.tau2_rate);
  const std::pair<const char*, ScalarPrior*> scalars[] = {
      {"prior.alpha", &s.alpha},         {"prior.log_sigma", &s.log_sigma}, {"prior.xi", &s.xi},
      {"prior.log_lambda", &s.log_lambda}, {"prior.kappa", &s.kappa},      {"prior.log_delta", &s.log_delta}};
  for (const auto& [key, dst] : scalars) *dst = parse_scalar_prior(cfg.get(key, prior_text(*dst)));
  s.validate(p);
  return s;
}

std::map<std::string, std::vector<int>> station_groups(const Config& cfg, const StationTable& stations) {
  std::map<std::string, std::vector<int>> out;
  for (const auto& key : cfg.keys_with_prefix("group.")) {
    std::vector<int> idx;
    for (const auto& tok : cfg.get_strings(key, {})) {
      int v = 0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      int j = -1;
      if (ec == std::errc() && p == tok.data() + tok.size() && v >= 1 && v <= static_cast<int>(stations.size()))
        j = v - 1;
      else
        for (std::size_t s = 0; s < stations.size(); ++s)
          if (stations.rows[s].id == tok) j = static_cast<int>(s);
      if (j < 0) throw ConfigInvalid(key + ": unknown station '" + tok + "'");
      idx.push_back(j);
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (idx.empty()) throw ConfigInvalid(key + ": empty group");
    out[key.substr(6)] = idx;
  }
  return out;
}

}  // namespace brmax
