#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "brmax/errors.hpp"
#include "brmax/io.hpp"
#include "doctest.h"

using namespace brmax;
namespace fs = std::filesystem;

namespace {

const char* kStations =
    "id,x_km,y_km,elevation_m,rel_elevation_m,ocean_proximity,lake_cover\n"
    "A,0,0,120,-5,0.2,0.05\n"
    "B,150.5,20,340,12.5,0.35,0.1\n"
    "C,60,240.25,80,3,0.9,0.3\n";

const char* kMinima =
    "winter,station,min_c,days\n"
    "1970,A,-31.5,40\n"
    "1970,B,-28.25,41;42\n"
    "1970,C,,\n"
    "1971,A,-35.125,10\n"
    "1971,B,-30,75\n"
    "1971,C,-27.75,12\n"
    "1972,A,,\n"
    "1972,B,-33.1,3\n"
    "1972,C,-29.4,90\n"
    "1973,A,-29.9,20\n"
    "1973,B,-30.2,21\n"
    "1973,C,-26.6,100\n"
    "1974,A,-36.8,50\n"
    "1974,B,-34.3,51\n"
    "1974,C,-31.05,52\n";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("brmax_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name, std::ios::binary) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fixture loads with a missing mask") {
  TempDir dir;
  const auto d = load_dataset(dir.write("s.csv", kStations), dir.write("m.csv", kMinima));
  CHECK(d.data.n_years() == 5);
  CHECK(d.data.n_sites() == 3);
  CHECK(d.data.years.front() == 1970);
  CHECK_FALSE(d.data.observed(0, 2));
  CHECK(d.data.minima(1, 0) == -35.125);
  CHECK(d.data.days[0][1] == std::vector<int>{41, 42});
  CHECK(d.data.t(0, 1) == time_covariate(1970, 41));
  CHECK(d.report.blank_entries == 2);
  CHECK(d.data.missing_count() == d.report.blank_entries);
  CHECK(d.report.observed_per_year[0] == 2);
  CHECK(d.report.observed_per_station[2] == 4);
  CHECK(d.data.x.cols() == 7);
  CHECK(d.data.x.col(0).isOnes());
  CHECK(std::abs(d.data.x.col(3).mean()) < 1e-12);
}

TEST_CASE("fixture round-trips bit-identically") {
  TempDir dir;
  const auto s = dir.write("s.csv", kStations);
  const auto m = dir.write("m.csv", kMinima);
  const auto d = load_dataset(s, m);
  save_stations(dir.path / "s2.csv", d.stations);
  save_minima(dir.path / "m2.csv", d.stations, d.data);
  CHECK(slurp(dir.path / "s2.csv") == kStations);
  CHECK(slurp(dir.path / "m2.csv") == kMinima);
  const auto again = load_dataset(dir.path / "s2.csv", dir.path / "m2.csv");
  CHECK(again.data.years == d.data.years);
  CHECK(again.data.days == d.data.days);
  CHECK((again.data.minima.array().isNaN() == d.data.minima.array().isNaN()).all());
  CHECK(d.data.minima.array().isNaN().select(0.0, d.data.minima).cwiseEqual(
            again.data.minima.array().isNaN().select(0.0, again.data.minima)).all());
  CHECK(again.data.x == d.data.x);
}

TEST_CASE("awkward doubles survive the round trip") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 123456789.123456789})
    CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::nan("")).empty());
}

TEST_CASE("empty and malformed inputs") {
  TempDir dir;
  const auto stations = parse_stations(parse_csv(kStations, "s"));
  CHECK_THROWS_AS(parse_csv("", "m"), SchemaError);
  CHECK_THROWS_AS(parse_minima(parse_csv("winter,station,min_c,days\n", "m"), stations), ValidationError);
  try {
    (void)parse_minima(parse_csv("winter,station,min_c,days\n1970,A,-3,1\n\n1970,B,cold,2\n", "m"), stations);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(parse_minima(parse_csv("winter,station,min_c,days\n1970,Z,-3,1\n", "m"), stations), ParseError);
  CHECK_THROWS_AS(parse_minima(parse_csv("winter,station,min_c,days\n1970,A,-3,1\n1970,A,-4,2\n", "m"), stations),
                  ParseError);
  CHECK_THROWS_AS(parse_minima(parse_csv("winter,station,min_c,days\n1970,A,-3,\n", "m"), stations), ParseError);
  CHECK_THROWS_AS(parse_minima(parse_csv("winter,station,min_c,days\n1970,A,-3,200\n", "m"), stations), ParseError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n", "m"), ParseError);
  try {
    (void)parse_stations(parse_csv("id,x_km,elevation_m\nA,1,2\n", "s"));
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("y_km") != std::string::npos);
    CHECK(msg.find("lake_cover") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_stations(parse_csv("id,x_km,y_km,elevation_m,rel_elevation_m,ocean_proximity,lake_cover\n"
                                           "A,0,0,1,1,1,1\nA,1,1,1,1,1,1\n", "s")),
                  ParseError);
}

TEST_CASE("quoted partition fields round-trip") {
  TempDir dir;
  const std::vector<int> winters{1970, 1971};
  const std::vector<SetPartition> parts{SetPartition::parse("1,3|2"), SetPartition::parse("1|2|3")};
  save_partitions(dir.path / "p.csv", winters, parts);
  CHECK(load_partitions(dir.path / "p.csv", winters) == parts);
  CHECK_THROWS_AS(load_partitions(dir.path / "p.csv", {1970, 1971, 1972}), SchemaError);
}

TEST_CASE("posterior samples round-trip") {
  TempDir dir;
  PosteriorSamples ps;
  ps.names = {"alpha", "sigma"};
  ps.values.resize(3, 2);
  ps.values << -0.061234567890123, 3.5, 0.1, 1.0 / 3.0, -1e-9, 2.25;
  ps.chain = {0, 0, 1};
  ps.iteration = {11, 12, 11};
  ps.partition_rows = {0, 2};
  ps.partitions = {{SetPartition::parse("1,2")}, {SetPartition::parse("1|2")}};
  save_samples(dir.path / "s.csv", ps);
  save_partition_samples(dir.path / "p.csv", ps, {1999});
  auto back = load_samples(dir.path / "s.csv");
  load_partition_samples(dir.path / "p.csv", back, {1999});
  CHECK(back.names == ps.names);
  CHECK(back.values == ps.values);
  CHECK(back.chain == ps.chain);
  CHECK(back.iteration == ps.iteration);
  CHECK(back.partition_rows == ps.partition_rows);
  CHECK(back.partitions == ps.partitions);
}

TEST_CASE("config parsing and resolution") {
  const auto cfg = Config::parse(
      "# run settings\n"
      "mcmc.chains = 4\n"
      "mcmc.blocks = alpha;sigma,xi;lambda,kappa;delta   # default layout\n"
      "prior.xi = uniform -0.4 0.4\n"
      "prior.alpha = normal 0 0.5\n"
      "group.west = 5,16,17,18,19\n");
  const auto c = chain_config(cfg);
  CHECK(c.n_chains == 4);
  CHECK(c.n_iter == ChainConfig{}.n_iter);
  CHECK(c.blocks.size() == 4);
  const auto p = prior_spec(cfg, 3);
  CHECK(p.xi.lo == -0.4);
  CHECK(p.alpha.sd == 0.5);
  const auto text = cfg.resolved();
  CHECK(text.find("mcmc.iterations = 15000") != std::string::npos);
  CHECK(text.find("mcmc.chains = 4") != std::string::npos);
  // The resolved file parses back to the same settings.
  const auto again = Config::parse(text);
  CHECK(chain_config(again).n_chains == 4);
  CHECK(prior_spec(again, 3).log_sigma.hi == p.log_sigma.hi);

  StationTable st;
  for (int i = 0; i < 20; ++i) st.rows.push_back({"S" + std::to_string(i + 1)});
  const auto groups = station_groups(cfg, st);
  CHECK(groups.at("west") == std::vector<int>{4, 15, 16, 17, 18});
  CHECK_THROWS_AS(station_groups(Config::parse("group.x = 21\n"), st), ConfigInvalid);
  CHECK(station_groups(Config::parse("group.y = S3,S1\n"), st).at("y") == std::vector<int>{0, 2});

  CHECK_THROWS_AS(Config::parse("just text\n"), ParseError);
  CHECK_THROWS_AS(chain_config(Config::parse("mcmc.chains = many\n")), ConfigInvalid);
  CHECK_THROWS_AS(chain_config(Config::parse("mcmc.blocks = alpha;sigma\n")), ConfigInvalid);
  CHECK_THROWS_AS(parse_scalar_prior("gamma 1 2"), ConfigInvalid);
  CHECK(parse_winters("1966-1968,1970") == std::vector<int>{1966, 1967, 1968, 1970});
}

TEST_CASE("design at arbitrary points uses station-average covariates") {
  const auto st = parse_stations(parse_csv(kStations, "s"));
  const auto d = Design::fit(st, {"x_km", "elevation_m"}, true);
  const auto x = d.matrix_at({{70.0, 5.0}});
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 1) == doctest::Approx((70.0 - d.centre(0)) / d.scale(0)));
  CHECK(x(0, 2) == 0.0);
  CHECK(Design::fit(st, {"x_km"}, false).matrix(st)(1, 1) == 150.5);
}
