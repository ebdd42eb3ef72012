#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "brmax/dataset.hpp"
#include "brmax/mcmc.hpp"

namespace brmax {

// ---------------------------------------------------------------------------
// CSV

/// Comma-separated table with a header row. Fields may be double-quoted.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based file line of each row

  /// Column position; throws SchemaError listing every absent name.
  [[nodiscard]] std::vector<std::size_t> require(const std::vector<std::string>& names) const;
};

CsvTable parse_csv(std::string_view text, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest text that parses back to the same double; empty for NaN.
std::string format_double(double v);
/// Quotes a field when it contains a comma or quote.
std::string csv_field(const std::string& s);

// ---------------------------------------------------------------------------
// Stations and minima

struct StationRecord {
  std::string id;
  double x_km = 0.0;
  double y_km = 0.0;
  double elevation_m = 0.0;
  double rel_elevation_m = 0.0;
  double ocean_proximity = 0.0;
  double lake_cover = 0.0;

  /// Named column value (x_km, y_km, elevation_m, ...).
  [[nodiscard]] double covariate(const std::string& name) const;
};

inline const std::vector<std::string> kStationColumns{"id",         "x_km",           "y_km",
                                                      "elevation_m", "rel_elevation_m", "ocean_proximity",
                                                      "lake_cover"};

struct StationTable {
  std::vector<StationRecord> rows;

  [[nodiscard]] std::size_t size() const { return rows.size(); }
  [[nodiscard]] SiteSet sites() const;
  /// Index of a station id; throws ValidationError when absent.
  [[nodiscard]] int index_of(const std::string& id) const;
};

StationTable load_stations(const std::filesystem::path& path);
StationTable parse_stations(const CsvTable& csv);
void save_stations(const std::filesystem::path& path, const StationTable& stations);

/// Design matrix: intercept plus the named covariates, optionally
/// standardized with the station mean and sd.
struct Design {
  std::vector<std::string> covariates;
  bool standardize = true;
  Eigen::VectorXd centre;  // per covariate
  Eigen::VectorXd scale;

  static Design fit(const StationTable& stations, std::vector<std::string> covariates, bool standardize);
  [[nodiscard]] Eigen::MatrixXd matrix(const StationTable& stations) const;
  /// Rows for arbitrary points; coordinates come from the points and other
  /// covariates sit at their station average.
  [[nodiscard]] Eigen::MatrixXd matrix_at(const std::vector<Point>& points) const;
};

inline const std::vector<std::string> kDefaultCovariates{"x_km", "y_km", "elevation_m", "rel_elevation_m",
                                                         "ocean_proximity", "lake_cover"};

/// Counts gathered while loading.
struct LoadReport {
  std::size_t blank_entries = 0;             // rows with an empty min_c
  std::size_t absent_entries = 0;            // (winter, station) pairs with no row
  std::vector<std::size_t> observed_per_year;
  std::vector<std::size_t> observed_per_station;
};

struct LoadedData {
  StationTable stations;
  Design design;
  Dataset data;
  LoadReport report;
};

/// Minima in long format: winter,station,min_c,days with days joined by ';'.
/// Blank min_c marks a missing value. Throws ParseError or SchemaError.
LoadedData load_dataset(const std::filesystem::path& stations_path, const std::filesystem::path& minima_path,
                        const std::vector<std::string>& covariates = kDefaultCovariates, bool standardize = true);
Dataset parse_minima(const CsvTable& csv, const StationTable& stations, LoadReport* report = nullptr);
/// Writes every (winter, station) pair in canonical order; missing values blank.
void save_minima(const std::filesystem::path& path, const StationTable& stations, const Dataset& data);

// ---------------------------------------------------------------------------
// Partitions and samples

/// winter,partition with 1-based station indices ("1,3|2").
void save_partitions(const std::filesystem::path& path, const std::vector<int>& winters,
                     const std::vector<SetPartition>& partitions);
std::vector<SetPartition> load_partitions(const std::filesystem::path& path, const std::vector<int>& winters);

void save_samples(const std::filesystem::path& path, const PosteriorSamples& ps);
PosteriorSamples load_samples(const std::filesystem::path& path);
/// row,winter,partition for the retained partition draws.
void save_partition_samples(const std::filesystem::path& path, const PosteriorSamples& ps,
                            const std::vector<int>& winters);
void load_partition_samples(const std::filesystem::path& path, PosteriorSamples& ps, const std::vector<int>& winters);
void save_summary(const std::filesystem::path& path, const std::vector<ParamSummary>& summary);
void save_acceptance(const std::filesystem::path& path, const std::vector<AcceptanceRate>& rates);

// ---------------------------------------------------------------------------
// Flat key = value configuration

class Config {
 public:
  Config() = default;
  static Config parse(std::string_view text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool has(const std::string& key) const;
  /// Keys starting with `prefix`, in order.
  [[nodiscard]] std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Accessors record the resolved value, defaults included.
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Every key set or read, sorted, as key = value lines.
  [[nodiscard]] std::string resolved() const;
  void write_resolved(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
};

ChainConfig chain_config(const Config& cfg);
PriorSpec prior_spec(const Config& cfg, std::size_t p);
/// "uniform lo hi" or "normal mean sd [lo hi]".
ScalarPrior parse_scalar_prior(const std::string& text);
/// "alpha;sigma,xi;lambda,kappa;delta".
std::vector<std::vector<Param>> parse_blocks(const std::string& text);
/// "1966-2015" or "1966,1970,1971".
std::vector<int> parse_winters(const std::string& text);

/// Station groups from keys `group.<name> = 5,16,17` (1-based indices or ids).
std::map<std::string, std::vector<int>> station_groups(const Config& cfg, const StationTable& stations);

}  // namespace brmax
