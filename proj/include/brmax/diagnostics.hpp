#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "brmax/dataset.hpp"
#include "brmax/mcmc.hpp"
#include "brmax/simulation.hpp"

namespace brmax {

/// Pairwise extremal coefficient by the F-madogram on empirical margins.
struct PairTheta {
  int a = 0;
  int b = 0;
  double distance_km = 0.0;
  std::size_t n_years = 0;
  double raw = 0.0;      // before clamping
  double theta = 0.0;    // clamped to [1, 2]
  bool clamped = false;
};

/// θ̂ from paired observations (years where both are present).
PairTheta fmadogram_theta(std::span<const double> a, std::span<const double> b);

struct ThetaBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_pairs = 0;
  double theta = 0.0;   // mean of the pairwise estimates
  double lower = 0.0;   // 95% bootstrap interval over years
  double upper = 0.0;
  std::size_t clamped = 0;
};

struct ThetaEstimate {
  std::vector<PairTheta> pairs;
  std::vector<ThetaBin> bins;
  std::vector<std::string> warnings;  // one per omitted bin
};

/// Binned θ̂ with `edges` in km. Bins without a contributing pair are omitted
/// with a warning. Pairs need `min_years` common years.
ThetaEstimate empirical_extremal_coefficients(const Dataset& data, const std::vector<double>& edges,
                                              int n_boot = 200, std::uint64_t seed = 1, std::size_t min_years = 5);

/// Quantile-quantile table: sorted observations against replicate order
/// statistics from the posterior predictive.
struct QqPoint {
  std::size_t k = 0;
  double empirical = 0.0;
  double median = 0.0;
  double lower = 0.0;       // pointwise 95%
  double upper = 0.0;
  double lower_sim = 0.0;   // simultaneous 95% (covers 95% of whole replicate curves)
  double upper_sim = 0.0;
};
struct QqTable {
  std::string label;
  std::vector<QqPoint> points;

  /// Fraction of points inside the simultaneous band.
  [[nodiscard]] double coverage() const;
};

/// Replicate curves (rows, each sorted) → pointwise and simultaneous bands.
void fill_bands(const Eigen::MatrixXd& replicates, QqTable& table);

/// One table per station; replicates redraw each observed (year, station)
/// value from its GEV at a posterior draw.
std::vector<QqTable> marginal_qq(const Dataset& data, const PosteriorSamples& ps, int n_rep, std::uint64_t seed);

/// One table per group: per-year statistic of the minima over the group
/// (years where the whole group is observed); replicates are joint
/// Brown–Resnick draws at posterior draws.
std::vector<QqTable> group_qq(const Dataset& data, const PosteriorSamples& ps,
                              const std::map<std::string, std::vector<int>>& groups, GroupStat stat, int n_rep,
                              std::uint64_t seed);

/// Posterior distribution of the number of blocks (events) per winter.
struct PartitionSizeRow {
  int winter = 0;
  std::size_t n_blocks = 0;
  double probability = 0.0;
  bool reference = false;   // equals the declustered partition's count
};
std::vector<PartitionSizeRow> partition_size_table(const PosteriorSamples& ps, const std::vector<int>& winters,
                                                   const std::vector<SetPartition>* reference = nullptr);

struct RandRow {
  int winter = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};
/// Per-winter Rand index between posterior partitions and `reference`.
std::vector<RandRow> rand_index_table(const PosteriorSamples& ps, const std::vector<int>& winters,
                                      const std::vector<SetPartition>& reference);

struct DiagnosticsOptions {
  std::vector<double> theta_edges{0, 50, 100, 150, 200, 300, 400, 600, 800, 1200};
  int n_boot = 200;
  int n_rep = 200;
  GroupStat group_stat = GroupStat::Min;
  std::uint64_t seed = 1;
};

/// Writes theta_pairs.csv, theta_bins.csv and, when samples are present,
/// qq_stations.csv, qq_groups.csv, partition_sizes.csv and rand_index.csv.
/// Returns warnings.
std::vector<std::string> diagnostics_export(const std::filesystem::path& out_dir, const Dataset& data,
                                            const PosteriorSamples* ps,
                                            const std::map<std::string, std::vector<int>>& groups,
                                            const std::vector<SetPartition>* reference,
                                            const DiagnosticsOptions& options);

}  // namespace brmax
