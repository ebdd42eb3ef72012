#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "brmax/dataset.hpp"
#include "brmax/gaussian.hpp"
#include "brmax/margins.hpp"
#include "brmax/partition.hpp"

namespace brmax {

/// Exact sampler for the simple Brown–Resnick process at a fixed site set
/// (extremal-functions algorithm). The Cholesky factor is computed once.
///
/// Each proposal uses its own stream keyed by (seed, site, proposal count),
/// so appending sites leaves the values at the original sites unchanged
/// provided the anchor is fixed.
class BrSimulator {
 public:
  BrSimulator(SiteSet sites, StableVariogram v, std::optional<Point> anchor = std::nullopt);

  struct Draw {
    std::vector<double> z;      // unit-Fréchet margins
    SetPartition partition;     // sites attaining their maximum from the same function
  };
  [[nodiscard]] Draw draw(std::uint64_t seed) const;
  [[nodiscard]] const SiteSet& sites() const { return sites_; }

 private:
  SiteSet sites_;
  StableVariogram v_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd gamma_;
};

std::vector<double> simulate_simple_br(const SiteSet& sites, const StableVariogram& v, std::uint64_t seed);

/// Rectangular grid over the convex hull of the stations; only interior cells
/// are kept.
struct GridSpec {
  double resolution_km = 25.0;
  std::vector<Point> cells;

  static GridSpec over_hull(const SiteSet& stations, double resolution_km);
};

/// Winter minima (°C) at the cells of `cells`, whose location effects at
/// t = 0 are `field.u`; year offset t. Margins follow the local GEV.
std::vector<double> simulate_temperature_field(const SiteSet& cells, const GevField& field,
                                               const StableVariogram& dep, double t, std::uint64_t seed);

/// Conditional mean at `targets` of U ~ GP(Xβ, τ² exp(−‖h‖/δ)) given U at
/// the stations.
Eigen::VectorXd krige_random_effect(const SiteSet& stations, const Eigen::VectorXd& u,
                                    const Eigen::MatrixXd& x_stations, const Eigen::VectorXd& beta,
                                    double tau2, double delta, const std::vector<Point>& targets,
                                    const Eigen::MatrixXd& x_targets);

/// One posterior draw of the latent-field hyperparameters and station effects.
struct LatentDraw {
  Eigen::VectorXd u;
  Eigen::VectorXd beta;
  double tau2 = 1.0;
  double delta = 100.0;
};

/// Kriged surface averaged over posterior draws.
Eigen::VectorXd krige_random_effect(const SiteSet& stations, const std::vector<LatentDraw>& draws,
                                    const Eigen::MatrixXd& x_stations, const std::vector<Point>& targets,
                                    const Eigen::MatrixXd& x_targets);

enum class GroupStat { Max, Min, Mean };

/// Predictive draws of a statistic of the winter minima over a station group
/// at year offset t.
std::vector<double> group_extreme_predictive(const std::vector<int>& group, const SiteSet& stations,
                                             const GevField& field, const StableVariogram& dep, double t,
                                             GroupStat stat, int n_sims, std::uint64_t seed);

/// Synthetic dataset: Brown–Resnick dependence, GEV margins given by `field`
/// (location effects field.u), one event day per partition block and
/// optional missing values (never a whole year or a whole site).
struct SimulatedData {
  Dataset data;
  std::vector<SetPartition> partitions;  // true partitions, global indices
};
SimulatedData simulate_dataset(const SiteSet& sites, const GevField& field, const StableVariogram& dep,
                               const std::vector<int>& winters, std::uint64_t seed, double missing_prob = 0.0);

/// Draw of U ~ N(Xβ, τ² exp(−‖h‖/δ)).
Eigen::VectorXd sample_random_effect(const SiteSet& sites, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                                     double tau2, double delta, std::uint64_t seed);

/// Exponential correlation matrix exp(−‖s_i − s_j‖/δ).
Eigen::MatrixXd exponential_correlation(const SiteSet& sites, double delta);

}  // namespace brmax
