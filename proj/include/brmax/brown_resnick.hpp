#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "brmax/gaussian.hpp"
#include "brmax/partition.hpp"

namespace brmax {

/// Default per-CDF Monte Carlo budget inside the sampler.
inline constexpr int kDefaultMvnSamples = 1000;

/// Brown–Resnick dependence model restricted to a finite set of sites.
///
/// Holds the semivariogram matrix Γ and the anchored covariance Σ (checked
/// positive definite). Density terms are evaluated from Γ alone.
class BrModel {
 public:
  BrModel(StableVariogram variogram, SiteSet sites, std::optional<Point> anchor = std::nullopt,
          int mvn_samples = kDefaultMvnSamples);

  [[nodiscard]] const StableVariogram& variogram() const { return variogram_; }
  [[nodiscard]] const SiteSet& sites() const { return sites_; }
  [[nodiscard]] Point anchor() const { return anchor_; }
  [[nodiscard]] int mvn_samples() const { return mvn_samples_; }
  [[nodiscard]] std::size_t dim() const { return sites_.size(); }

  [[nodiscard]] const Eigen::MatrixXd& gamma() const { return gamma_; }
  [[nodiscard]] const Eigen::MatrixXd& sigma() const { return sigma_; }

 private:
  StableVariogram variogram_;
  SiteSet sites_;
  Point anchor_;
  int mvn_samples_;
  Eigen::MatrixXd gamma_;
  Eigen::MatrixXd sigma_;
};

/// A value with its Monte Carlo standard error.
struct McValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// A log-scale value; `rel_error` is the relative MC error of exp(log_value).
struct McLogValue {
  double log_value = 0.0;
  double rel_error = 0.0;
};

/// Exponent function V(z). Infinite coordinates are marginalized exactly.
McValue exponent_v(std::span<const double> z, const BrModel& m, std::uint64_t seed);

/// log(−V_block(z)): the mixed partial derivative of −V with respect to the
/// coordinates in `block` (0-based model indices). Throws EmptyBlock.
McLogValue log_neg_partial_v(std::span<const double> z, std::span<const int> block,
                             const BrModel& m, std::uint64_t seed);

/// Seed used for the block term of `block` under evaluation seed `seed`.
/// Terms for the same block share a seed regardless of the surrounding partition.
std::uint64_t block_seed(std::uint64_t seed, std::span<const int> block);

/// log f(z, π) = −V(z) + Σ_k log(−V_{π_k}(z)). Throws PartitionMismatch.
McLogValue log_st_joint_density(std::span<const double> z, const SetPartition& pi,
                                const BrModel& m, std::uint64_t seed);

/// log Σ_π f(z, π) over all partitions (D ≤ 10). Throws DimensionTooLarge.
double log_full_density_enum(std::span<const double> z, const BrModel& m, std::uint64_t seed);

/// Pairwise extremal coefficient 2Φ(√(2γ(h))/2).
double extremal_coefficient(const StableVariogram& v, double h);

}  // namespace brmax
