#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace brmax {

struct MvnEstimate {
  double value = 0.0;      // estimate of Pr(X ≤ upper)
  double std_error = 0.0;  // Monte Carlo standard error across randomized shifts
  int n_samples = 0;       // integrand evaluations actually used
  std::uint64_t seed = 0;
};

/// Number of independent random shifts of the rank-1 lattice.
inline constexpr int kMvnShifts = 8;

/// Pr(X ≤ upper) for X ~ N(mean, cov) by separation of variables with
/// variable prioritization, a Richtmyer rank-1 lattice, antithetic pairs and
/// kMvnShifts random shifts (std_error from the shift batch means).
///
/// +∞ upper limits are marginalized out exactly; any −∞ limit gives 0.
/// Dimensions 0 and 1 are evaluated in closed form (std_error = 0).
/// Deterministic given seed. Throws NotPositiveDefinite.
MvnEstimate mvn_cdf(const Eigen::VectorXd& upper, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov, int n_samples, std::uint64_t seed);

}  // namespace brmax
