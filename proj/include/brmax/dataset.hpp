#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "brmax/gaussian.hpp"
#include "brmax/partition.hpp"

namespace brmax {

/// Per-year, per-site winter minima (°C) with occurrence days.
///
/// Missing values are NaN in `minima` and `t`, with an empty day list.
/// Winters are identified by the year of their December; days are counted
/// from 1 December (day 0) through March.
struct Dataset {
  SiteSet sites;
  std::vector<int> years;                          // N winter ids
  Eigen::MatrixXd minima;                          // N × D
  Eigen::MatrixXd t;                               // N × D, years since 2000-01-01
  std::vector<std::vector<std::vector<int>>> days; // N × D occurrence days
  Eigen::MatrixXd x;                               // D × p covariates (first column intercept)

  [[nodiscard]] std::size_t n_years() const { return years.size(); }
  [[nodiscard]] std::size_t n_sites() const { return sites.size(); }
  [[nodiscard]] bool observed(std::size_t year, std::size_t site) const;
  /// Observed site indices of a year, ascending.
  [[nodiscard]] std::vector<int> observed_sites(std::size_t year) const;
  [[nodiscard]] std::size_t missing_count() const;

  /// Checks shapes, ≥ 1 observation per year and per site, and day lists.
  void validate() const;
};

/// Years since 2000-01-01 of day `day` (0 = 1 December) of winter `winter`.
double time_covariate(int winter, int day);

/// Number of days in the December–March window of `winter`.
int winter_length(int winter);

/// Partition over global site indices ↔ partition over positions 0..n−1 of
/// `observed` (the per-year ordering used by the likelihood).
SetPartition to_local(const SetPartition& global, const std::vector<int>& observed);
SetPartition to_global(const SetPartition& local, const std::vector<int>& observed);

}  // namespace brmax
