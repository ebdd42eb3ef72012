#include "brmax/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "brmax/errors.hpp"

namespace brmax {

bool Dataset::observed(std::size_t year, std::size_t site) const {
  return !std::isnan(minima(static_cast<Eigen::Index>(year), static_cast<Eigen::Index>(site)));
}

std::vector<int> Dataset::observed_sites(std::size_t year) const {
  std::vector<int> out;
  for (std::size_t j = 0; j < n_sites(); ++j)
    if (observed(year, j)) out.push_back(static_cast<int>(j));
  return out;
}

std::size_t Dataset::missing_count() const {
  return static_cast<std::size_t>(minima.array().isNaN().count());
}

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(n_years());
  const auto d = static_cast<Eigen::Index>(n_sites());
  if (minima.rows() != n || minima.cols() != d || t.rows() != n || t.cols() != d)
    throw ValidationError("dataset: minima/t shape does not match years × sites");
  if (days.size() != n_years()) throw ValidationError("dataset: day lists do not match years");
  if (x.rows() != d || x.cols() < 1) throw ValidationError("dataset: covariate matrix must be D × p, p ≥ 1");
  if (!x.allFinite()) throw ValidationError("dataset: non-finite covariate");
  std::vector<int> per_site(n_sites(), 0);
  for (std::size_t i = 0; i < n_years(); ++i) {
    if (days[i].size() != n_sites()) throw ValidationError("dataset: day lists do not match sites");
    int count = 0;
    for (std::size_t j = 0; j < n_sites(); ++j) {
      if (!observed(i, j)) continue;
      ++count;
      ++per_site[j];
      if (days[i][j].empty())
        throw ValidationError("dataset: observed minimum without occurrence day (year " +
                              std::to_string(years[i]) + ", site " + std::to_string(j + 1) + ")");
      if (!std::isfinite(t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))))
        throw ValidationError("dataset: observed minimum without time covariate");
    }
    if (count == 0) throw ValidationError("dataset: year " + std::to_string(years[i]) + " has no observations");
  }
  for (std::size_t j = 0; j < n_sites(); ++j)
    if (per_site[j] == 0) throw ValidationError("dataset: site " + std::to_string(j + 1) + " has no observations");
}

double time_covariate(int winter, int day) {
  using namespace std::chrono;
  const sys_days dec1 = year{winter} / December / 1;
  const sys_days origin = year{2000} / January / 1;
  return static_cast<double>((dec1 - origin).count() + day) / 365.25;
}

int winter_length(int winter) {
  using namespace std::chrono;
  const sys_days dec1 = year{winter} / December / 1;
  const sys_days apr1 = year{winter + 1} / April / 1;
  return static_cast<int>((apr1 - dec1).count());
}

SetPartition to_local(const SetPartition& global, const std::vector<int>& observed) {
  std::vector<SetPartition::Block> blocks;
  for (const auto& b : global.blocks()) {
    SetPartition::Block local;
    for (int s : b) {
      auto it = std::lower_bound(observed.begin(), observed.end(), s);
      if (it == observed.end() || *it != s) throw PartitionMismatch("partition contains an unobserved site");
      local.push_back(static_cast<int>(it - observed.begin()));
    }
    blocks.push_back(std::move(local));
  }
  SetPartition out(std::move(blocks));
  if (out.ground_size() != observed.size()) throw PartitionMismatch("partition does not cover the observed sites");
  return out;
}

SetPartition to_global(const SetPartition& local, const std::vector<int>& observed) {
  std::vector<SetPartition::Block> blocks;
  for (const auto& b : local.blocks()) {
    SetPartition::Block g;
    for (int p : b) g.push_back(observed.at(static_cast<std::size_t>(p)));
    blocks.push_back(std::move(g));
  }
  return SetPartition(std::move(blocks));
}

}  // namespace brmax
