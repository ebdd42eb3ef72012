#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "brmax/dataset.hpp"
#include "brmax/gaussian.hpp"
#include "brmax/partition.hpp"

namespace brmax {

/// One observed winter minimum and the day(s) on which it occurred.
struct OccurrenceRecord {
  int year = 0;
  int site = 0;
  std::vector<int> days;
  double minimum = 0.0;
};

/// A uniformly chosen day among the record's days, keyed by (seed, year, site).
/// Throws EmptyDays.
int resolve_ties(const OccurrenceRecord& rec, std::uint64_t seed);

/// Optional spatial cap: sites at distance ≥ max_km are never linked.
struct DistanceCap {
  const SiteSet* sites = nullptr;  // coordinates of the sites in `days` order
  double max_km = 0.0;
};

/// Single-linkage clusters of one year's sites: i and j are linked when
/// |day_i − day_j| ≤ lag (and closer than the cap, if given). The result is
/// a partition of positions 0..days.size()−1.
SetPartition decluster_year(std::span<const int> days, int lag = 5,
                            std::optional<DistanceCap> cap = std::nullopt);

/// Declusters every year of a dataset. Ties are resolved with `seed`; the
/// partitions are over global site indices.
std::vector<SetPartition> decluster_dataset(const Dataset& data, std::uint64_t seed, int lag = 5,
                                            std::optional<double> max_distance_km = std::nullopt);

}  // namespace brmax
