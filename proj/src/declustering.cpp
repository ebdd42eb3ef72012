#include "brmax/declustering.hpp"

#include <map>
#include <numeric>

#include "brmax/errors.hpp"
#include "brmax/rng.hpp"

namespace brmax {

int resolve_ties(const OccurrenceRecord& rec, std::uint64_t seed) {
  if (rec.days.empty()) throw EmptyDays("occurrence record without days");
  if (rec.days.size() == 1) return rec.days.front();
  auto rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(rec.year), static_cast<std::uint64_t>(rec.site)}));
  std::uniform_int_distribution<std::size_t> pick(0, rec.days.size() - 1);
  return rec.days[pick(rng)];
}

namespace {

int find_root(std::vector<int>& parent, int i) {
  while (parent[static_cast<std::size_t>(i)] != i) {
    parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    i = parent[static_cast<std::size_t>(i)];
  }
  return i;
}

}  // namespace

SetPartition decluster_year(std::span<const int> days, int lag, std::optional<DistanceCap> cap) {
  if (lag < 0) throw ValidationError("decluster_year: lag must be ≥ 0");
  const int n = static_cast<int>(days.size());
  if (cap && (cap->sites == nullptr || cap->sites->size() != days.size()))
    throw ValidationError("decluster_year: distance cap needs one site per day");
  std::vector<int> parent(days.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(days[static_cast<std::size_t>(i)] - days[static_cast<std::size_t>(j)]) > lag) continue;
      if (cap && distance((*cap->sites)[static_cast<std::size_t>(i)], (*cap->sites)[static_cast<std::size_t>(j)]) >= cap->max_km)
        continue;
      parent[static_cast<std::size_t>(find_root(parent, i))] = find_root(parent, j);
    }
  std::map<int, SetPartition::Block> groups;
  for (int i = 0; i < n; ++i) groups[find_root(parent, i)].push_back(i);
  std::vector<SetPartition::Block> blocks;
  for (auto& [root, b] : groups) blocks.push_back(std::move(b));
  return SetPartition(std::move(blocks));
}

std::vector<SetPartition> decluster_dataset(const Dataset& data, std::uint64_t seed, int lag,
                                            std::optional<double> max_distance_km) {
  std::vector<SetPartition> out;
  for (std::size_t i = 0; i < data.n_years(); ++i) {
    const auto obs = data.observed_sites(i);
    std::vector<int> resolved;
    for (int j : obs) {
      OccurrenceRecord rec{data.years[i], j, data.days[i][static_cast<std::size_t>(j)],
                           data.minima(static_cast<Eigen::Index>(i), j)};
      resolved.push_back(resolve_ties(rec, seed));
    }
    std::optional<DistanceCap> cap;
    SiteSet sub;
    if (max_distance_km) {
      sub = data.sites.subset(obs);
      cap = DistanceCap{&sub, *max_distance_km};
    }
    out.push_back(to_global(decluster_year(resolved, lag, cap), obs));
  }
  return out;
}

}  // namespace brmax
