#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "brmax/brown_resnick.hpp"
#include "brmax/partition.hpp"
#include "brmax/rng.hpp"

namespace brmax {

/// Memoized log(−V_B(z)) terms for one z vector under one MC seed.
/// Blocks are identified by bitmask, so a term is computed once however many
/// candidate partitions share it.
class BlockTermCache {
 public:
  BlockTermCache(std::span<const double> z, const BrModel& model, std::uint64_t seed);

  double log_term(std::span<const int> block);
  double log_blocks(const SetPartition& pi);
  /// Σ_k log(−V_πk) with the summed squared relative MC errors as rel_error².
  McLogValue log_blocks_estimate(const SetPartition& pi);
  [[nodiscard]] std::size_t evaluations() const { return evaluations_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::vector<double> z_;
  const BrModel* model_;
  std::uint64_t seed_;
  std::unordered_map<std::uint64_t, McLogValue> terms_;

  const McLogValue& term(std::span<const int> block);
  std::size_t evaluations_ = 0;
};

struct PartitionProbability {
  SetPartition partition;
  double probability = 0.0;
};

/// Pr(Π = π | Z = z) over all partitions of the model's sites (D ≤ 8), with
/// one MC seed shared by every partition.
std::vector<PartitionProbability> exact_conditional(std::span<const double> z, const BrModel& m,
                                                    std::uint64_t seed);

/// Record of one single-site move, for auditing the sampler.
struct GibbsMove {
  int site = 0;
  SetPartition without_site;              // π_{−j}
  std::vector<SetPartition> candidates;   // the ≤ K+1 reassignments
  std::vector<double> probabilities;
};

/// One full sweep: every site visited once in a fresh uniform order; each
/// visit removes the site and reassigns it to an existing block or a new
/// singleton with probability ∝ f(z, π*). `rng` drives order and draws.
SetPartition gibbs_sweep(const SetPartition& pi, BlockTermCache& cache, Rng& rng,
                         std::vector<GibbsMove>* trace = nullptr);

/// Convenience overload; MC seed and RNG are both derived from `seed`.
SetPartition gibbs_sweep(const SetPartition& pi, std::span<const double> z, const BrModel& m,
                         std::uint64_t seed);

}  // namespace brmax
