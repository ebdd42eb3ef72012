#include "brmax/partition_sampler.hpp"

#include <algorithm>
#include <cmath>

#include "brmax/errors.hpp"

namespace brmax {

BlockTermCache::BlockTermCache(std::span<const double> z, const BrModel& model, std::uint64_t seed)
    : z_(z.begin(), z.end()), model_(&model), seed_(seed) {
  if (z_.size() != model.dim()) throw ValidationError("BlockTermCache: size mismatch");
}

const McLogValue& BlockTermCache::term(std::span<const int> block) {
  std::uint64_t mask = 0;
  for (int b : block) mask |= 1ULL << static_cast<unsigned>(b);
  if (auto it = terms_.find(mask); it != terms_.end()) return it->second;
  ++evaluations_;
  return terms_.emplace(mask, log_neg_partial_v(z_, block, *model_, seed_)).first->second;
}

double BlockTermCache::log_term(std::span<const int> block) { return term(block).log_value; }

McLogValue BlockTermCache::log_blocks_estimate(const SetPartition& pi) {
  McLogValue out;
  double var = 0.0;
  for (const auto& b : pi.blocks()) {
    const auto& t = term(b);
    out.log_value += t.log_value;
    var += t.rel_error * t.rel_error;
  }
  out.rel_error = std::sqrt(var);
  return out;
}

double BlockTermCache::log_blocks(const SetPartition& pi) {
  double s = 0.0;
  for (const auto& b : pi.blocks()) s += log_term(b);
  return s;
}

std::vector<PartitionProbability> exact_conditional(std::span<const double> z, const BrModel& m,
                                                    std::uint64_t seed) {
  if (m.dim() > 8) throw DimensionTooLarge("exact_conditional: more than 8 sites");
  std::vector<int> ground(m.dim());
  for (std::size_t i = 0; i < ground.size(); ++i) ground[i] = static_cast<int>(i);
  BlockTermCache cache(z, m, seed);
  auto parts = enumerate_partitions(ground);
  std::vector<double> logs;
  logs.reserve(parts.size());
  for (const auto& p : parts) logs.push_back(cache.log_blocks(p));  // exp(−V) cancels
  const double mx = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (auto& l : logs) {
    l = std::isfinite(l) ? std::exp(l - mx) : 0.0;
    total += l;
  }
  std::vector<PartitionProbability> out;
  out.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) out.push_back({std::move(parts[i]), logs[i] / total});
  return out;
}

SetPartition gibbs_sweep(const SetPartition& pi, BlockTermCache& cache, Rng& rng,
                         std::vector<GibbsMove>* trace) {
  std::vector<std::vector<int>> blocks = pi.blocks();
  std::vector<int> order = pi.ground();
  if (order.size() <= 1) return pi;
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> logw;
  std::vector<int> joined;
  for (int site : order) {
    auto home = std::find_if(blocks.begin(), blocks.end(), [site](const std::vector<int>& b) {
      return std::find(b.begin(), b.end(), site) != b.end();
    });
    home->erase(std::find(home->begin(), home->end(), site));
    if (home->empty()) blocks.erase(home);

    const std::size_t k = blocks.size();
    logw.assign(k + 1, 0.0);
    for (std::size_t b = 0; b < k; ++b) {
      joined = blocks[b];
      joined.push_back(site);
      logw[b] = cache.log_term(joined) - cache.log_term(blocks[b]);
    }
    const int single[1] = {site};
    logw[k] = cache.log_term(single);

    const double mx = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (auto& w : logw) {
      w = std::isfinite(w) ? std::exp(w - mx) : 0.0;
      total += w;
    }
    if (!(total > 0.0)) throw NumericalError("gibbs_sweep: all candidate weights vanish");

    if (trace) {
      GibbsMove move;
      move.site = site;
      move.without_site = SetPartition(blocks);
      for (std::size_t b = 0; b <= k; ++b) {
        auto cand = blocks;
        if (b < k)
          cand[b].push_back(site);
        else
          cand.push_back({site});
        move.candidates.emplace_back(std::move(cand));
        move.probabilities.push_back(logw[b] / total);
      }
      trace->push_back(std::move(move));
    }

    double u = unif(rng) * total;
    std::size_t pick = 0;
    while (pick < k && u >= logw[pick]) {
      u -= logw[pick];
      ++pick;
    }
    if (pick < k)
      blocks[pick].push_back(site);
    else
      blocks.push_back({site});
  }
  return SetPartition(std::move(blocks));
}

SetPartition gibbs_sweep(const SetPartition& pi, std::span<const double> z, const BrModel& m,
                         std::uint64_t seed) {
  BlockTermCache cache(z, m, derive_seed(seed, {seed_tag::kSweep, 0}));
  auto rng = make_rng(derive_seed(seed, {seed_tag::kSweep, 1}));
  return gibbs_sweep(pi, cache, rng);
}

}  // namespace brmax
