#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "brmax/brown_resnick.hpp"
#include "brmax/dataset.hpp"
#include "brmax/margins.hpp"
#include "brmax/partition.hpp"

namespace brmax {

/// Marginal and dependence parameters ψ.
struct ParameterState {
  GevField field;
  StableVariogram dep{300.0, 1.0};
};

/// A log-likelihood estimate with its Monte Carlo standard error.
/// `value` is −∞ when an observation falls outside the GEV support.
struct LogLik {
  double value = 0.0;
  double std_error = 0.0;
};

/// Unit-Fréchet values of one year's observed minima.
struct YearPoint {
  std::vector<int> observed;  // global site indices
  std::vector<double> z;      // per observed site
  double log_jacobian = 0.0;  // Σ log f′(−y)
  bool in_support = true;
};

YearPoint transform_year(std::size_t yr, const GevField& field, const Dataset& data);

/// Dependence model for the observed sites of a year.
BrModel year_model(const YearPoint& point, const StableVariogram& dep, const Dataset& data,
                   int mvn_samples = kDefaultMvnSamples);

/// Evaluation seed of a year, keyed by its winter id so that the result does
/// not depend on the order in which years are stored.
std::uint64_t year_seed(std::uint64_t eval_seed, int winter);

/// Per-year pieces of the estimate: log f = log_jacobian − V + Σ log(−V_πk).
struct YearTerms {
  double log_jacobian = 0.0;
  double v = 0.0;
  double v_se = 0.0;
  double log_blocks = 0.0;
  double blocks_rel_var = 0.0;
  bool in_support = true;

  [[nodiscard]] LogLik total() const;
};

/// `pi` is over global site indices and must cover the year's observed sites.
YearTerms year_terms(std::size_t yr, const SetPartition& pi, const ParameterState& state,
                     const Dataset& data, std::uint64_t eval_seed,
                     int mvn_samples = kDefaultMvnSamples);

/// As above with separate evaluation seeds for the exponent and for the
/// block terms (the partition phase of the sampler refreshes only the latter).
YearTerms year_terms(std::size_t yr, const SetPartition& pi, const ParameterState& state,
                     const Dataset& data, std::uint64_t v_seed, std::uint64_t blocks_seed,
                     int mvn_samples);

LogLik year_loglik(std::size_t yr, const SetPartition& pi, const ParameterState& state,
                   const Dataset& data, std::uint64_t eval_seed, int mvn_samples = kDefaultMvnSamples);

/// Sum over years of year_loglik with per-year derived seeds; years may be
/// spread over `threads` workers without changing the result.
LogLik total_loglik(const std::vector<SetPartition>& partitions, const ParameterState& state,
                    const Dataset& data, std::uint64_t eval_seed, int mvn_samples = kDefaultMvnSamples,
                    int threads = 1);

/// Σ log GEV density of the negated minima: the likelihood under independence.
double independence_loglik(const ParameterState& state, const Dataset& data);

/// Runs f(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

}  // namespace brmax
