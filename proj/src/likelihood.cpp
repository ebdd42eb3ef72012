#include "brmax/likelihood.hpp"

#include <cmath>
#include <limits>
#include <thread>

#include "brmax/errors.hpp"
#include "brmax/rng.hpp"

namespace brmax {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

YearPoint transform_year(std::size_t yr, const GevField& field, const Dataset& data) {
  YearPoint p;
  p.observed = data.observed_sites(yr);
  p.z.reserve(p.observed.size());
  const auto i = static_cast<Eigen::Index>(yr);
  for (int j : p.observed) {
    const auto fp = frechet_pair(field, static_cast<std::size_t>(j), data.t(i, j), data.minima(i, j));
    if (!fp) {
      p.in_support = false;
      return p;
    }
    p.z.push_back(fp->z);
    p.log_jacobian += fp->log_dz;
  }
  return p;
}

BrModel year_model(const YearPoint& point, const StableVariogram& dep, const Dataset& data,
                   int mvn_samples) {
  return BrModel(dep, data.sites.subset(point.observed), std::nullopt, mvn_samples);
}

std::uint64_t year_seed(std::uint64_t eval_seed, int winter) {
  return derive_seed(eval_seed, {seed_tag::kYear, static_cast<std::uint64_t>(static_cast<std::int64_t>(winter))});
}

LogLik YearTerms::total() const {
  if (!in_support) return {-kInf, 0.0};
  return {log_jacobian - v + log_blocks, std::sqrt(v_se * v_se + blocks_rel_var)};
}

YearTerms year_terms(std::size_t yr, const SetPartition& pi, const ParameterState& state,
                     const Dataset& data, std::uint64_t eval_seed, int mvn_samples) {
  return year_terms(yr, pi, state, data, eval_seed, eval_seed, mvn_samples);
}

YearTerms year_terms(std::size_t yr, const SetPartition& pi, const ParameterState& state,
                     const Dataset& data, std::uint64_t v_seed, std::uint64_t blocks_seed,
                     int mvn_samples) {
  YearTerms out;
  const auto point = transform_year(yr, state.field, data);
  if (!point.in_support) {
    out.in_support = false;
    return out;
  }
  const auto model = year_model(point, state.dep, data, mvn_samples);
  const auto local = to_local(pi, point.observed);
  const auto v = exponent_v(point.z, model, year_seed(v_seed, data.years[yr]));
  const auto seed = year_seed(blocks_seed, data.years[yr]);
  out.log_jacobian = point.log_jacobian;
  out.v = v.value;
  out.v_se = v.std_error;
  for (const auto& block : local.blocks()) {
    const auto term = log_neg_partial_v(point.z, block, model, seed);
    out.log_blocks += term.log_value;
    out.blocks_rel_var += term.rel_error * term.rel_error;
  }
  return out;
}

LogLik year_loglik(std::size_t yr, const SetPartition& pi, const ParameterState& state,
                   const Dataset& data, std::uint64_t eval_seed, int mvn_samples) {
  return year_terms(yr, pi, state, data, eval_seed, mvn_samples).total();
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) f(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

LogLik total_loglik(const std::vector<SetPartition>& partitions, const ParameterState& state,
                    const Dataset& data, std::uint64_t eval_seed, int mvn_samples, int threads) {
  if (partitions.size() != data.n_years()) throw PartitionMismatch("total_loglik: one partition per year required");
  std::vector<LogLik> per_year(data.n_years());
  parallel_for(data.n_years(), threads, [&](std::size_t i) {
    per_year[i] = year_loglik(i, partitions[i], state, data, eval_seed, mvn_samples);
  });
  LogLik out;
  double var = 0.0;
  for (const auto& y : per_year) {
    if (y.value == -kInf) return {-kInf, 0.0};
    out.value += y.value;
    var += y.std_error * y.std_error;
  }
  out.std_error = std::sqrt(var);
  return out;
}

double independence_loglik(const ParameterState& state, const Dataset& data) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.n_years(); ++i)
    for (int j : data.observed_sites(i)) {
      const auto ii = static_cast<Eigen::Index>(i);
      s += gev_logpdf(state.field.at_site(static_cast<std::size_t>(j), data.t(ii, j)), -data.minima(ii, j));
    }
  return s;
}

}  // namespace brmax
