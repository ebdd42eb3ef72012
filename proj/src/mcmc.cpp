#include "brmax/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "brmax/errors.hpp"
#include "brmax/margins.hpp"
#include "brmax/partition_sampler.hpp"
#include "brmax/simulation.hpp"

namespace brmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTargetOne = 0.44;    // 1-D blocks
constexpr double kTargetMany = 0.30;   // larger blocks
constexpr long kCovarianceStart = 200; // switch to the empirical proposal covariance

bool logit_param(Param p) { return p == Param::Xi || p == Param::Kappa; }
bool log_param(Param p) { return p == Param::Sigma || p == Param::Lambda || p == Param::Delta; }
bool needs_likelihood(Param p) { return p != Param::Delta; }

double logistic(double w) { return w >= 0 ? 1.0 / (1.0 + std::exp(-w)) : std::exp(w) / (1.0 + std::exp(w)); }

// Value on the scale the prior is declared on.
double prior_scale_value(Param p, double native) { return log_param(p) ? std::log(native) : native; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_sorted(const std::vector<double>& s, double q) {
  const double h = (static_cast<double>(s.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

const char* param_name(Param p) {
  switch (p) {
    case Param::Alpha: return "alpha";
    case Param::Sigma: return "sigma";
    case Param::Xi: return "xi";
    case Param::Lambda: return "lambda";
    case Param::Kappa: return "kappa";
    case Param::Delta: return "delta";
  }
  return "?";
}

Param param_from_name(const std::string& name) {
  for (Param p : kAllParams)
    if (name == param_name(p)) return p;
  throw ConfigInvalid("unknown parameter '" + name + "'");
}

ScalarPrior ScalarPrior::uniform(double lo, double hi) {
  ScalarPrior s;
  s.kind = Kind::Uniform;
  s.lo = lo;
  s.hi = hi;
  return s;
}

ScalarPrior ScalarPrior::normal(double mean, double sd, double lo, double hi) {
  ScalarPrior s;
  s.kind = Kind::Normal;
  s.mean = mean;
  s.sd = sd;
  s.lo = lo;
  s.hi = hi;
  return s;
}

double ScalarPrior::log_density(double x) const {
  if (!contains(x)) return -kInf;
  if (kind == Kind::Uniform) return -std::log(hi - lo);
  const double r = (x - mean) / sd;
  return -0.5 * r * r - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

PriorSpec PriorSpec::defaults(std::size_t p) {
  PriorSpec s;
  s.beta_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  s.beta_cov = 1e4 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  return s;
}

const ScalarPrior& PriorSpec::of(Param p) const {
  switch (p) {
    case Param::Alpha: return alpha;
    case Param::Sigma: return log_sigma;
    case Param::Xi: return xi;
    case Param::Lambda: return log_lambda;
    case Param::Kappa: return kappa;
    case Param::Delta: return log_delta;
  }
  return alpha;
}

ScalarPrior& PriorSpec::of(Param p) { return const_cast<ScalarPrior&>(std::as_const(*this).of(p)); }

void PriorSpec::validate(std::size_t p) const {
  if (!beta_flat) {
    if (beta_mean.size() != static_cast<Eigen::Index>(p) || beta_cov.rows() != beta_mean.size() ||
        beta_cov.cols() != beta_mean.size())
      throw ConfigInvalid("beta prior dimension does not match the covariates");
    if (!beta_mean.allFinite() || !beta_cov.allFinite()) throw ConfigInvalid("beta prior must be finite");
    if (Eigen::LLT<Eigen::MatrixXd>(beta_cov).info() != Eigen::Success)
      throw ConfigInvalid("beta prior covariance must be positive definite");
  }
  if (!(tau2_shape > 0.0) || !(tau2_rate > 0.0)) throw ConfigInvalid("tau2 prior shape and rate must be positive");
  for (Param q : kAllParams) {
    const auto& s = of(q);
    if (!(s.lo < s.hi)) throw ConfigInvalid(std::string("prior bounds empty for ") + param_name(q));
    if (s.kind == ScalarPrior::Kind::Uniform && !(std::isfinite(s.lo) && std::isfinite(s.hi)))
      throw ConfigInvalid(std::string("uniform prior needs finite bounds: ") + param_name(q));
    if (s.kind == ScalarPrior::Kind::Normal && (!std::isfinite(s.mean) || !(s.sd > 0.0)))
      throw ConfigInvalid(std::string("normal prior needs finite mean and positive sd: ") + param_name(q));
    if (logit_param(q) && !(std::isfinite(s.lo) && std::isfinite(s.hi)))
      throw ConfigInvalid(std::string("bounded parameter needs finite prior bounds: ") + param_name(q));
  }
  if (kappa.lo < 0.0 || kappa.hi > 2.0) throw ConfigInvalid("kappa prior must lie within (0, 2]");
}

void ChainConfig::validate() const {
  if (n_chains < 1) throw ConfigInvalid("n_chains must be ≥ 1");
  if (n_iter < 1) throw ConfigInvalid("n_iter must be ≥ 1");
  if (burn_in < 0 || burn_in >= n_iter) throw ConfigInvalid("burn_in must satisfy 0 ≤ burn_in < n_iter");
  if (thin < 1 || partition_thin < 1) throw ConfigInvalid("thinning must be ≥ 1");
  if (sweeps_per_iter < 0) throw ConfigInvalid("sweeps_per_iter must be ≥ 0");
  if (u_block_size < 1) throw ConfigInvalid("u_block_size must be ≥ 1");
  if (mvn_samples < 1) throw ConfigInvalid("mvn_samples must be ≥ 1");
  std::vector<int> seen(kAllParams.size(), 0);
  for (const auto& b : blocks) {
    if (b.empty()) throw ConfigInvalid("empty parameter block");
    for (Param p : b) ++seen[static_cast<std::size_t>(p)];
  }
  for (Param p : kAllParams) {
    const int count = seen[static_cast<std::size_t>(p)];
    if (p == Param::Delta && fix_delta) {
      if (count != 0) throw ConfigInvalid("delta is fixed but appears in a block");
    } else if (count != 1) {
      throw ConfigInvalid(std::string("parameter must appear in exactly one block: ") + param_name(p));
    }
  }
}

double to_working(Param p, double native, const PriorSpec& priors) {
  if (log_param(p)) return std::log(native);
  if (logit_param(p)) {
    const auto& s = priors.of(p);
    const double u = (native - s.lo) / (s.hi - s.lo);
    return std::log(u) - std::log1p(-u);
  }
  return native;
}

double to_native(Param p, double working, const PriorSpec& priors) {
  if (log_param(p)) return std::exp(working);
  if (logit_param(p)) {
    const auto& s = priors.of(p);
    return s.lo + (s.hi - s.lo) * logistic(working);
  }
  return working;
}

double log_jacobian(Param p, double working, const PriorSpec& priors) {
  if (!logit_param(p)) return 0.0;  // other priors are declared on the working scale
  const auto& s = priors.of(p);
  const double u = logistic(working);
  return std::log(s.hi - s.lo) + std::log(u) + std::log1p(-u);
}

double get_param(const ParameterState& s, Param p) {
  switch (p) {
    case Param::Alpha: return s.field.alpha;
    case Param::Sigma: return s.field.sigma;
    case Param::Xi: return s.field.xi;
    case Param::Lambda: return s.dep.range();
    case Param::Kappa: return s.dep.smoothness();
    case Param::Delta: return s.field.delta;
  }
  return 0.0;
}

void set_param(ParameterState& s, Param p, double value) {
  switch (p) {
    case Param::Alpha: s.field.alpha = value; break;
    case Param::Sigma: s.field.sigma = value; break;
    case Param::Xi: s.field.xi = value; break;
    case Param::Lambda: s.dep = StableVariogram(value, s.dep.smoothness()); break;
    case Param::Kappa: s.dep = StableVariogram(s.dep.range(), value); break;
    case Param::Delta: s.field.delta = value; break;
  }
}

double gp_log_density(const Eigen::VectorXd& u, const Eigen::VectorXd& mean, double tau2, double delta,
                      const SiteSet& sites) {
  const Eigen::LLT<Eigen::MatrixXd> llt(exponential_correlation(sites, delta));
  if (llt.info() != Eigen::Success) return -kInf;
  const Eigen::VectorXd r = u - mean;
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  const double log_det = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const auto d = static_cast<double>(u.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi * tau2) - 0.5 * log_det - 0.5 * w.squaredNorm() / tau2;
}

namespace {

// Fresh evaluation of all years at `params`; empty when any year is outside
// the support.
std::optional<std::vector<YearRecord>> evaluate_years(const ParameterState& params,
                                                      const std::vector<SetPartition>& partitions,
                                                      const SamplerContext& ctx, std::uint64_t eval_seed) {
  std::vector<YearRecord> out(ctx.data.n_years());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].terms = year_terms(i, partitions[i], params, ctx.data, eval_seed, ctx.config.mvn_samples);
    if (!out[i].terms.in_support) return std::nullopt;
    out[i].v_seed = eval_seed;
    out[i].blocks_seed = eval_seed;
  }
  return out;
}

double sum_years(const std::vector<YearRecord>& years) {
  double s = 0.0;
  for (const auto& y : years) s += y.terms.total().value;
  return s;
}

double gp_term(const ParameterState& s, const Dataset& data) {
  return gp_log_density(s.field.u, data.x * s.field.beta, s.field.tau2, s.field.delta, data.sites);
}

// Log prior (+ Jacobian) of the block's scalars, plus the GP term when δ moves.
double block_log_prior(const ParameterState& s, const std::vector<Param>& block, const SamplerContext& ctx) {
  double lp = 0.0;
  for (Param p : block) {
    const double native = get_param(s, p);
    const auto& prior = ctx.priors.of(p);
    const double on_scale = prior_scale_value(p, native);
    if (!prior.contains(on_scale)) return -kInf;
    lp += prior.log_density(on_scale);
    if (logit_param(p)) {
      if (!(native > prior.lo && native < prior.hi)) return -kInf;
      lp += log_jacobian(p, to_working(p, native, ctx.priors), ctx.priors);
    }
    if (p == Param::Delta) lp += gp_term(s, ctx.data);
  }
  return lp;
}

Eigen::VectorXd block_working(const ChainState& chain, const BlockAdapter& block, const PriorSpec& priors) {
  if (!block.sites.empty()) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(block.sites.size()));
    for (std::size_t i = 0; i < block.sites.size(); ++i)
      w(static_cast<Eigen::Index>(i)) = chain.params.field.u(block.sites[i]);
    return w;
  }
  Eigen::VectorXd w(static_cast<Eigen::Index>(block.params.size()));
  for (std::size_t i = 0; i < block.params.size(); ++i)
    w(static_cast<Eigen::Index>(i)) = to_working(block.params[i], get_param(chain.params, block.params[i]), priors);
  return w;
}

BlockAdapter make_adapter(std::vector<Param> params, std::vector<int> sites, const ChainConfig& cfg) {
  BlockAdapter b;
  b.params = std::move(params);
  b.sites = std::move(sites);
  const auto n = static_cast<Eigen::Index>(b.sites.empty() ? b.params.size() : b.sites.size());
  b.chol = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = cfg.scale_u;
    if (b.sites.empty()) {
      switch (b.params[static_cast<std::size_t>(i)]) {
        case Param::Alpha: s = cfg.scale_alpha; break;
        case Param::Sigma: s = cfg.scale_sigma; break;
        case Param::Xi: s = cfg.scale_xi; break;
        case Param::Lambda: s = cfg.scale_lambda; break;
        case Param::Kappa: s = cfg.scale_kappa; break;
        case Param::Delta: s = cfg.scale_delta; break;
      }
    }
    b.chol(i, i) = s;
  }
  b.mean = Eigen::VectorXd::Zero(n);
  b.m2 = Eigen::MatrixXd::Zero(n, n);
  return b;
}

std::string block_label(const BlockAdapter& b) {
  std::string s;
  if (!b.sites.empty()) {
    s = "u";
    for (int j : b.sites) s += (s.size() > 1 ? "," : "") + std::to_string(j + 1);
    return s;
  }
  for (Param p : b.params) s += (s.empty() ? "" : "+") + std::string(param_name(p));
  return s;
}

}  // namespace

void evaluate_chain(ChainState& chain, const SamplerContext& ctx, std::uint64_t eval_seed) {
  if (!ctx.config.use_likelihood) {
    chain.years.assign(ctx.data.n_years(), YearRecord{});
    chain.loglik = 0.0;
    return;
  }
  ++chain.likelihood_evaluations;
  auto years = evaluate_years(chain.params, chain.partitions, ctx, eval_seed);
  if (!years) throw NumericalError("chain state lies outside the GEV support of the data");
  chain.years = std::move(*years);
  chain.loglik = sum_years(chain.years);
}

ChainState make_chain(const ParameterState& params, std::vector<SetPartition> partitions,
                      const SamplerContext& ctx, std::uint64_t chain_seed) {
  if (partitions.size() != ctx.data.n_years()) throw PartitionMismatch("make_chain: one partition per year required");
  ChainState c;
  c.params = params;
  c.partitions = std::move(partitions);
  c.stream = chain_seed;
  c.rng = make_rng(derive_seed(chain_seed, {seed_tag::kChain}));
  evaluate_chain(c, ctx, derive_seed(chain_seed, {seed_tag::kChain, 0}));
  return c;
}

bool mh_accept_step(ChainState& chain, const std::vector<Param>& block, const std::vector<double>& proposal,
                    const SamplerContext& ctx, std::uint64_t eval_seed) {
  if (proposal.size() != block.size()) throw ValidationError("mh_accept_step: proposal size mismatch");
  bool same = true;
  for (std::size_t i = 0; i < block.size(); ++i) same = same && proposal[i] == get_param(chain.params, block[i]);
  if (same) return true;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto& prior = ctx.priors.of(block[i]);
    const double v = prior_scale_value(block[i], proposal[i]);
    if (!prior.contains(v) || (logit_param(block[i]) && !(v > prior.lo && v < prior.hi))) return false;
  }

  ParameterState prop = chain.params;
  for (std::size_t i = 0; i < block.size(); ++i) set_param(prop, block[i], proposal[i]);
  const double lp_new = block_log_prior(prop, block, ctx);
  if (lp_new == -kInf) return false;
  const double lp_old = block_log_prior(chain.params, block, ctx);

  const bool with_lik = ctx.config.use_likelihood &&
                        std::any_of(block.begin(), block.end(), [](Param p) { return needs_likelihood(p); });
  std::optional<std::vector<YearRecord>> years;
  double ll_new = chain.loglik;
  if (with_lik) {
    ++chain.likelihood_evaluations;
    years = evaluate_years(prop, chain.partitions, ctx, eval_seed);
    if (!years) return false;
    ll_new = sum_years(*years);
  }
  const double log_ratio = lp_new + ll_new - lp_old - chain.loglik;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (!(std::log(unif(chain.rng)) < log_ratio)) return false;
  chain.params = std::move(prop);
  if (with_lik) {
    chain.years = std::move(*years);
    chain.loglik = ll_new;
  }
  return true;
}

void adapt_block(BlockAdapter& block, const Eigen::VectorXd& working, bool accepted, long iteration, double target) {
  const double gamma = 1.0 / std::pow(static_cast<double>(iteration) + 1.0, 0.6);
  block.log_scale += gamma * ((accepted ? 1.0 : 0.0) - target);
  block.log_scale = std::clamp(block.log_scale, -20.0, 20.0);
  ++block.n_seen;
  const Eigen::VectorXd delta = working - block.mean;
  block.mean += delta / static_cast<double>(block.n_seen);
  block.m2 += delta * (working - block.mean).transpose();
  const auto n = working.size();
  if (n > 1 && block.n_seen >= kCovarianceStart && block.n_seen % 100 == 0) {
    Eigen::MatrixXd cov = block.m2 / static_cast<double>(block.n_seen - 1);
    cov.diagonal().array() += 1e-10;
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success && (cov.diagonal().array() > 1e-9).all()) {
      const bool first = block.n_seen == kCovarianceStart;
      block.chol = llt.matrixL();
      block.chol *= 2.38 / std::sqrt(static_cast<double>(n));
      if (first) block.log_scale = 0.0;
    }
  }
}

bool mh_block_update(ChainState& chain, BlockAdapter& block, const SamplerContext& ctx, std::uint64_t eval_seed) {
  const Eigen::VectorXd cur = block_working(chain, block, ctx.priors);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(cur.size());
  for (auto& v : z) v = normal(chain.rng);
  const Eigen::VectorXd step = std::exp(block.log_scale) * (block.chol * z);
  const Eigen::VectorXd next = cur + step;

  bool accepted = false;
  if (!block.sites.empty()) {
    // U block: GP prior + likelihood.
    ParameterState prop = chain.params;
    for (std::size_t i = 0; i < block.sites.size(); ++i) prop.field.u(block.sites[i]) = next(static_cast<Eigen::Index>(i));
    if (step.isZero(0.0)) {
      accepted = true;
    } else {
      const double lp_new = gp_term(prop, ctx.data);
      const double lp_old = gp_term(chain.params, ctx.data);
      std::optional<std::vector<YearRecord>> years;
      double ll_new = chain.loglik;
      bool ok = true;
      if (ctx.config.use_likelihood) {
        ++chain.likelihood_evaluations;
        years = evaluate_years(prop, chain.partitions, ctx, eval_seed);
        ok = years.has_value();
        if (ok) ll_new = sum_years(*years);
      }
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (ok && std::log(unif(chain.rng)) < lp_new + ll_new - lp_old - chain.loglik) {
        accepted = true;
        chain.params = std::move(prop);
        if (years) {
          chain.years = std::move(*years);
          chain.loglik = ll_new;
        }
      }
    }
  } else {
    std::vector<double> native(block.params.size());
    for (std::size_t i = 0; i < block.params.size(); ++i)
      native[i] = to_native(block.params[i], next(static_cast<Eigen::Index>(i)), ctx.priors);
    accepted = step.isZero(0.0) ? true : mh_accept_step(chain, block.params, native, ctx, eval_seed);
  }

  const bool burn = chain.iteration <= ctx.config.burn_in;
  ++(burn ? block.proposed : block.proposed_post);
  if (accepted) ++(burn ? block.accepted : block.accepted_post);
  if (burn && ctx.config.adapt)
    adapt_block(block, block_working(chain, block, ctx.priors), accepted, block.proposed,
                cur.size() == 1 ? kTargetOne : kTargetMany);
  return accepted;
}

BetaConditional beta_conditional(const ParameterState& s, const Dataset& data, const PriorSpec& priors) {
  const Eigen::LLT<Eigen::MatrixXd> r(exponential_correlation(data.sites, s.field.delta));
  if (r.info() != Eigen::Success) throw NotPositiveDefinite("beta_conditional: correlation matrix");
  const Eigen::MatrixXd& x = data.x;
  Eigen::MatrixXd prec = x.transpose() * r.solve(x) / s.field.tau2;
  Eigen::VectorXd rhs = x.transpose() * r.solve(s.field.u) / s.field.tau2;
  if (!priors.beta_flat) {
    const Eigen::LLT<Eigen::MatrixXd> v0(priors.beta_cov);
    prec += v0.solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
    rhs += v0.solve(priors.beta_mean);
  }
  const Eigen::LLT<Eigen::MatrixXd> p(prec);
  if (p.info() != Eigen::Success) throw NotPositiveDefinite("beta_conditional: precision");
  BetaConditional out;
  out.mean = p.solve(rhs);
  out.cov = p.solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
  return out;
}

std::pair<double, double> tau2_conditional(const ParameterState& s, const Dataset& data, const PriorSpec& priors) {
  const Eigen::LLT<Eigen::MatrixXd> r(exponential_correlation(data.sites, s.field.delta));
  const Eigen::VectorXd res = s.field.u - data.x * s.field.beta;
  const double quad = res.dot(r.solve(res));
  return {priors.tau2_shape + 0.5 * static_cast<double>(res.size()), priors.tau2_rate + 0.5 * quad};
}

void conjugate_updates(ChainState& chain, const SamplerContext& ctx) {
  std::normal_distribution<double> normal;
  const auto bc = beta_conditional(chain.params, ctx.data, ctx.priors);
  Eigen::VectorXd z(bc.mean.size());
  for (auto& v : z) v = normal(chain.rng);
  chain.params.field.beta = bc.mean + Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(bc.cov).matrixL()) * z;
  const auto [shape, rate] = tau2_conditional(chain.params, ctx.data, ctx.priors);
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  chain.params.field.tau2 = 1.0 / gamma(chain.rng);
}

void update_random_effects(ChainState& chain, std::vector<BlockAdapter>& blocks, const SamplerContext& ctx,
                           std::uint64_t eval_seed) {
  for (std::size_t b = 0; b < blocks.size(); ++b)
    mh_block_update(chain, blocks[b], ctx, derive_seed(eval_seed, {b}));
}

void update_partitions(ChainState& chain, const SamplerContext& ctx, std::uint64_t sweep_seed) {
  if (!ctx.config.use_likelihood) return;
  const auto& data = ctx.data;
  for (std::size_t i = 0; i < data.n_years(); ++i) {
    const auto point = transform_year(i, chain.params.field, data);
    if (!point.in_support) throw NumericalError("update_partitions: incumbent state outside support");
    const auto model = year_model(point, chain.params.dep, data, ctx.config.mvn_samples);
    BlockTermCache cache(point.z, model, year_seed(sweep_seed, data.years[i]));
    auto rng = make_rng(derive_seed(sweep_seed, {seed_tag::kSweep, static_cast<std::uint64_t>(data.years[i])}));
    auto local = to_local(chain.partitions[i], point.observed);
    for (int s = 0; s < ctx.config.sweeps_per_iter; ++s) local = gibbs_sweep(local, cache, rng);
    const auto est = cache.log_blocks_estimate(local);
    chain.partitions[i] = to_global(local, point.observed);
    auto& rec = chain.years[i];
    rec.terms.log_blocks = est.log_value;
    rec.terms.blocks_rel_var = est.rel_error * est.rel_error;
    rec.blocks_seed = sweep_seed;
  }
  chain.loglik = sum_years(chain.years);
}

void run_iteration(ChainState& chain, std::vector<BlockAdapter>& mh_blocks, std::vector<BlockAdapter>& u_blocks,
                   const SamplerContext& ctx) {
  ++chain.iteration;
  const auto it = static_cast<std::uint64_t>(chain.iteration);
  if (ctx.config.mode == PartitionMode::Random && ctx.config.sweeps_per_iter > 0)
    update_partitions(chain, ctx, derive_seed(chain.stream, {seed_tag::kSweep, it}));
  conjugate_updates(chain, ctx);
  update_random_effects(chain, u_blocks, ctx, derive_seed(chain.stream, {it, 1}));
  for (std::size_t b = 0; b < mh_blocks.size(); ++b)
    mh_block_update(chain, mh_blocks[b], ctx, derive_seed(chain.stream, {it, 2, b}));
}

std::vector<std::string> sample_names(std::size_t p, std::size_t d) {
  std::vector<std::string> names;
  for (Param q : kAllParams) names.emplace_back(param_name(q));
  names.emplace_back("tau2");
  for (std::size_t k = 0; k < p; ++k) names.push_back("beta" + std::to_string(k));
  for (std::size_t j = 0; j < d; ++j) names.push_back("u" + std::to_string(j + 1));
  return names;
}

ParameterState initial_state(const Dataset& data, const PriorSpec& priors, Rng& rng) {
  std::normal_distribution<double> normal;
  const auto d = static_cast<Eigen::Index>(data.n_sites());
  ParameterState s;
  s.field.x = data.x;
  s.field.u.resize(d);
  std::vector<double> sigmas;
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<double> minima;
    for (std::size_t i = 0; i < data.n_years(); ++i)
      if (data.observed(i, static_cast<std::size_t>(j))) minima.push_back(data.minima(static_cast<Eigen::Index>(i), j));
    double mu = 0.0, sigma = 1.0;
    try {
      const auto fit = fit_gev_site(minima);
      mu = fit.params.mu;
      sigma = fit.params.sigma;
    } catch (const Error&) {
      double m = 0.0, v = 0.0;
      for (double y : minima) m -= y;
      m /= static_cast<double>(minima.size());
      for (double y : minima) v += (-y - m) * (-y - m);
      sigma = std::max(0.1, std::sqrt(v / std::max<double>(1.0, static_cast<double>(minima.size()) - 1.0)) *
                                std::sqrt(6.0) / std::numbers::pi);
      mu = m - std::numbers::egamma * sigma;
    }
    s.field.u(j) = mu + 0.3 * normal(rng);
    sigmas.push_back(sigma);
  }
  auto clamp_log = [&](Param p, double v) {
    const auto& pr = priors.of(p);
    return std::exp(std::clamp(std::log(v), pr.lo + 1e-6, pr.hi - 1e-6));
  };
  s.field.sigma = clamp_log(Param::Sigma, median(sigmas) * std::exp(0.1 * normal(rng)));
  s.field.xi = 0.0;  // the Gumbel limit has unbounded support, so every start is feasible
  s.field.alpha = std::clamp(0.005 * normal(rng), priors.alpha.lo, priors.alpha.hi);
  std::vector<double> dists;
  for (std::size_t a = 0; a < data.n_sites(); ++a)
    for (std::size_t b = a + 1; b < data.n_sites(); ++b) dists.push_back(distance(data.sites[a], data.sites[b]));
  const double scale = dists.empty() ? 100.0 : std::max(1.0, median(dists));
  const double lambda = clamp_log(Param::Lambda, scale * std::exp(0.3 * normal(rng)));
  std::uniform_real_distribution<double> unif(-0.3, 0.3);
  const auto& kp = priors.kappa;
  const double kappa = std::clamp(1.0 + unif(rng), kp.lo + 0.05 * (kp.hi - kp.lo), kp.hi - 0.05 * (kp.hi - kp.lo));
  s.dep = StableVariogram(lambda, kappa);
  s.field.delta = clamp_log(Param::Delta, scale * std::exp(0.3 * normal(rng)));
  // β by least squares of U on X, τ² from the residual spread.
  const Eigen::MatrixXd& x = data.x;
  s.field.beta = x.colPivHouseholderQr().solve(s.field.u);
  const Eigen::VectorXd res = s.field.u - x * s.field.beta;
  s.field.tau2 = std::max(0.1, res.squaredNorm() / std::max<double>(1.0, static_cast<double>(d - x.cols())));
  return s;
}

int PosteriorSamples::n_chains() const {
  return chain.empty() ? 0 : *std::max_element(chain.begin(), chain.end()) + 1;
}

Eigen::Index PosteriorSamples::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError("no sample column '" + name + "'");
  return static_cast<Eigen::Index>(it - names.begin());
}

std::vector<std::vector<double>> PosteriorSamples::per_chain(Eigen::Index col) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n_chains()));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    out[static_cast<std::size_t>(chain[static_cast<std::size_t>(r)])].push_back(values(r, col));
  return out;
}

std::vector<ParamSummary> PosteriorSamples::summarize() const {
  std::vector<ParamSummary> out;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    ParamSummary s;
    s.name = names[static_cast<std::size_t>(c)];
    std::vector<double> v(values.col(c).data(), values.col(c).data() + values.rows());
    if (v.empty()) continue;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    std::sort(v.begin(), v.end());
    s.q025 = quantile_sorted(v, 0.025);
    s.q975 = quantile_sorted(v, 0.975);
    const auto chains = per_chain(c);
    s.rhat = split_rhat(chains);
    s.ess = effective_sample_size(chains);
    out.push_back(s);
  }
  return out;
}

ParameterState PosteriorSamples::state_at(Eigen::Index r, const Dataset& data) const {
  ParameterState s;
  const auto p = data.x.cols();
  const auto d = static_cast<Eigen::Index>(data.n_sites());
  s.field.x = data.x;
  s.field.alpha = values(r, column("alpha"));
  s.field.sigma = values(r, column("sigma"));
  s.field.xi = values(r, column("xi"));
  s.field.delta = values(r, column("delta"));
  s.field.tau2 = values(r, column("tau2"));
  s.dep = StableVariogram(values(r, column("lambda")), values(r, column("kappa")));
  s.field.beta.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) s.field.beta(k) = values(r, column("beta" + std::to_string(k)));
  s.field.u.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) s.field.u(j) = values(r, column("u" + std::to_string(j + 1)));
  return s;
}

ParameterState PosteriorSamples::posterior_mean_state(const Dataset& data) const {
  PosteriorSamples m;
  m.names = names;
  m.values = values.colwise().mean();
  return m.state_at(0, data);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) continue;
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::min_element(halves.begin(), halves.end(), [](auto& a, auto& b) {
                          return a.size() < b.size();
                        })->size();
  std::vector<double> means, vars;
  for (auto& c : halves) {
    c.resize(n);
    const double m = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(n);
    double v = 0.0;
    for (double x : c) v += (x - m) * (x - m);
    means.push_back(m);
    vars.push_back(v / static_cast<double>(n - 1));
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(vars.size());
  const double mm = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  double b = 0.0;
  for (double m : means) b += (m - mm) * (m - mm);
  b *= static_cast<double>(n) / static_cast<double>(means.size() - 1);
  if (!(w > 0.0)) return b > 0.0 ? kInf : 1.0;
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) return 0.0;
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  const std::size_t m = chains.size();
  if (n < 4) return static_cast<double>(m * n);
  std::vector<double> means(m), vars(m);
  std::vector<std::vector<double>> centred(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = std::accumulate(chains[c].begin(), chains[c].begin() + static_cast<std::ptrdiff_t>(n), 0.0) /
               static_cast<double>(n);
    centred[c].resize(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      centred[c][i] = chains[c][i] - means[c];
      v += centred[c][i] * centred[c][i];
    }
    vars[c] = v / static_cast<double>(n - 1);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(m);
  double b_over_n = 0.0;
  if (m > 1) {
    const double mm = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
    for (double x : means) b_over_n += (x - mm) * (x - mm);
    b_over_n /= static_cast<double>(m - 1);
  }
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b_over_n;
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);
  auto rho = [&](std::size_t t) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += centred[c][i] * centred[c][i + t];
      acov += s / static_cast<double>(n);
    }
    acov /= static_cast<double>(m);
    // Biased autocovariances; rescale the lag-0 term to the unbiased W.
    return 1.0 - (w * (static_cast<double>(n) - 1.0) / static_cast<double>(n) - acov) / var_plus;
  };
  double tau = 0.0;
  double prev = kInf;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pk = rho(2 * k) + rho(2 * k + 1);
    if (pk < 0.0) break;
    pk = std::min(pk, prev);
    prev = pk;
    tau += pk;
  }
  tau = std::max(2.0 * tau - 1.0, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

PosteriorSamples run_chains(const ChainConfig& config, const Dataset& data, const PriorSpec& priors,
                            std::uint64_t master_seed, const std::vector<SetPartition>& initial_partitions) {
  config.validate();
  data.validate();
  priors.validate(static_cast<std::size_t>(data.x.cols()));
  std::vector<SetPartition> start = initial_partitions;
  if (start.empty()) {
    if (config.mode == PartitionMode::Fixed && config.use_likelihood)
      throw ConfigInvalid("fixed-partition mode needs partitions (e.g. from declustering)");
    for (std::size_t i = 0; i < data.n_years(); ++i) start.push_back(SetPartition::singletons(data.observed_sites(i)));
  }
  if (start.size() != data.n_years()) throw ConfigInvalid("one initial partition per year required");

  const SamplerContext ctx{data, priors, config};
  const auto names = sample_names(static_cast<std::size_t>(data.x.cols()), data.n_sites());
  const auto kept = static_cast<std::size_t>((config.n_iter - config.burn_in) / config.thin);

  struct ChainOutput {
    Eigen::MatrixXd values;
    std::vector<int> iteration;
    std::vector<int> partition_rows;
    std::vector<std::vector<SetPartition>> partitions;
    std::vector<AcceptanceRate> acceptance;
    long evaluations = 0;
  };
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(config.n_chains));

  parallel_for(outputs.size(), config.threads, [&](std::size_t c) {
    const std::uint64_t seed = derive_seed(master_seed, {seed_tag::kChain, c});
    auto init_rng = make_rng(derive_seed(seed, {seed_tag::kChain, 1}));
    auto params = initial_state(data, priors, init_rng);
    if (config.fix_delta) params.field.delta = std::exp(0.5 * (priors.log_delta.lo + priors.log_delta.hi));
    ChainState chain = make_chain(params, start, ctx, seed);

    std::vector<BlockAdapter> mh;
    for (const auto& b : config.blocks) mh.push_back(make_adapter(b, {}, config));
    std::vector<BlockAdapter> ub;
    for (std::size_t j = 0; j < data.n_sites(); j += static_cast<std::size_t>(config.u_block_size)) {
      std::vector<int> sites;
      for (std::size_t k = j; k < std::min(data.n_sites(), j + static_cast<std::size_t>(config.u_block_size)); ++k)
        sites.push_back(static_cast<int>(k));
      ub.push_back(make_adapter({}, sites, config));
    }

    auto& out = outputs[c];
    out.values.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(names.size()));
    std::size_t row = 0;
    for (int it = 1; it <= config.n_iter; ++it) {
      run_iteration(chain, mh, ub, ctx);
      if (it <= config.burn_in || (it - config.burn_in) % config.thin != 0 || row >= kept) continue;
      const auto r = static_cast<Eigen::Index>(row);
      Eigen::Index col = 0;
      for (Param q : kAllParams) out.values(r, col++) = get_param(chain.params, q);
      out.values(r, col++) = chain.params.field.tau2;
      for (auto b : chain.params.field.beta) out.values(r, col++) = b;
      for (auto u : chain.params.field.u) out.values(r, col++) = u;
      out.iteration.push_back(it);
      if (row % static_cast<std::size_t>(config.partition_thin) == 0) {
        out.partition_rows.push_back(static_cast<int>(row));
        out.partitions.push_back(chain.partitions);
      }
      ++row;
    }
    for (const auto* group : {&mh, &ub})
      for (const auto& b : *group) {
        AcceptanceRate a;
        a.chain = static_cast<int>(c);
        a.block = block_label(b);
        a.burn_in = b.proposed ? static_cast<double>(b.accepted) / static_cast<double>(b.proposed) : 0.0;
        a.sampling = b.proposed_post ? static_cast<double>(b.accepted_post) / static_cast<double>(b.proposed_post) : 0.0;
        out.acceptance.push_back(a);
      }
    out.evaluations = chain.likelihood_evaluations;
  });

  PosteriorSamples ps;
  ps.names = names;
  ps.values.resize(static_cast<Eigen::Index>(kept * outputs.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < outputs.size(); ++c) {
    const auto& o = outputs[c];
    const auto offset = static_cast<Eigen::Index>(c * kept);
    ps.values.middleRows(offset, static_cast<Eigen::Index>(kept)) = o.values;
    for (std::size_t r = 0; r < kept; ++r) {
      ps.chain.push_back(static_cast<int>(c));
      ps.iteration.push_back(o.iteration[r]);
    }
    for (std::size_t k = 0; k < o.partition_rows.size(); ++k) {
      ps.partition_rows.push_back(static_cast<int>(offset) + o.partition_rows[k]);
      ps.partitions.push_back(o.partitions[k]);
    }
    ps.acceptance.insert(ps.acceptance.end(), o.acceptance.begin(), o.acceptance.end());
    ps.likelihood_evaluations.push_back(o.evaluations);
  }
  return ps;
}

}  // namespace brmax
