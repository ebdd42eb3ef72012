#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "brmax/dataset.hpp"
#include "brmax/likelihood.hpp"
#include "brmax/partition.hpp"
#include "brmax/rng.hpp"

namespace brmax {

/// Scalar parameters updated by Metropolis–Hastings.
enum class Param { Alpha, Sigma, Xi, Lambda, Kappa, Delta };
inline constexpr std::array kAllParams{Param::Alpha, Param::Sigma, Param::Xi,
                                       Param::Lambda, Param::Kappa, Param::Delta};
const char* param_name(Param p);
Param param_from_name(const std::string& name);

/// Prior of one scalar on the scale it is declared on (α, log σ, ξ, log λ,
/// κ, log δ). Uniform on [lo, hi], or normal truncated to [lo, hi].
struct ScalarPrior {
  enum class Kind { Uniform, Normal };
  Kind kind = Kind::Uniform;
  double mean = 0.0;
  double sd = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static ScalarPrior uniform(double lo, double hi);
  static ScalarPrior normal(double mean, double sd, double lo = -std::numeric_limits<double>::infinity(),
                            double hi = std::numeric_limits<double>::infinity());
  /// Log density up to the truncation constant; −∞ outside [lo, hi].
  [[nodiscard]] double log_density(double x) const;
  [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
};

struct PriorSpec {
  Eigen::VectorXd beta_mean;
  Eigen::MatrixXd beta_cov;
  bool beta_flat = false;       // improper flat prior: β | U is the GLS fit
  double tau2_shape = 2.0;      // inverse gamma
  double tau2_rate = 1.0;
  ScalarPrior alpha = ScalarPrior::normal(0.0, 1.0);
  ScalarPrior log_sigma = ScalarPrior::uniform(std::log(0.05), std::log(50.0));
  ScalarPrior xi = ScalarPrior::uniform(-0.5, 0.5);
  ScalarPrior log_lambda = ScalarPrior::uniform(std::log(1.0), std::log(1e5));
  ScalarPrior kappa = ScalarPrior::uniform(0.0, 2.0);
  ScalarPrior log_delta = ScalarPrior::uniform(std::log(1.0), std::log(1e4));

  /// Vague defaults for p covariates: β ~ N(0, 100² I).
  static PriorSpec defaults(std::size_t p);
  [[nodiscard]] const ScalarPrior& of(Param p) const;
  ScalarPrior& of(Param p);
  void validate(std::size_t p) const;
};

enum class PartitionMode { Fixed, Random };  // M2, M3

struct ChainConfig {
  int n_chains = 50;
  int n_iter = 15000;
  int burn_in = 5000;
  int thin = 1;
  PartitionMode mode = PartitionMode::Random;
  int sweeps_per_iter = 1;
  std::vector<std::vector<Param>> blocks{{Param::Alpha}, {Param::Sigma, Param::Xi},
                                         {Param::Lambda, Param::Kappa}, {Param::Delta}};
  int u_block_size = 4;
  int mvn_samples = kDefaultMvnSamples;
  bool use_likelihood = true;   // false: prior-only mode
  bool fix_delta = false;
  bool adapt = true;
  int partition_thin = 10;      // keep partitions every this many retained draws
  int threads = 1;
  // Initial random-walk scales on the working scale.
  double scale_alpha = 0.01;
  double scale_sigma = 0.05;    // log σ
  double scale_xi = 0.2;        // logit
  double scale_lambda = 0.2;    // log λ
  double scale_kappa = 0.2;     // logit
  double scale_delta = 0.3;     // log δ
  double scale_u = 0.3;

  /// Throws ConfigInvalid.
  void validate() const;
};

/// Running state of one MH block, adapted during burn-in only.
struct BlockAdapter {
  std::vector<Param> params;   // empty for a U block
  std::vector<int> sites;      // U indices for a U block
  Eigen::MatrixXd chol;        // proposal factor (working scale)
  double log_scale = 0.0;
  Eigen::VectorXd mean;        // running moments of the working values
  Eigen::MatrixXd m2;
  long n_seen = 0;
  long proposed = 0;
  long accepted = 0;
  long proposed_post = 0;      // after burn-in
  long accepted_post = 0;
};

/// Retained per-year estimate and the seeds it was computed with.
struct YearRecord {
  YearTerms terms;
  std::uint64_t v_seed = 0;
  std::uint64_t blocks_seed = 0;
};

struct ChainState {
  ParameterState params;
  std::vector<SetPartition> partitions;  // global site indices
  std::vector<YearRecord> years;         // retained estimate pieces
  double loglik = 0.0;                   // Σ of the retained year totals
  long iteration = 0;
  std::uint64_t stream = 0;              // chain seed
  long likelihood_evaluations = 0;       // full evaluations (one per non-trivial proposal)
  Rng rng;
};

/// Everything an update kernel needs besides the chain.
struct SamplerContext {
  const Dataset& data;
  const PriorSpec& priors;
  const ChainConfig& config;
};

/// Working-scale transform: identity for α, log for σ, λ, δ, and a logit
/// onto the prior bounds for ξ and κ.
double to_working(Param p, double native, const PriorSpec& priors);
double to_native(Param p, double working, const PriorSpec& priors);
/// log |d native / d working| at the working value, for priors declared on
/// the native scale.
double log_jacobian(Param p, double working, const PriorSpec& priors);

double get_param(const ParameterState& s, Param p);
void set_param(ParameterState& s, Param p, double value);

/// log N(U; Xβ, τ² exp(−‖h‖/δ)).
double gp_log_density(const Eigen::VectorXd& u, const Eigen::VectorXd& mean, double tau2, double delta,
                      const SiteSet& sites);

/// Fresh full evaluation of every year with one seed; fills chain.years and
/// chain.loglik. Counts as one likelihood evaluation.
void evaluate_chain(ChainState& chain, const SamplerContext& ctx, std::uint64_t eval_seed);

/// Chain at explicit parameters and partitions, with its estimate evaluated.
ChainState make_chain(const ParameterState& params, std::vector<SetPartition> partitions,
                      const SamplerContext& ctx, std::uint64_t chain_seed);

/// MH step for a block of scalar parameters with an explicit proposal on the
/// native scale. Proposals outside the prior support are rejected without
/// evaluating the likelihood; a proposal equal to the current state is
/// accepted without evaluation. Returns whether it was accepted.
bool mh_accept_step(ChainState& chain, const std::vector<Param>& block, const std::vector<double>& proposal,
                    const SamplerContext& ctx, std::uint64_t eval_seed);

/// Gaussian random-walk MH update of one block on the working scale.
bool mh_block_update(ChainState& chain, BlockAdapter& block, const SamplerContext& ctx, std::uint64_t eval_seed);

/// Exact Gibbs draws of β and then τ² from their full conditionals.
void conjugate_updates(ChainState& chain, const SamplerContext& ctx);

/// Full-conditional moments used by conjugate_updates.
struct BetaConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
BetaConditional beta_conditional(const ParameterState& s, const Dataset& data, const PriorSpec& priors);
/// Inverse-gamma (shape, rate) of τ² | U, β, δ.
std::pair<double, double> tau2_conditional(const ParameterState& s, const Dataset& data, const PriorSpec& priors);

/// Random-walk MH on U in blocks of sites (see BlockAdapter::sites).
void update_random_effects(ChainState& chain, std::vector<BlockAdapter>& blocks, const SamplerContext& ctx,
                           std::uint64_t eval_seed);

/// Gibbs sweeps over every year's partition with fresh block-term seeds;
/// the retained block terms are refreshed from the same cache.
void update_partitions(ChainState& chain, const SamplerContext& ctx, std::uint64_t sweep_seed);

/// Robbins–Monro step of the log scale plus running moments.
void adapt_block(BlockAdapter& block, const Eigen::VectorXd& working, bool accepted, long iteration,
                 double target);

/// One full iteration: partitions (random mode) → β, τ² → U → MH blocks.
void run_iteration(ChainState& chain, std::vector<BlockAdapter>& mh_blocks, std::vector<BlockAdapter>& u_blocks,
                   const SamplerContext& ctx);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
};

struct AcceptanceRate {
  int chain = 0;
  std::string block;
  double burn_in = 0.0;
  double sampling = 0.0;
};

struct PosteriorSamples {
  std::vector<std::string> names;
  Eigen::MatrixXd values;                 // one row per retained draw, chains stacked
  std::vector<int> chain;
  std::vector<int> iteration;
  std::vector<int> partition_rows;        // rows whose partitions are kept
  std::vector<std::vector<SetPartition>> partitions;
  std::vector<AcceptanceRate> acceptance;
  std::vector<long> likelihood_evaluations;  // per chain

  [[nodiscard]] int n_chains() const;
  [[nodiscard]] Eigen::Index column(const std::string& name) const;
  [[nodiscard]] std::vector<std::vector<double>> per_chain(Eigen::Index col) const;
  [[nodiscard]] std::vector<ParamSummary> summarize() const;
  /// Parameter state at the posterior means (U, β, scalars).
  [[nodiscard]] ParameterState posterior_mean_state(const Dataset& data) const;
  /// Parameter state of retained row r.
  [[nodiscard]] ParameterState state_at(Eigen::Index r, const Dataset& data) const;
};

/// Names of the sampled columns for p covariates and D sites.
std::vector<std::string> sample_names(std::size_t p, std::size_t d);

/// Starting values from per-site GEV fits, overdispersed by `rng`.
ParameterState initial_state(const Dataset& data, const PriorSpec& priors, Rng& rng);

/// Independent chains with streams derived from `master_seed`. Initial
/// partitions are required in fixed mode and optional (singletons) in random
/// mode. Chains may run on `config.threads` workers without changing output.
PosteriorSamples run_chains(const ChainConfig& config, const Dataset& data, const PriorSpec& priors,
                            std::uint64_t master_seed,
                            const std::vector<SetPartition>& initial_partitions = {});

/// Split-chain potential scale reduction.
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Effective sample size over chains (Geyer initial monotone sequence).
double effective_sample_size(const std::vector<std::vector<double>>& chains);

}  // namespace brmax
