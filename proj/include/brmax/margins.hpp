#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "brmax/rng.hpp"

namespace brmax {

/// GEV(μ, σ, ξ). Throughout the library these describe *negated* minima;
/// user-facing quantities are converted back to the minimum scale.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

/// |ξ| below this is treated as the Gumbel limit.
inline constexpr double kGumbelThreshold = 1e-8;

enum class GevKind { Cdf, Pdf, Quantile };

/// cdf and pdf return 0/1 and 0 outside the support; quantile needs y in (0,1).
double gev_eval(const GevParams& p, double y, GevKind kind);
double gev_cdf(const GevParams& p, double x);
double gev_pdf(const GevParams& p, double x);
double gev_logpdf(const GevParams& p, double x);
double gev_quantile(const GevParams& p, double prob);
double gev_sample(const GevParams& p, Rng& rng);
/// Mean μ + σ{Γ(1−ξ) − 1}/ξ; throws ShapeTooLarge for ξ ≥ 1.
double gev_mean(const GevParams& p);
/// Support bounds (lower, upper), possibly infinite.
std::pair<double, double> gev_support(const GevParams& p);

/// Nonstationary marginal model: negated minima at site j, year offset t,
/// follow GEV(U_j + α t, σ, ξ); U ~ N(Xβ, τ² exp(−‖h‖/δ)).
struct GevField {
  Eigen::VectorXd beta;   // intercept + covariate coefficients
  Eigen::VectorXd u;      // latent location effects at stations
  double alpha = 0.0;     // trend per year (negated scale)
  double sigma = 1.0;
  double xi = 0.0;
  double tau2 = 1.0;
  double delta = 100.0;   // km
  Eigen::MatrixXd x;      // D × p covariates

  [[nodiscard]] GevParams at_site(std::size_t site, double t) const {
    return {u(static_cast<Eigen::Index>(site)) + alpha * t, sigma, xi};
  }
  void validate() const;
};

/// Unit-Fréchet value z = f(−y) and log f′(−y) for an observed minimum y.
struct FrechetPair {
  double z = 0.0;
  double log_z = 0.0;
  double log_dz = 0.0;  // log of f′, the Jacobian factor
  [[nodiscard]] double dz() const;
};

/// Transformation of a negated-scale value x under GEV p. nullopt outside the support.
std::optional<FrechetPair> frechet_transform(const GevParams& p, double x);

/// Transformation of minimum y at (site, t). nullopt when −y is outside the support.
std::optional<FrechetPair> frechet_pair(const GevField& field, std::size_t site, double t, double y);

/// Mean winter minimum (minimum scale) for location effect μ(s,0) = `mu0`
/// on the negated scale, at year offset t.
double gev_mean_forecast(const GevField& field, double mu0, double t);
double gev_mean_forecast(const GevField& field, std::size_t site, double t);

/// Pr(minimum > threshold) at location effect `mu0` and year offset t.
double exceedance_prob(const GevField& field, double mu0, double t, double threshold = -36.0);

struct GevFit {
  GevParams params;
  std::array<double, 3> std_errors{};  // (μ, σ, ξ)
  double neg_loglik = 0.0;
  bool small_sample = false;            // fewer than 20 values
};

/// Maximum-likelihood GEV fit over (μ, log σ, ξ) with restarts and
/// Hessian-based standard errors. Throws NonConvergence (also for constant data).
GevFit fit_gev(std::span<const double> samples);

/// Site-level fit for observed minima: fits the negated values.
GevFit fit_gev_site(std::span<const double> minima);

}  // namespace brmax
