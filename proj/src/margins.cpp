#include "brmax/margins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "brmax/errors.hpp"

namespace brmax {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool gumbel(double xi) { return std::abs(xi) < kGumbelThreshold; }

// log of the bracket 1 + ξ(x−μ)/σ, or NaN-free −∞ outside the support.
double log_bracket(const GevParams& p, double x) {
  const double s = p.xi * (x - p.mu) / p.sigma;
  if (s <= -1.0) return -kInf;
  return std::log1p(s);
}

void check_scale(const GevParams& p) {
  if (!(p.sigma > 0.0)) throw ValidationError("GEV scale must be positive");
}

}  // namespace

double gev_cdf(const GevParams& p, double x) {
  check_scale(p);
  if (gumbel(p.xi)) return std::exp(-std::exp(-(x - p.mu) / p.sigma));
  const double lb = log_bracket(p, x);
  if (lb == -kInf) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-lb / p.xi));
}

double gev_logpdf(const GevParams& p, double x) {
  check_scale(p);
  if (gumbel(p.xi)) {
    const double s = (x - p.mu) / p.sigma;
    return -std::log(p.sigma) - s - std::exp(-s);
  }
  const double lb = log_bracket(p, x);
  if (lb == -kInf) return -kInf;
  return -std::log(p.sigma) - (1.0 / p.xi + 1.0) * lb - std::exp(-lb / p.xi);
}

double gev_pdf(const GevParams& p, double x) { return std::exp(gev_logpdf(p, x)); }

double gev_quantile(const GevParams& p, double prob) {
  check_scale(p);
  if (!(prob > 0.0 && prob < 1.0)) throw ValidationError("gev_quantile: probability must lie in (0,1)");
  const double l = -std::log(prob);
  if (gumbel(p.xi)) return p.mu - p.sigma * std::log(l);
  return p.mu + p.sigma * std::expm1(-p.xi * std::log(l)) / p.xi;
}

double gev_eval(const GevParams& p, double y, GevKind kind) {
  switch (kind) {
    case GevKind::Cdf:
      return gev_cdf(p, y);
    case GevKind::Pdf:
      return gev_pdf(p, y);
    case GevKind::Quantile:
      return gev_quantile(p, y);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double gev_sample(const GevParams& p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double v = u(rng);
  while (v <= 0.0) v = u(rng);
  return gev_quantile(p, v);
}

double gev_mean(const GevParams& p) {
  if (p.xi >= 1.0) throw ShapeTooLarge("GEV mean is infinite for shape >= 1");
  if (gumbel(p.xi)) return p.mu + p.sigma * std::numbers::egamma;
  return p.mu + p.sigma * (std::tgamma(1.0 - p.xi) - 1.0) / p.xi;
}

std::pair<double, double> gev_support(const GevParams& p) {
  if (gumbel(p.xi)) return {-kInf, kInf};
  const double end = p.mu - p.sigma / p.xi;
  return p.xi > 0.0 ? std::pair{end, kInf} : std::pair{-kInf, end};
}

void GevField::validate() const {
  if (!(sigma > 0.0)) throw ValidationError("GevField: sigma must be positive");
  if (!(tau2 > 0.0)) throw ValidationError("GevField: tau2 must be positive");
  if (!(delta > 0.0)) throw ValidationError("GevField: delta must be positive");
  if (x.rows() != u.size() || x.cols() != beta.size())
    throw ValidationError("GevField: covariate matrix shape does not match U and beta");
}

double FrechetPair::dz() const { return std::exp(log_dz); }

std::optional<FrechetPair> frechet_transform(const GevParams& p, double x) {
  FrechetPair out;
  if (gumbel(p.xi)) {
    out.log_z = (x - p.mu) / p.sigma;
    out.log_dz = out.log_z - std::log(p.sigma);
  } else {
    const double lb = log_bracket(p, x);
    if (lb == -kInf) return std::nullopt;
    out.log_z = lb / p.xi;
    out.log_dz = -std::log(p.sigma) + (1.0 / p.xi - 1.0) * lb;
  }
  out.z = std::exp(out.log_z);
  if (!(out.z > 0.0) || !std::isfinite(out.z)) return std::nullopt;
  return out;
}

std::optional<FrechetPair> frechet_pair(const GevField& field, std::size_t site, double t, double y) {
  return frechet_transform(field.at_site(site, t), -y);
}

double gev_mean_forecast(const GevField& field, double mu0, double t) {
  return -gev_mean({mu0 + field.alpha * t, field.sigma, field.xi});
}

double gev_mean_forecast(const GevField& field, std::size_t site, double t) {
  return gev_mean_forecast(field, field.u(static_cast<Eigen::Index>(site)), t);
}

double exceedance_prob(const GevField& field, double mu0, double t, double threshold) {
  return gev_cdf({mu0 + field.alpha * t, field.sigma, field.xi}, -threshold);
}

namespace {

struct FitData {
  std::span<const double> x;
};

double neg_loglik(const gsl_vector* v, void* params) {
  const auto* data = static_cast<const FitData*>(params);
  const GevParams p{gsl_vector_get(v, 0), std::exp(gsl_vector_get(v, 1)), gsl_vector_get(v, 2)};
  double s = 0.0;
  for (double x : data->x) {
    const double l = gev_logpdf(p, x);
    if (!std::isfinite(l)) return 1e300;
    s -= l;
  }
  return s;
}

std::array<double, 3> minimize(const FitData& data, std::array<double, 3> start, double step, double* value) {
  gsl_multimin_function fn{&neg_loglik, 3, const_cast<FitData*>(&data)};
  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* ss = gsl_vector_alloc(3);
  for (std::size_t i = 0; i < 3; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(ss, i, step);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  int status = GSL_CONTINUE;
  for (int iter = 0; iter < 5000 && status == GSL_CONTINUE; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s)) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10);
  }
  std::array<double, 3> out{gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1), gsl_vector_get(s->x, 2)};
  *value = s->fval;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return out;
}

}  // namespace

GevFit fit_gev(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 3) throw NonConvergence("fit_gev: need at least 3 values");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (!(var > 0.0)) throw NonConvergence("fit_gev: degenerate (constant) sample");

  // Work on centred, scaled data so that shifts of the input shift μ̂ exactly.
  const double scale = std::sqrt(var);
  std::vector<double> centred(samples.begin(), samples.end());
  for (auto& v : centred) v = (v - mean) / scale;
  const FitData data{centred};

  gsl_set_error_handler_off();
  const double s0 = std::sqrt(6.0) / std::numbers::pi;
  // Restart schedule: several shapes, then polish from the incumbent.
  std::array<double, 3> best{};
  double best_val = std::numeric_limits<double>::infinity();
  for (double xi0 : {0.0, -0.2, 0.2}) {
    double val = 0.0;
    auto cand = minimize(data, {-std::numbers::egamma * s0, std::log(s0), xi0}, 0.2, &val);
    if (val < best_val) {
      best_val = val;
      best = cand;
    }
  }
  for (int r = 0; r < 3; ++r) {
    double val = 0.0;
    auto cand = minimize(data, best, 0.05, &val);
    if (val <= best_val) {
      best_val = val;
      best = cand;
    }
  }
  if (!(best_val < 1e299)) throw NonConvergence("fit_gev: optimizer did not find a feasible optimum");

  auto f = [&](std::array<double, 3> v) {
    gsl_vector* g = gsl_vector_alloc(3);
    for (std::size_t i = 0; i < 3; ++i) gsl_vector_set(g, i, v[i]);
    const double r = neg_loglik(g, const_cast<FitData*>(&data));
    gsl_vector_free(g);
    return r;
  };
  auto shifted = [&](std::array<double, 3> v, int i, double di, int j, double dj) {
    v[static_cast<std::size_t>(i)] += di;
    v[static_cast<std::size_t>(j)] += dj;
    return f(v);
  };
  // Central-difference gradient and Hessian of the negative log-likelihood.
  auto derivatives = [&](const std::array<double, 3>& v, Eigen::Vector3d& grad, Eigen::Matrix3d& hess) {
    const double h = 1e-4;
    for (int i = 0; i < 3; ++i) {
      grad(i) = (shifted(v, i, h, i, 0.0) - shifted(v, i, -h, i, 0.0)) / (2 * h);
      for (int j = i; j < 3; ++j) {
        const double val = (shifted(v, i, h, j, h) - shifted(v, i, h, j, -h) - shifted(v, i, -h, j, h) +
                            shifted(v, i, -h, j, -h)) / (4 * h * h);
        hess(i, j) = hess(j, i) = val;
      }
    }
  };
  Eigen::Vector3d grad;
  Eigen::Matrix3d hess;
  // Newton polish: the simplex stops at a tolerance-sized neighbourhood.
  for (int it = 0; it < 8; ++it) {
    derivatives(best, grad, hess);
    Eigen::LLT<Eigen::Matrix3d> step_llt(hess);
    if (step_llt.info() != Eigen::Success) break;
    const Eigen::Vector3d step = step_llt.solve(grad);
    std::array<double, 3> cand{best[0] - step(0), best[1] - step(1), best[2] - step(2)};
    const double val = f(cand);
    if (!(val <= best_val + 1e-9)) break;
    best = cand;
    best_val = std::min(val, best_val);
    if (step.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  derivatives(best, grad, hess);
  Eigen::LLT<Eigen::Matrix3d> llt(hess);
  if (llt.info() != Eigen::Success) throw NonConvergence("fit_gev: Hessian not positive definite");
  const Eigen::Matrix3d cov = llt.solve(Eigen::Matrix3d::Identity());

  GevFit out;
  const double sigma_c = std::exp(best[1]);
  out.params = {mean + scale * best[0], scale * sigma_c, best[2]};
  out.std_errors = {scale * std::sqrt(cov(0, 0)), scale * sigma_c * std::sqrt(cov(1, 1)), std::sqrt(cov(2, 2))};
  out.neg_loglik = best_val + static_cast<double>(n) * std::log(scale);
  out.small_sample = n < 20;
  return out;
}

GevFit fit_gev_site(std::span<const double> minima) {
  std::vector<double> negated(minima.begin(), minima.end());
  for (auto& v : negated) v = -v;
  return fit_gev(negated);
}

}  // namespace brmax
