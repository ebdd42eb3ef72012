#include "brmax/gaussian.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "brmax/errors.hpp"
#include "brmax/rng.hpp"

namespace brmax {

double norm(Point p) { return std::hypot(p.x, p.y); }
double distance(Point a, Point b) { return norm(a - b); }

SiteSet::SiteSet(std::vector<Point> coords, std::vector<std::string> ids)
    : coords_(std::move(coords)), ids_(std::move(ids)) {
  if (coords_.size() != ids_.size()) throw ValidationError("SiteSet: coordinate/id count mismatch");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!std::isfinite(coords_[i].x) || !std::isfinite(coords_[i].y))
      throw ValidationError("SiteSet: non-finite coordinate for site " + ids_[i]);
    if (!seen.insert(ids_[i]).second) throw ValidationError("SiteSet: duplicate id " + ids_[i]);
  }
}

SiteSet::SiteSet(std::vector<Point> coords) : coords_(std::move(coords)) {
  ids_.reserve(coords_.size());
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!std::isfinite(coords_[i].x) || !std::isfinite(coords_[i].y))
      throw ValidationError("SiteSet: non-finite coordinate");
    ids_.push_back(std::to_string(i + 1));
  }
}

SiteSet SiteSet::subset(std::span<const int> idx) const {
  SiteSet out;
  out.coords_.reserve(idx.size());
  out.ids_.reserve(idx.size());
  for (int i : idx) {
    out.coords_.push_back(coords_.at(static_cast<std::size_t>(i)));
    out.ids_.push_back(ids_.at(static_cast<std::size_t>(i)));
  }
  return out;
}

Point SiteSet::centroid() const {
  Point c;
  if (coords_.empty()) return c;
  for (const auto& p : coords_) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(coords_.size());
  c.y /= static_cast<double>(coords_.size());
  return c;
}

StableVariogram::StableVariogram(double range_km, double smoothness)
    : range_(range_km), smoothness_(smoothness) {
  if (!(range_km > 0.0) || !std::isfinite(range_km))
    throw ValidationError("StableVariogram: range must be > 0");
  if (!(smoothness > 0.0 && smoothness <= 2.0))
    throw ValidationError("StableVariogram: smoothness must lie in (0, 2]");
}

double StableVariogram::at_distance(double dist) const {
  if (dist <= 0.0) return 0.0;
  return std::pow(dist / range_, smoothness_);
}

Point default_anchor(const SiteSet& sites) {
  Point c = sites.centroid();
  return {c.x + 1e-6, c.y + 1e-6};
}

Eigen::MatrixXd build_covariance(const SiteSet& sites, const StableVariogram& v, Point anchor) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::VectorXd to_anchor(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = distance(sites[j], anchor);
    if (d <= 1e-12 * (1.0 + norm(anchor)))
      throw AnchorCoincident("build_covariance: anchor coincides with site " + sites.ids()[j]);
    to_anchor(j) = v.at_distance(d);
  }
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    cov(j, j) = 2.0 * to_anchor(j);
    for (Eigen::Index k = 0; k < j; ++k) {
      cov(j, k) = to_anchor(j) + to_anchor(k) - v(sites[j] - sites[k]);
      cov(k, j) = cov(j, k);
    }
  }
  return cov;
}

Eigen::MatrixXd semivariogram_matrix(const SiteSet& sites, const StableVariogram& v) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < j; ++k) g(j, k) = g(k, j) = v(sites[j] - sites[k]);
  return g;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double jitter = 1e-10 * cov.diagonal().mean();
  Eigen::MatrixXd bumped = cov;
  bumped.diagonal().array() += jitter;
  llt.compute(bumped);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("Cholesky factorization failed after jitter");
  return llt.matrixL();
}

Eigen::VectorXd sample_gp(const SiteSet& sites, const StableVariogram& v, Point anchor,
                          std::uint64_t seed) {
  const Eigen::MatrixXd chol = cholesky_lower(build_covariance(sites, v, anchor));
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd n(chol.rows());
  for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = gauss(rng);
  return chol.triangularView<Eigen::Lower>() * n;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_logcdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic tail: log φ(x) − log(−x) + log(1 − 1/x² + 3/x⁴).
  const double x2 = x * x;
  return -0.5 * x2 - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-x) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  // Wichura (1988) AS 241, PPND16; relative accuracy about 1e-16.
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

}  // namespace brmax
