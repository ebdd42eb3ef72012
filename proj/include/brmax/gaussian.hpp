#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace brmax {

struct Point {
  double x = 0.0;  // km
  double y = 0.0;  // km
};

inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
double norm(Point p);
double distance(Point a, Point b);

/// Projected station coordinates with unique labels.
class SiteSet {
 public:
  SiteSet() = default;
  SiteSet(std::vector<Point> coords, std::vector<std::string> ids);
  explicit SiteSet(std::vector<Point> coords);

  [[nodiscard]] std::size_t size() const { return coords_.size(); }
  [[nodiscard]] const Point& operator[](std::size_t i) const { return coords_[i]; }
  [[nodiscard]] const std::vector<Point>& coords() const { return coords_; }
  [[nodiscard]] const std::vector<std::string>& ids() const { return ids_; }

  /// Subset in the given order.
  [[nodiscard]] SiteSet subset(std::span<const int> idx) const;
  [[nodiscard]] Point centroid() const;

 private:
  std::vector<Point> coords_;
  std::vector<std::string> ids_;
};

/// Stable variogram 2γ(h) = 2(‖h‖/λ)^κ.
class StableVariogram {
 public:
  StableVariogram(double range_km, double smoothness);

  [[nodiscard]] double range() const { return range_; }
  [[nodiscard]] double smoothness() const { return smoothness_; }

  /// Semivariogram γ(h) = (‖h‖/λ)^κ.
  [[nodiscard]] double operator()(Point h) const { return at_distance(norm(h)); }
  [[nodiscard]] double at_distance(double dist) const;

 private:
  double range_;
  double smoothness_;
};

inline double semivariogram(Point h, const StableVariogram& v) { return v(h); }

/// Anchor used when none is given: centroid plus a 1e-6 km offset.
Point default_anchor(const SiteSet& sites);

/// Σ_{jk} = γ(s_j − a) + γ(s_k − a) − γ(s_j − s_k): covariance of the
/// intrinsically stationary process pinned to zero at the anchor.
Eigen::MatrixXd build_covariance(const SiteSet& sites, const StableVariogram& v, Point anchor);

/// Matrix of pairwise semivariogram values γ(s_j − s_k).
Eigen::MatrixXd semivariogram_matrix(const SiteSet& sites, const StableVariogram& v);

/// Lower Cholesky factor; on failure retries once with 1e-10·mean(diag)
/// added to the diagonal, then throws NotPositiveDefinite.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov);

/// One draw of ε ~ N(0, Σ) where Σ = build_covariance(sites, v, anchor).
Eigen::VectorXd sample_gp(const SiteSet& sites, const StableVariogram& v, Point anchor,
                          std::uint64_t seed);

// Scalar normal helpers.
double normal_cdf(double x);
double normal_logcdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

}  // namespace brmax
