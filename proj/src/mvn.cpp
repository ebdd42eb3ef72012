#include "brmax/mvn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "brmax/errors.hpp"
#include "brmax/gaussian.hpp"
#include "brmax/rng.hpp"

namespace brmax {
namespace {

constexpr std::array<int, 40> kPrimes = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,
                                         31,  37,  41,  43,  47,  53,  59,  61,  67,  71,
                                         73,  79,  83,  89,  97,  101, 103, 107, 109, 113,
                                         127, 131, 137, 139, 149, 151, 157, 163, 167, 173};

double lattice_generator(std::size_t dim) {
  const double r = std::sqrt(static_cast<double>(kPrimes.at(dim)));
  return r - std::floor(r);
}

// Cholesky factor with Genz–Bretz prioritization: at each step pick the
// remaining variable with the smallest conditional probability.
struct OrderedFactor {
  Eigen::MatrixXd chol;
  Eigen::VectorXd upper;
};

OrderedFactor prioritized_cholesky(Eigen::VectorXd b, Eigen::MatrixXd c) {
  const Eigen::Index p = b.size();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p);
  const double tiny = 1e-14 * std::max(1.0, c.diagonal().maxCoeff());
  for (Eigen::Index i = 0; i < p; ++i) {
    Eigen::Index best = i;
    double best_prob = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = i; j < p; ++j) {
      const double shift = l.row(j).head(i).dot(y.head(i));
      const double var = c(j, j) - l.row(j).head(i).squaredNorm();
      if (var <= tiny) continue;
      const double prob = normal_cdf((b(j) - shift) / std::sqrt(var));
      if (prob < best_prob) {
        best_prob = prob;
        best = j;
      }
    }
    if (best != i) {
      std::swap(b(i), b(best));
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      l.row(i).head(i).swap(l.row(best).head(i));
    }
    const double var = c(i, i) - l.row(i).head(i).squaredNorm();
    if (!(var > tiny)) throw NotPositiveDefinite("mvn_cdf: covariance not positive definite");
    const double lii = std::sqrt(var);
    l(i, i) = lii;
    for (Eigen::Index j = i + 1; j < p; ++j)
      l(j, i) = (c(j, i) - l.row(j).head(i).dot(l.row(i).head(i))) / lii;
    const double bt = (b(i) - l.row(i).head(i).dot(y.head(i))) / lii;
    const double pr = normal_cdf(bt);
    y(i) = pr > 1e-300 ? -normal_pdf(bt) / pr : bt;
  }
  return {std::move(l), std::move(b)};
}

}  // namespace

MvnEstimate mvn_cdf(const Eigen::VectorXd& upper, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov, int n_samples, std::uint64_t seed) {
  if (upper.size() != mean.size() || cov.rows() != upper.size() || cov.cols() != upper.size())
    throw ValidationError("mvn_cdf: dimension mismatch");
  MvnEstimate out;
  out.seed = seed;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < upper.size(); ++i) {
    if (std::isnan(upper(i))) throw ValidationError("mvn_cdf: NaN limit");
    if (upper(i) == -std::numeric_limits<double>::infinity()) return out;
    if (upper(i) != std::numeric_limits<double>::infinity()) keep.push_back(i);
  }
  const auto p = static_cast<Eigen::Index>(keep.size());
  if (p == 0) {
    out.value = 1.0;
    return out;
  }
  Eigen::VectorXd b(p);
  Eigen::MatrixXd c(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    b(i) = upper(keep[i]) - mean(keep[i]);
    for (Eigen::Index j = 0; j < p; ++j) c(i, j) = cov(keep[i], keep[j]);
  }
  if (p == 1) {
    if (!(c(0, 0) > 0.0)) throw NotPositiveDefinite("mvn_cdf: nonpositive variance");
    out.value = normal_cdf(b(0) / std::sqrt(c(0, 0)));
    out.n_samples = 1;
    return out;
  }

  const auto [l, bo] = prioritized_cholesky(std::move(b), std::move(c));
  const std::size_t dims = static_cast<std::size_t>(p - 1);
  if (dims > kPrimes.size()) throw DimensionTooLarge("mvn_cdf: dimension exceeds lattice table");

  std::vector<double> gen(dims);
  for (std::size_t k = 0; k < dims; ++k) gen[k] = lattice_generator(k);
  const int points = std::max(1, n_samples / (2 * kMvnShifts));

  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double e0 = normal_cdf(bo(0) / l(0, 0));
  std::vector<double> y(dims), w(dims), shift(dims);

  auto integrand = [&](const std::vector<double>& u) {
    double e = e0;
    double prod = e0;
    for (Eigen::Index i = 1; i < p; ++i) {
      const double arg = std::clamp(u[static_cast<std::size_t>(i - 1)] * e, 1e-300, 1.0 - 1e-16);
      y[static_cast<std::size_t>(i - 1)] = normal_quantile(arg);
      double s = 0.0;
      for (Eigen::Index k = 0; k < i; ++k) s += l(i, k) * y[static_cast<std::size_t>(k)];
      e = normal_cdf((bo(i) - s) / l(i, i));
      prod *= e;
      if (prod == 0.0) break;
    }
    return prod;
  };

  double sum = 0.0;
  double sum_sq = 0.0;
  for (int s = 0; s < kMvnShifts; ++s) {
    for (auto& v : shift) v = unif(rng);
    double acc = 0.0;
    for (int m = 1; m <= points; ++m) {
      for (std::size_t k = 0; k < dims; ++k) {
        double x = static_cast<double>(m) * gen[k] + shift[k];
        x -= std::floor(x);
        w[k] = x;
      }
      acc += integrand(w);
      for (auto& v : w) v = 1.0 - v;
      acc += integrand(w);
    }
    const double mean_s = acc / (2.0 * points);
    sum += mean_s;
    sum_sq += mean_s * mean_s;
  }
  const double mean_all = sum / kMvnShifts;
  const double var = std::max(0.0, (sum_sq - kMvnShifts * mean_all * mean_all) / (kMvnShifts - 1));
  out.value = std::clamp(mean_all, 0.0, 1.0);
  out.std_error = std::sqrt(var / kMvnShifts);
  out.n_samples = 2 * points * kMvnShifts;
  return out;
}

}  // namespace brmax
