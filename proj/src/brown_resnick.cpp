#include "brmax/brown_resnick.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "brmax/errors.hpp"
#include "brmax/mvn.hpp"
#include "brmax/rng.hpp"

namespace brmax {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

BrModel::BrModel(StableVariogram variogram, SiteSet sites, std::optional<Point> anchor,
                 int mvn_samples)
    : variogram_(variogram),
      sites_(std::move(sites)),
      anchor_(anchor.value_or(default_anchor(sites_))),
      mvn_samples_(mvn_samples) {
  if (sites_.size() == 0) throw ValidationError("BrModel: no sites");
  if (mvn_samples_ < 1) throw ValidationError("BrModel: MVN budget must be positive");
  gamma_ = semivariogram_matrix(sites_, variogram_);
  sigma_ = build_covariance(sites_, variogram_, anchor_);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd bumped = sigma_;
    bumped.diagonal().array() += 1e-10 * sigma_.diagonal().mean();
    llt.compute(bumped);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("BrModel: anchored covariance is not positive definite");
    sigma_ = bumped;
  }
}

McValue exponent_v(std::span<const double> z, const BrModel& m, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  if (static_cast<Eigen::Index>(z.size()) != d) throw ValidationError("exponent_v: size mismatch");
  for (double v : z)
    if (!(v > 0.0)) throw ValidationError("exponent_v: z must be positive");
  const auto& g = m.gamma();
  McValue out;
  double var = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double zj = z[static_cast<std::size_t>(j)];
    if (zj == kInf) continue;
    if (d == 1) {
      out.value += 1.0 / zj;
      continue;
    }
    Eigen::VectorXd upper(d - 1), mean(d - 1);
    Eigen::MatrixXd cov(d - 1, d - 1);
    for (Eigen::Index a = 0, ia = 0; a < d; ++a) {
      if (a == j) continue;
      const double za = z[static_cast<std::size_t>(a)];
      upper(ia) = za == kInf ? kInf : std::log(za / zj);
      mean(ia) = -g(a, j);
      for (Eigen::Index b = 0, ib = 0; b < d; ++b) {
        if (b == j) continue;
        cov(ia, ib) = g(a, j) + g(b, j) - g(a, b);
        ++ib;
      }
      ++ia;
    }
    const auto est = mvn_cdf(upper, mean, cov, m.mvn_samples(),
                             derive_seed(seed, {seed_tag::kExponent, static_cast<std::uint64_t>(j)}));
    out.value += est.value / zj;
    var += (est.std_error / zj) * (est.std_error / zj);
  }
  out.std_error = std::sqrt(var);
  return out;
}

std::uint64_t block_seed(std::uint64_t seed, std::span<const int> block) {
  std::uint64_t mask = 0;
  for (int b : block) mask |= (1ULL << (static_cast<unsigned>(b) & 63U));
  return derive_seed(seed, {seed_tag::kBlock, mask});
}

McLogValue log_neg_partial_v(std::span<const double> z, std::span<const int> block,
                             const BrModel& m, std::uint64_t seed) {
  if (block.empty()) throw EmptyBlock("log_neg_partial_v: empty block");
  const auto dim = static_cast<Eigen::Index>(m.dim());
  if (static_cast<Eigen::Index>(z.size()) != dim)
    throw ValidationError("log_neg_partial_v: size mismatch");
  const auto d = static_cast<Eigen::Index>(block.size());

  std::vector<char> in_block(static_cast<std::size_t>(dim), 0);
  for (int b : block) {
    if (b < 0 || b >= dim || in_block[static_cast<std::size_t>(b)])
      throw ValidationError("log_neg_partial_v: invalid block index");
    in_block[static_cast<std::size_t>(b)] = 1;
  }
  std::vector<Eigen::Index> rest;
  for (Eigen::Index j = 0; j < dim; ++j)
    if (!in_block[static_cast<std::size_t>(j)]) rest.push_back(j);

  // Work relative to the first block site r: Y_i = log(W_i/W_r) under the
  // measure tilted by W_r is Gaussian with mean −γ_ir and covariance
  // Λ_ik = γ_ir + γ_kr − γ_ik, independently of the anchor.
  const auto& g = m.gamma();
  const auto ref = static_cast<Eigen::Index>(block[0]);
  const double log_zr = std::log(z[static_cast<std::size_t>(ref)]);
  if (!(z[static_cast<std::size_t>(ref)] > 0.0) || !std::isfinite(log_zr))
    throw ValidationError("log_neg_partial_v: block coordinates must be finite and positive");
  auto lambda = [&](Eigen::Index i, Eigen::Index k) { return g(i, ref) + g(k, ref) - g(i, k); };

  const Eigen::Index e = d - 1;  // block sites other than r
  Eigen::MatrixXd lbb(e, e);
  Eigen::VectorXd dev(e);
  double log_prod_z = 2.0 * log_zr;
  for (Eigen::Index a = 0; a < e; ++a) {
    const auto ia = static_cast<Eigen::Index>(block[static_cast<std::size_t>(a + 1)]);
    const double zv = z[static_cast<std::size_t>(ia)];
    if (!(zv > 0.0) || !std::isfinite(zv))
      throw ValidationError("log_neg_partial_v: block coordinates must be finite and positive");
    const double lz = std::log(zv);
    log_prod_z += lz;
    dev(a) = lz - log_zr + g(ia, ref);
    for (Eigen::Index b = 0; b < e; ++b) lbb(a, b) = lambda(ia, block[static_cast<std::size_t>(b + 1)]);
  }

  McLogValue out;
  out.log_value = -log_prod_z;
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (e > 0) {
    llt.compute(lbb);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("log_neg_partial_v: block increments");
    const Eigen::MatrixXd lower = llt.matrixL();
    const double log_det = 2.0 * lower.diagonal().array().log().sum();
    out.log_value += -0.5 * dev.dot(llt.solve(dev)) - 0.5 * static_cast<double>(e) * kLog2Pi - 0.5 * log_det;
  }
  if (rest.empty()) return out;

  // Remaining sites: conditional Gaussian of their increments given the block's.
  const auto r = static_cast<Eigen::Index>(rest.size());
  Eigen::MatrixXd lrr(r, r), lrb(r, e);
  Eigen::VectorXd mean(r), upper(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto ii = rest[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < r; ++k) lrr(i, k) = lambda(ii, rest[static_cast<std::size_t>(k)]);
    for (Eigen::Index b = 0; b < e; ++b) lrb(i, b) = lambda(ii, block[static_cast<std::size_t>(b + 1)]);
    mean(i) = -g(ii, ref);
    const double zv = z[static_cast<std::size_t>(ii)];
    upper(i) = zv == kInf ? kInf : std::log(zv) - log_zr;
  }
  Eigen::MatrixXd cov = lrr;
  if (e > 0) {
    mean += lrb * llt.solve(dev);
    cov -= lrb * llt.solve(lrb.transpose());
  }
  const auto est = mvn_cdf(upper, mean, cov, m.mvn_samples(), block_seed(seed, block));
  out.log_value += est.value > 0.0 ? std::log(est.value) : -kInf;
  out.rel_error = est.value > 0.0 ? est.std_error / est.value : 0.0;
  return out;
}

McLogValue log_st_joint_density(std::span<const double> z, const SetPartition& pi,
                                const BrModel& m, std::uint64_t seed) {
  const int dim = static_cast<int>(m.dim());
  const auto& ground = pi.ground();
  bool ok = static_cast<int>(ground.size()) == dim;
  for (int i = 0; ok && i < dim; ++i) ok = ground[static_cast<std::size_t>(i)] == i;
  if (!ok) throw PartitionMismatch("st_joint_density: partition ground set differs from sites");

  const auto v = exponent_v(z, m, seed);
  McLogValue out;
  out.log_value = -v.value;
  double rel_var = v.std_error * v.std_error;  // error in −V enters log scale additively
  for (const auto& block : pi.blocks()) {
    const auto term = log_neg_partial_v(z, block, m, seed);
    out.log_value += term.log_value;
    rel_var += term.rel_error * term.rel_error;
  }
  out.rel_error = std::sqrt(rel_var);
  return out;
}

double log_full_density_enum(std::span<const double> z, const BrModel& m, std::uint64_t seed) {
  if (m.dim() > 10) throw DimensionTooLarge("full_density_enum: more than 10 sites");
  std::vector<int> ground(m.dim());
  for (std::size_t i = 0; i < ground.size(); ++i) ground[i] = static_cast<int>(i);
  const double neg_v = -exponent_v(z, m, seed).value;
  std::vector<double> terms;
  for (const auto& pi : enumerate_partitions(ground)) {
    double t = neg_v;
    for (const auto& block : pi.blocks()) t += log_neg_partial_v(z, block, m, seed).log_value;
    terms.push_back(t);
  }
  return log_sum_exp(terms);
}

double extremal_coefficient(const StableVariogram& v, double h) {
  if (h < 0.0) throw ValidationError("extremal_coefficient: negative distance");
  if (h == std::numeric_limits<double>::infinity()) return 2.0;
  return 2.0 * normal_cdf(std::sqrt(2.0 * v.at_distance(h)) / 2.0);
}

}  // namespace brmax
