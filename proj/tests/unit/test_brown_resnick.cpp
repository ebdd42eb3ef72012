#include <cmath>
#include <random>

#include "brmax/brown_resnick.hpp"
#include "brmax/errors.hpp"
#include "doctest.h"

using namespace brmax;

namespace {

// Bivariate Hüsler–Reiss exponent with a² = 2γ(h).
double husler_reiss_v(double z1, double z2, double a) {
  return normal_cdf(a / 2 + std::log(z2 / z1) / a) / z1 + normal_cdf(a / 2 + std::log(z1 / z2) / a) / z2;
}

// ∂/∂z1 of −V for the bivariate closed form, by symbolic differentiation.
double husler_reiss_neg_v1(double z1, double z2, double a) {
  const double w1 = a / 2 + std::log(z2 / z1) / a;
  const double w2 = a / 2 + std::log(z1 / z2) / a;
  return normal_cdf(w1) / (z1 * z1) + normal_pdf(w1) / (a * z1 * z1) - normal_pdf(w2) / (a * z1 * z2);
}

// Mixed partial ∂^D/∂z_1…∂z_D of exp(−V) by central differences with relative steps.
double mixed_fd_density(const std::vector<double>& z, const BrModel& m, std::uint64_t seed, double rel_step) {
  const std::size_t d = z.size();
  double acc = 0.0;
  double denom = 1.0;
  for (std::size_t i = 0; i < d; ++i) denom *= 2.0 * rel_step * z[i];
  for (unsigned mask = 0; mask < (1U << d); ++mask) {
    std::vector<double> zz = z;
    int sign = 1;
    for (std::size_t i = 0; i < d; ++i) {
      if (mask & (1U << i)) {
        zz[i] *= 1.0 - rel_step;
        sign = -sign;
      } else {
        zz[i] *= 1.0 + rel_step;
      }
    }
    acc += sign * std::exp(-exponent_v(zz, m, seed).value);
  }
  return acc / denom;
}

SiteSet random_sites(int n, std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
  return SiteSet(pts);
}

}  // namespace

TEST_CASE("exponent function basics") {
  const StableVariogram v(300.0, 1.0);
  const BrModel one(v, SiteSet({{10.0, 10.0}}));
  const std::vector<double> z1{2.0};
  CHECK(exponent_v(z1, one, 1).value == doctest::Approx(0.5));

  // 2γ(h) = 1.178 gives V(1,1) = 2Φ(√1.178 / 2).
  const double h = 300.0 * 0.589;
  const BrModel two(v, SiteSet({{0.0, 0.0}, {h, 0.0}}));
  const std::vector<double> ones{1.0, 1.0};
  CHECK(exponent_v(ones, two, 1).value == doctest::Approx(1.413).epsilon(1e-3));
  CHECK(exponent_v(ones, two, 1).value == doctest::Approx(extremal_coefficient(v, h)));
}

TEST_CASE("bivariate Hüsler–Reiss closed form") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double lambda = 50.0 + 950.0 * u(rng);
    const double kappa = 0.2 + 1.8 * u(rng);
    const double h = 1.0 + 800.0 * u(rng);
    const std::vector<double> z{0.2 + 5 * u(rng), 0.2 + 5 * u(rng)};
    const StableVariogram v(lambda, kappa);
    const BrModel m(v, SiteSet({{0.0, 0.0}, {h * 0.6, h * 0.8}}));
    const double a = std::sqrt(2.0 * v.at_distance(h));
    const auto est = exponent_v(z, m, rep);
    CHECK(std::abs(est.value - husler_reiss_v(z[0], z[1], a)) <= 3 * est.std_error + 1e-12);
    const std::vector<int> b0{0};
    const auto d1 = log_neg_partial_v(z, b0, m, rep);
    CHECK(std::exp(d1.log_value) == doctest::Approx(husler_reiss_neg_v1(z[0], z[1], a)).epsilon(1e-9));
  }
}

TEST_CASE("partial derivative edge cases") {
  const StableVariogram v(1.0, 1.0);
  const BrModel one(v, SiteSet({{0.0, 0.0}}));
  const std::vector<double> z{1.7};
  const std::vector<int> all{0};
  CHECK(std::exp(log_neg_partial_v(z, all, one, 3).log_value) == doctest::Approx(1.0 / (1.7 * 1.7)));
  CHECK_THROWS_AS(log_neg_partial_v(z, std::vector<int>{}, one, 3), EmptyBlock);

  std::mt19937_64 rng(5);
  const BrModel m(v, random_sites(5, rng, 2.0), std::nullopt, 2000);
  const std::vector<double> z5{0.5, 1.0, 2.0, 3.0, 0.8};
  for (const auto& blk : {std::vector<int>{0}, {1, 3}, {0, 2, 4}, {0, 1, 2, 3, 4}}) {
    const auto t = log_neg_partial_v(z5, blk, m, 7);
    CHECK(std::isfinite(t.log_value));  // −V_block > 0
  }
}

TEST_CASE("partition density small cases") {
  const StableVariogram v(1.0, 1.0);
  const BrModel one(v, SiteSet({{0.0, 0.0}}));
  const std::vector<double> z{1.3};
  const auto pi = SetPartition::singletons({0});
  CHECK(std::exp(log_st_joint_density(z, pi, one, 1).log_value) ==
        doctest::Approx(std::exp(-1.0 / 1.3) / (1.3 * 1.3)));
  CHECK(std::exp(log_full_density_enum(z, one, 1)) == doctest::Approx(std::exp(-1.0 / 1.3) / (1.3 * 1.3)));

  // Independence limit 2γ(h) = 50.
  const double h = 25.0;
  const BrModel far(v, SiteSet({{0.0, 0.0}, {h, 0.0}}));
  const std::vector<double> z2{0.9, 2.5};
  const double fre = -1.0 / 0.9 - 2.0 * std::log(0.9) - 1.0 / 2.5 - 2.0 * std::log(2.5);
  CHECK(log_st_joint_density(z2, SetPartition::singletons({0, 1}), far, 1).log_value ==
        doctest::Approx(fre).epsilon(1e-3));
  CHECK_THROWS_AS(log_st_joint_density(z2, SetPartition::singletons({0, 1, 2}), far, 1), PartitionMismatch);

  std::vector<double> big(11, 1.0);
  std::vector<Point> pts;
  for (int i = 0; i < 11; ++i) pts.push_back({static_cast<double>(i), 0.0});
  CHECK_THROWS_AS(log_full_density_enum(big, BrModel(v, SiteSet(pts)), 1), DimensionTooLarge);
}

TEST_CASE("partition sum equals finite-difference full density") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int d : {2, 3}) {
    for (int rep = 0; rep < 2; ++rep) {
      CAPTURE(d);
      CAPTURE(rep);
      const StableVariogram v(1.0 + u(rng), 0.5 + 1.2 * u(rng));
      const BrModel m(v, random_sites(d, rng, 2.0), std::nullopt, 100000);
      std::vector<double> z;
      for (int i = 0; i < d; ++i) z.push_back(0.5 + 2.0 * u(rng));
      const double exact = std::exp(log_full_density_enum(z, m, 99));
      const double fd = mixed_fd_density(z, m, 99, 1e-2);
      const double tol = d == 2 ? 1e-3 : 1e-2;
      CHECK(std::abs(exact - fd) / exact < tol);
      // Each partition term is nonnegative.
      std::vector<int> ground(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) ground[static_cast<std::size_t>(i)] = i;
      for (const auto& pi : enumerate_partitions(ground))
        CHECK(std::exp(log_st_joint_density(z, pi, m, 99).log_value) >= 0.0);
    }
  }
}

TEST_CASE("homogeneity, margins, anchor invariance, extremal coefficient range") {
  std::mt19937_64 rng(8);
  const StableVariogram v(2.0, 1.2);
  const auto sites = random_sites(5, rng, 3.0);
  const BrModel m(v, sites);
  const std::vector<double> z{0.7, 1.1, 2.3, 0.4, 1.9};
  const double base = exponent_v(z, m, 12).value;
  for (double t : {0.1, 1.0, 10.0}) {
    std::vector<double> tz;
    for (double x : z) tz.push_back(t * x);
    CHECK(exponent_v(tz, m, 12).value * t == doctest::Approx(base).epsilon(1e-10));
  }
  for (std::size_t j = 0; j < z.size(); ++j) {
    std::vector<double> zi(z.size(), 1e12);
    zi[j] = z[j];
    CHECK(std::abs(exponent_v(zi, m, 3).value - 1.0 / z[j]) < 1e-8);
  }
  const BrModel shifted(v, sites, Point{-20.0, 40.0});
  const auto e1 = exponent_v(z, m, 5);
  const auto e2 = exponent_v(z, shifted, 6);
  CHECK(std::abs(e1.value - e2.value) <= 3 * std::hypot(e1.std_error, e2.std_error) + 1e-12);
  for (const auto& blk : {std::vector<int>{0, 2}, {1}, {3, 4, 0}}) {
    const auto a = log_neg_partial_v(z, blk, m, 5);
    const auto b = log_neg_partial_v(z, blk, shifted, 5);
    CHECK(a.log_value == doctest::Approx(b.log_value).epsilon(1e-8));
  }
  for (int d : {2, 4, 6}) {
    const BrModel md(v, random_sites(d, rng, 4.0));
    const double theta = exponent_v(std::vector<double>(static_cast<std::size_t>(d), 1.0), md, 1).value;
    CHECK(theta >= 1.0 - 1e-9);
    CHECK(theta <= d + 1e-9);
  }
}

TEST_CASE("extremal coefficient") {
  const StableVariogram v(1086.0, 0.53);
  CHECK(extremal_coefficient(v, 0.0) == 1.0);
  CHECK(extremal_coefficient(v, 1e12) == doctest::Approx(2.0));
  CHECK(extremal_coefficient(v, 400.0) == doctest::Approx(1.41).epsilon(0.01 / 1.41));
}

// A fourth-order finite difference drowns in Monte Carlo noise, so at D = 4
// differentiate the three-coordinate partition sum once more in z_4.
TEST_CASE("partition sum at D = 4 via one-step differentiation") {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 2; ++rep) {
    const StableVariogram v(1.0 + u(rng), 0.5 + 1.2 * u(rng));
    const BrModel m(v, random_sites(4, rng, 2.0), std::nullopt, 100000);
    std::vector<double> z;
    for (int i = 0; i < 4; ++i) z.push_back(0.5 + 2.0 * u(rng));
    const auto first3 = enumerate_partitions({0, 1, 2});
    auto g = [&](double z4) {
      std::vector<double> zz = z;
      zz[3] = z4;
      double acc = 0.0;
      for (const auto& pi : first3) {
        double t = -exponent_v(zz, m, 99).value;
        for (const auto& b : pi.blocks()) t += log_neg_partial_v(zz, b, m, 99).log_value;
        acc += std::exp(t);
      }
      return acc;
    };
    const double h = 1e-3 * z[3];
    const double fd = (g(z[3] + h) - g(z[3] - h)) / (2 * h);
    const double exact = std::exp(log_full_density_enum(z, m, 99));
    CHECK(std::abs(fd - exact) / exact < 1e-2);
  }
}

TEST_CASE("density terms stay accurate when a site sits at the anchor") {
  const StableVariogram v(300.0, 1.0);
  const BrModel one(v, SiteSet({{10.0, 20.0}}));
  const std::vector<double> z1{2.7};
  CHECK(std::abs(log_neg_partial_v(z1, std::vector<int>{0}, one, 1).log_value + 2.0 * std::log(2.7)) < 1e-14);

  // Middle site at the centroid, i.e. next to the default anchor.
  const SiteSet line({{-100, 0}, {0, 0}, {100, 0}});
  const BrModel near(v, line), far(v, line, Point{700, -400});
  const std::vector<double> z{1.3, 0.6, 2.2};
  for (const auto& blk : {std::vector<int>{1}, {0, 1}, {1, 2}, {0, 1, 2}}) {
    CHECK(std::abs(log_neg_partial_v(z, blk, near, 4).log_value - log_neg_partial_v(z, blk, far, 4).log_value) <
          1e-12);
  }
}
