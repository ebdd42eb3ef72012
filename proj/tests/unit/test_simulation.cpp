#include <algorithm>
#include <cmath>

#include "brmax/brown_resnick.hpp"
#include "brmax/errors.hpp"
#include "brmax/rng.hpp"
#include "brmax/simulation.hpp"
#include "doctest.h"

using namespace brmax;

namespace {

double ks_one_sample(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d = std::max({d, (i + 1) / n - u[i], u[i] - i / n});
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

constexpr double kKs1 = 1.628;  // 1% asymptotic Kolmogorov critical value

}  // namespace

TEST_CASE("single site is unit Fréchet") {
  const SiteSet one({{0, 0}});
  const BrSimulator sim(one, StableVariogram(100, 1));
  std::vector<double> u;
  for (int i = 0; i < 10000; ++i) u.push_back(std::exp(-1.0 / sim.draw(static_cast<std::uint64_t>(i)).z[0]));
  CHECK(ks_one_sample(u) < kKs1 / std::sqrt(10000.0));
}

TEST_CASE("five sites: margins and pairwise extremal coefficients") {
  const SiteSet sites({{0, 0}, {100, 0}, {300, 0}, {0, 600}, {50, 40}});
  const StableVariogram v(300, 1.0);
  const BrSimulator sim(sites, v);
  const int n = 10000;
  std::vector<std::vector<double>> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = sim.draw(derive_seed(11, {static_cast<std::uint64_t>(i)})).z;
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<double> u;
    for (const auto& d : z) u.push_back(std::exp(-1.0 / d[j]));
    CHECK(ks_one_sample(u) < kKs1 / std::sqrt(double(n)));
  }
  // 1/max(Z_a, Z_b) is exponential with rate θ.
  for (auto [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{0, 3}}) {
    double s = 0.0;
    for (const auto& d : z) s += 1.0 / std::max(d[static_cast<std::size_t>(a)], d[static_cast<std::size_t>(b)]);
    const double theta = n / s;
    const double h = distance(sites[static_cast<std::size_t>(a)], sites[static_cast<std::size_t>(b)]);
    CHECK(std::abs(theta - extremal_coefficient(v, h)) < 0.05);
  }
}

TEST_CASE("max-stability") {
  const SiteSet sites({{0, 0}, {100, 0}, {300, 0}, {0, 600}, {50, 40}});
  const BrSimulator sim(sites, StableVariogram(250, 1.3));
  const int reps = 1000;
  std::vector<double> max_single, max_pooled, min_single, min_pooled;
  std::uint64_t k = 0;
  for (int r = 0; r < reps; ++r) {
    auto one = sim.draw(derive_seed(5, {k++})).z;
    max_single.push_back(*std::max_element(one.begin(), one.end()));
    min_single.push_back(*std::min_element(one.begin(), one.end()));
    std::vector<double> m(5, 0.0);
    for (int i = 0; i < 10; ++i) {
      const auto d = sim.draw(derive_seed(5, {k++})).z;
      for (std::size_t j = 0; j < 5; ++j) m[j] = std::max(m[j], d[j] / 10.0);
    }
    max_pooled.push_back(*std::max_element(m.begin(), m.end()));
    min_pooled.push_back(*std::min_element(m.begin(), m.end()));
  }
  const double crit = kKs1 * std::sqrt(2.0 / reps);
  CHECK(ks_two_sample(max_single, max_pooled) < crit);
  CHECK(ks_two_sample(min_single, min_pooled) < crit);
}

TEST_CASE("degenerate variogram gives complete dependence") {
  const SiteSet sites({{0, 0}, {100, 0}, {300, 0}});
  const BrSimulator sim(sites, StableVariogram(1e18, 1.0));
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto d = sim.draw(s);
    CHECK(std::abs(d.z[1] / d.z[0] - 1.0) < 1e-6);
    CHECK(std::abs(d.z[2] / d.z[0] - 1.0) < 1e-6);
    CHECK(d.partition.num_blocks() == 1);
  }
}

TEST_CASE("coupling when sites are appended") {
  const std::vector<Point> base{{0, 0}, {100, 0}, {300, 20}, {10, 400}};
  std::vector<Point> more = base;
  more.push_back({200, 200});
  more.push_back({-50, 80});
  const StableVariogram v(200, 1.0);
  const Point anchor{1000, 1000};
  const BrSimulator small(SiteSet(base), v, anchor), big(SiteSet(more), v, anchor);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto a = small.draw(s).z, b = big.draw(s).z;
    for (std::size_t j = 0; j < base.size(); ++j) CHECK(std::abs(a[j] / b[j] - 1.0) < 1e-12);
  }
}

TEST_CASE("draw partitions record shared extremal functions") {
  const SiteSet sites({{0, 0}, {30, 0}, {60, 0}, {500, 500}});
  const BrSimulator sim(sites, StableVariogram(300, 1.0));
  int joined = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto d = sim.draw(s);
    CHECK(d.partition.ground_size() == 4);
    joined += d.partition.block_of(0) == d.partition.block_of(1);
  }
  CHECK(joined > 100);
}

TEST_CASE("temperature fields") {
  const SiteSet cells({{0, 0}, {50, 0}, {0, 50}, {80, 90}});
  GevField f;
  f.u = Eigen::VectorXd::Constant(4, 35.0);
  f.sigma = 3.5;
  f.xi = -0.1;
  f.alpha = -0.06;
  const auto flat = simulate_temperature_field(cells, f, StableVariogram(1e18, 1.0), 10.0, 3);
  for (double y : flat) CHECK(std::abs(y - flat[0]) < 1e-6);

  f.u << 35.0, 34.0, 36.0, 33.0;
  const StableVariogram v(100, 1.0);
  std::vector<std::vector<double>> pit(4);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto y = simulate_temperature_field(cells, f, v, 10.0, s);
    for (std::size_t j = 0; j < 4; ++j) pit[j].push_back(gev_cdf(f.at_site(j, 10.0), -y[j]));
  }
  for (auto& p : pit) CHECK(ks_one_sample(p) < kKs1 / std::sqrt(1000.0));
}

TEST_CASE("kriging") {
  const SiteSet st({{0, 0}, {100, 0}, {0, 150}});
  Eigen::MatrixXd xs(3, 2);
  xs << 1, 0.2, 1, -0.5, 1, 1.0;
  Eigen::VectorXd beta(2);
  beta << 1.0, 2.0;
  Eigen::VectorXd u(3);
  u << 1.9, -0.4, 2.7;
  const double tau2 = 1.5, delta = 120.0;

  const auto at_st = krige_random_effect(st, u, xs, beta, tau2, delta, st.coords(), xs);
  for (int j = 0; j < 3; ++j) CHECK(at_st(j) == doctest::Approx(u(j)).epsilon(1e-10));

  const std::vector<Point> tgt{{40, 40}, {300, 300}};
  Eigen::MatrixXd xt(2, 2);
  xt << 1, 0.0, 1, 0.7;
  const auto flat = krige_random_effect(st, u, xs, beta, 0.0, delta, tgt, xt);
  CHECK((flat - xt * beta).norm() < 1e-14);

  // Joint Gaussian of (targets, stations) and the textbook conditional mean.
  std::vector<Point> all = tgt;
  all.insert(all.end(), st.coords().begin(), st.coords().end());
  Eigen::MatrixXd c(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) c(i, j) = tau2 * std::exp(-distance(all[i], all[j]) / delta);
  const Eigen::VectorXd oracle =
      xt * beta + c.block(0, 2, 2, 3) * c.block(2, 2, 3, 3).inverse() * (u - xs * beta);
  const auto got = krige_random_effect(st, u, xs, beta, tau2, delta, tgt, xt);
  CHECK((got - oracle).norm() < 1e-10);

  LatentDraw d1{u, beta, tau2, delta}, d2{u * 0.5, beta, tau2, 60.0};
  const auto avg = krige_random_effect(st, {d1, d2}, xs, tgt, xt);
  const auto k2 = krige_random_effect(st, d2.u, xs, beta, tau2, 60.0, tgt, xt);
  CHECK((avg - 0.5 * (got + k2)).norm() < 1e-12);
}

TEST_CASE("grid over convex hull") {
  const SiteSet st({{0, 0}, {100, 0}, {0, 100}});
  const auto g = GridSpec::over_hull(st, 10.0);
  CHECK(g.cells.size() == 66);  // lattice points with x + y ≤ 100
  for (const auto& c : g.cells) CHECK(c.x + c.y <= 100.0 + 1e-9);
  CHECK_THROWS_AS(GridSpec::over_hull(st, 0.0), ValidationError);
}

TEST_CASE("group predictive statistics") {
  const SiteSet st({{0, 0}, {60, 0}, {0, 80}, {200, 200}});
  GevField f;
  f.u = Eigen::Vector4d(35, 34, 36, 33);
  f.sigma = 3.5;
  f.xi = -0.1;
  const StableVariogram v(150, 1.0);
  const auto mx = group_extreme_predictive({2}, st, f, v, 0.0, GroupStat::Max, 200, 9);
  const auto mn = group_extreme_predictive({2}, st, f, v, 0.0, GroupStat::Min, 200, 9);
  CHECK(mx == mn);
  std::vector<double> pit;
  for (double y : mx) pit.push_back(gev_cdf(f.at_site(2, 0.0), -y));
  CHECK(ks_one_sample(pit) < kKs1 / std::sqrt(200.0));

  GevField same = f;
  same.u = Eigen::Vector4d::Constant(35);
  const StableVariogram full(1e18, 1.0);
  const auto a = group_extreme_predictive({0, 1, 3}, st, same, full, 0.0, GroupStat::Max, 50, 1);
  const auto b = group_extreme_predictive({0, 1, 3}, st, same, full, 0.0, GroupStat::Min, 50, 1);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));

  // Central 95% predictive intervals of the group maximum cover fresh truths.
  const std::vector<int> group{0, 1, 2};
  auto pred = group_extreme_predictive(group, st, f, v, 0.0, GroupStat::Max, 2000, 77);
  std::sort(pred.begin(), pred.end());
  const double lo = pred[50], hi = pred[1949];
  int covered = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    const auto truth = group_extreme_predictive(group, st, f, v, 0.0, GroupStat::Max, 1, derive_seed(1234, {r}));
    covered += truth[0] >= lo && truth[0] <= hi;
  }
  CHECK(covered >= 43);  // P(Bin(50, 0.95) < 43) ≈ 0.012
}

TEST_CASE("simulated datasets") {
  const SiteSet st({{0, 0}, {60, 0}, {0, 80}, {200, 200}, {120, 40}});
  GevField f;
  f.x = Eigen::MatrixXd::Ones(5, 1);
  f.beta = Eigen::VectorXd::Constant(1, 35.0);
  f.u = sample_random_effect(st, f.x, f.beta, 1.0, 100.0, 3);
  f.sigma = 3.5;
  f.xi = -0.1;
  f.alpha = -0.06;
  std::vector<int> winters;
  for (int w = 1960; w < 1990; ++w) winters.push_back(w);
  const auto sim = simulate_dataset(st, f, StableVariogram(200, 1.0), winters, 8, 0.2);
  sim.data.validate();
  CHECK(sim.data.missing_count() > 0);
  for (std::size_t i = 0; i < winters.size(); ++i) {
    CHECK(sim.partitions[i].ground() == sim.data.observed_sites(i));
    for (const auto& b : sim.partitions[i].blocks())
      for (int s : b) CHECK(sim.data.days[i][static_cast<std::size_t>(s)] == sim.data.days[i][static_cast<std::size_t>(b[0])]);
  }
  const auto again = simulate_dataset(st, f, StableVariogram(200, 1.0), winters, 8, 0.2);
  CHECK((again.data.minima.array().isNaN() == sim.data.minima.array().isNaN()).all());
  CHECK(again.data.minima.array().isNaN().select(0.0, again.data.minima).isApprox(
      sim.data.minima.array().isNaN().select(0.0, sim.data.minima)));
}
