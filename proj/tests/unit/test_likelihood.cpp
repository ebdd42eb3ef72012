#include <algorithm>
#include <cmath>
#include <limits>

#include "brmax/errors.hpp"
#include "brmax/likelihood.hpp"
#include "brmax/simulation.hpp"
#include "doctest.h"

using namespace brmax;

namespace {

ParameterState make_state(std::size_t d, double lambda = 300.0, double kappa = 1.0) {
  ParameterState s;
  s.field.x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(d), 1);
  s.field.beta = Eigen::VectorXd::Constant(1, 35.0);
  s.field.u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), 35.0);
  s.field.sigma = 3.5;
  s.field.xi = -0.1;
  s.field.alpha = -0.06;
  s.field.tau2 = 1.0;
  s.field.delta = 100.0;
  s.dep = StableVariogram(lambda, kappa);
  return s;
}

Dataset one_year(const std::vector<Point>& pts, const std::vector<double>& minima, double t = 3.0) {
  Dataset d;
  d.sites = SiteSet(pts);
  d.years = {2002};
  const auto n = static_cast<Eigen::Index>(pts.size());
  d.minima = Eigen::Map<const Eigen::RowVectorXd>(minima.data(), n);
  d.t = Eigen::RowVectorXd::Constant(n, t);
  d.days = {std::vector<std::vector<int>>(pts.size(), {40})};
  d.x = Eigen::MatrixXd::Ones(n, 1);
  return d;
}

SimulatedData small_simulation(std::size_t n_years, std::uint64_t seed, double lambda = 300.0) {
  const SiteSet st({{0, 0}, {150, 20}, {60, 240}});
  const auto s = make_state(3, lambda);
  std::vector<int> winters;
  for (std::size_t i = 0; i < n_years; ++i) winters.push_back(1970 + static_cast<int>(i));
  return simulate_dataset(st, s.field, s.dep, winters, seed);
}

}  // namespace

TEST_CASE("one site reduces to the GEV density") {
  const auto data = one_year({{0, 0}}, {-31.2});
  const auto s = make_state(1);
  const auto ll = year_loglik(0, SetPartition::singletons({0}), s, data, 7);
  const double direct = gev_logpdf(s.field.at_site(0, 3.0), 31.2);
  CHECK(std::abs(ll.value - direct) < 1e-10);
  CHECK(ll.std_error == 0.0);
}

TEST_CASE("two distant sites approach independence") {
  // 2γ = 2(h/λ)^κ = 50 at h = 25λ, κ = 1.
  const auto data = one_year({{0, 0}, {25 * 300.0, 0}}, {-31.2, -40.5});
  const auto s = make_state(2);
  const auto ll = year_loglik(0, SetPartition::singletons({0, 1}), s, data, 7);
  CHECK(std::abs(ll.value - independence_loglik(s, data)) < 1e-3);
}

TEST_CASE("support violations give minus infinity") {
  // ξ = −0.1: negated minima must stay below μ + σ/0.1 = 35 − 0.18 + 35.
  const auto data = one_year({{0, 0}, {50, 0}}, {-31.2, -80.0});
  const auto s = make_state(2);
  const auto ll = year_loglik(0, SetPartition::singletons({0, 1}), s, data, 7);
  CHECK(ll.value == -std::numeric_limits<double>::infinity());
  CHECK(total_loglik({SetPartition::one_block({0, 1})}, s, data, 7).value == -std::numeric_limits<double>::infinity());
}

TEST_CASE("partition must match the observed sites") {
  auto data = one_year({{0, 0}, {50, 0}, {0, 70}}, {-31.2, NAN, -33.0});
  data.t(0, 1) = NAN;
  data.days[0][1].clear();
  const auto s = make_state(3);
  CHECK(std::isfinite(year_loglik(0, SetPartition::parse("1,3"), s, data, 1).value));
  CHECK_THROWS_AS(year_loglik(0, SetPartition::parse("1,2,3"), s, data, 1), PartitionMismatch);
  CHECK_THROWS_AS(year_loglik(0, SetPartition::parse("1"), s, data, 1), PartitionMismatch);
}

TEST_CASE("total log-likelihood") {
  const auto sim = small_simulation(6, 21);
  const auto s = make_state(3);
  const auto& data = sim.data;

  const auto total = total_loglik(sim.partitions, s, data, 99);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.n_years(); ++i) sum += year_loglik(i, sim.partitions[i], s, data, 99).value;
  CHECK(total.value == doctest::Approx(sum).epsilon(1e-14));
  CHECK(total.std_error > 0.0);
  CHECK(total_loglik(sim.partitions, s, data, 99, kDefaultMvnSamples, 3).value == total.value);
  CHECK(total_loglik(sim.partitions, s, data, 99).value == total.value);

  // Reversing the year order (keyed seeds) leaves the value unchanged.
  Dataset rev = data;
  std::vector<SetPartition> rev_parts(sim.partitions.rbegin(), sim.partitions.rend());
  const auto n = static_cast<Eigen::Index>(data.n_years());
  for (Eigen::Index i = 0; i < n; ++i) {
    rev.years[static_cast<std::size_t>(i)] = data.years[static_cast<std::size_t>(n - 1 - i)];
    rev.minima.row(i) = data.minima.row(n - 1 - i);
    rev.t.row(i) = data.t.row(n - 1 - i);
    rev.days[static_cast<std::size_t>(i)] = data.days[static_cast<std::size_t>(n - 1 - i)];
  }
  CHECK(total_loglik(rev_parts, s, rev, 99).value == doctest::Approx(total.value).epsilon(1e-14));

  Dataset first = data;
  first.years.resize(1);
  first.minima.conservativeResize(1, Eigen::NoChange);
  first.t.conservativeResize(1, Eigen::NoChange);
  first.days.resize(1);
  CHECK(total_loglik({sim.partitions[0]}, s, first, 5).value == year_loglik(0, sim.partitions[0], s, data, 5).value);
  CHECK_THROWS_AS(total_loglik({}, s, data, 1), PartitionMismatch);
}

TEST_CASE("reduction to the independence likelihood") {
  auto sim = small_simulation(10, 4, 1.0);
  const auto s = make_state(3, 1.0);  // λ = 1 km: 2γ ≥ 300 between every pair
  std::vector<SetPartition> single;
  for (std::size_t i = 0; i < sim.data.n_years(); ++i) single.push_back(SetPartition::singletons(sim.data.observed_sites(i)));
  const auto ll = total_loglik(single, s, sim.data, 3);
  CHECK(std::abs(ll.value - independence_loglik(s, sim.data)) < 1e-6 + 3 * ll.std_error);
}

TEST_CASE("likelihood peaks near the truth on a coarse grid") {
  const auto sim = small_simulation(5, 2024);
  const std::vector<double> scale{0.25, 0.5, 1.0, 2.0, 4.0};
  auto argmax_over = [&](auto&& set) {
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scale.size(); ++k) {
      auto s = make_state(3);
      set(s, scale[k]);
      const double v = total_loglik(sim.partitions, s, sim.data, 17).value;
      if (v > best_val) {
        best_val = v;
        best = k;
      }
    }
    return static_cast<int>(best);
  };
  CHECK(std::abs(argmax_over([](ParameterState& s, double c) { s.field.sigma *= c; }) - 2) <= 1);
  CHECK(std::abs(argmax_over([](ParameterState& s, double c) { s.dep = StableVariogram(300.0 * c, 1.0); }) - 2) <= 1);
  CHECK(std::abs(argmax_over([](ParameterState& s, double c) { s.field.u.array() += 4.0 * std::log2(c); }) - 2) <= 1);
}
