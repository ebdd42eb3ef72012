#include <cmath>

#include "brmax/declustering.hpp"
#include "brmax/errors.hpp"
#include "brmax/rng.hpp"
#include "doctest.h"

using namespace brmax;

TEST_CASE("resolve_ties") {
  CHECK(resolve_ties({1990, 0, {17}, -30.0}, 1) == 17);
  CHECK_THROWS_AS(resolve_ties({1990, 0, {}, -30.0}, 1), EmptyDays);

  int tens = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const int d = resolve_ties({1990, 3, {10, 12}, -30.0}, static_cast<std::uint64_t>(s));
    REQUIRE((d == 10 || d == 12));
    tens += d == 10;
  }
  // 4 binomial standard deviations.
  CHECK(std::abs(tens / double(n) - 0.5) < 4 * 0.5 / std::sqrt(n));

  const OccurrenceRecord rec{1985, 2, {3, 9, 40, 41}, -25.0};
  CHECK(resolve_ties(rec, 99) == resolve_ties(rec, 99));
}

TEST_CASE("decluster_year") {
  const std::vector<int> chain{1, 4, 7};
  CHECK(decluster_year(chain).to_string() == "1,2,3");
  CHECK(decluster_year(std::vector<int>{1, 20}).to_string() == "1|2");
  CHECK(decluster_year(std::vector<int>{}).num_blocks() == 0);

  const SiteSet sites({{0, 0}, {50, 0}, {400, 0}});
  CHECK(decluster_year(chain, 5, DistanceCap{&sites, 150.0}).to_string() == "1,2|3");
  // Within the cap the chain survives.
  CHECK(decluster_year(chain, 5, DistanceCap{&sites, 1000.0}).to_string() == "1,2,3");
  // Link through the middle site is broken when it is far from both others.
  const SiteSet middle_far({{0, 0}, {500, 0}, {10, 0}});
  CHECK(decluster_year(chain, 5, DistanceCap{&middle_far, 150.0}).to_string() == "1|2|3");

  CHECK(decluster_year(std::vector<int>{5, 9, 30, 33, 80}, 5).to_string() == "1,2|3,4|5");
  CHECK(decluster_year(std::vector<int>{3, 1, 2}, 0).to_string() == "1|2|3");
  CHECK(decluster_year(std::vector<int>{3, 1, 3}, 0).to_string() == "1,3|2");
}

TEST_CASE("declustering monotone in lag") {
  auto rng = make_rng(4);
  std::uniform_int_distribution<int> day(0, 120);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> days(8);
    for (auto& d : days) d = day(rng);
    std::size_t prev = days.size() + 1;
    for (int lag = 0; lag <= 121; ++lag) {
      const auto k = decluster_year(days, lag).num_blocks();
      CHECK(k <= prev);
      CHECK(k <= days.size());
      prev = k;
    }
    CHECK(prev == 1);
  }
}

TEST_CASE("decluster_dataset maps back to global sites") {
  Dataset d;
  d.sites = SiteSet({{0, 0}, {10, 0}, {20, 0}, {30, 0}});
  d.years = {1990};
  d.minima = Eigen::MatrixXd(1, 4);
  d.minima << -30, NAN, -28, -25;
  d.t = Eigen::MatrixXd::Zero(1, 4);
  d.days = {{{1}, {}, {4}, {30}}};
  d.x = Eigen::MatrixXd::Ones(4, 1);
  const auto parts = decluster_dataset(d, 1);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].to_string() == "1,3|4");
}

TEST_CASE("time covariate") {
  CHECK(time_covariate(1999, 31) == doctest::Approx(0.0));
  CHECK(time_covariate(2015, 31) == doctest::Approx(16.0).epsilon(1e-3));
  CHECK(winter_length(1999) == 31 + 31 + 29 + 31);
  CHECK(winter_length(2000) == 121);
}
