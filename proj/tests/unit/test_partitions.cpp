#include <cmath>
#include <map>
#include <random>
#include <set>

#include "brmax/errors.hpp"
#include "brmax/partition.hpp"
#include "brmax/partition_sampler.hpp"
#include "doctest.h"

using namespace brmax;

namespace {

// Bell numbers from the recurrence B(n+1) = Σ_k C(n,k) B(k).
unsigned long long bell_recurrence(int n) {
  std::vector<unsigned long long> b{1};
  for (int m = 0; m < n; ++m) {
    unsigned long long s = 0, c = 1;
    for (int k = 0; k <= m; ++k) {
      s += c * b[static_cast<std::size_t>(k)];
      c = c * static_cast<unsigned long long>(m - k) / static_cast<unsigned long long>(k + 1);
    }
    b.push_back(s);
  }
  return b[static_cast<std::size_t>(n)];
}

bool valid(const SetPartition& p, const std::vector<int>& ground) {
  std::vector<int> all;
  for (const auto& b : p.blocks()) {
    if (b.empty()) return false;
    all.insert(all.end(), b.begin(), b.end());
  }
  std::sort(all.begin(), all.end());
  return all == ground;
}

std::vector<int> iota_ground(int n) {
  std::vector<int> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = i;
  return g;
}

}  // namespace

TEST_CASE("SetPartition canonical form and text") {
  const SetPartition a({{4, 2}, {0}, {3, 1}});
  const SetPartition b({{1, 3}, {2, 4}, {0}});
  CHECK(a == b);
  CHECK(a.to_string() == "1|2,4|3,5");
  CHECK(SetPartition::parse("1,3|2|4,5").to_string() == "1,3|2|4,5");
  CHECK(SetPartition::parse(a.to_string()) == a);
  CHECK(a.block_of(4) == 2);
  CHECK_THROWS_AS(SetPartition({{0, 1}, {1}}), ValidationError);
  CHECK_THROWS_AS(SetPartition({{0}, {}}), ValidationError);
  CHECK_THROWS_AS(SetPartition::parse("1,x"), ValidationError);
}

TEST_CASE("enumerate_partitions counts") {
  CHECK(enumerate_partitions({7}).size() == 1);
  CHECK(enumerate_partitions({0, 1, 2}).size() == 5);
  for (int n = 1; n <= 10; ++n) CHECK(bell_number(n) == bell_recurrence(n));
  const auto all10 = enumerate_partitions(iota_ground(10));
  CHECK(all10.size() == bell_recurrence(10));
  CHECK(all10.size() == 115975);
  const auto p6 = enumerate_partitions(iota_ground(6));
  std::set<std::string> distinct;
  for (const auto& p : p6) {
    CHECK(valid(p, iota_ground(6)));
    distinct.insert(p.to_string());
  }
  CHECK(distinct.size() == p6.size());
  CHECK_THROWS_AS(enumerate_partitions(iota_ground(11)), DimensionTooLarge);
}

TEST_CASE("rand_index hand cases") {
  const auto g4 = iota_ground(4);
  const auto a = SetPartition::parse("1,2|3,4");
  const auto b = SetPartition::parse("1,2,3|4");
  CHECK(rand_index(a, a) == 1.0);
  CHECK(rand_index(SetPartition::singletons(g4), SetPartition::one_block(g4)) == 0.0);
  CHECK(rand_index(a, b) == doctest::Approx(0.5));
  CHECK(rand_index(b, a) == rand_index(a, b));
  CHECK_THROWS_AS(rand_index(a, SetPartition::parse("1,2|3")), GroundMismatch);
  // Symmetry over random pairs.
  const auto all = enumerate_partitions(iota_ground(5));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  for (int i = 0; i < 50; ++i) {
    const auto& x = all[pick(rng)];
    const auto& y = all[pick(rng)];
    CHECK(rand_index(x, y) == rand_index(y, x));
  }
}

TEST_CASE("exact_conditional limits") {
  const StableVariogram v(1.0, 1.0);
  const BrModel one(v, SiteSet({{0.0, 0.0}}));
  const std::vector<double> z1{1.0};
  const auto c1 = exact_conditional(z1, one, 1);
  REQUIRE(c1.size() == 1);
  CHECK(c1[0].probability == 1.0);

  const std::vector<double> z2{1.2, 0.8};
  // 2γ(h) = 50 → near independence.
  const BrModel far(v, SiteSet({{0.0, 0.0}, {25.0, 0.0}}));
  for (const auto& pp : exact_conditional(z2, far, 1))
    if (pp.partition.num_blocks() == 2) CHECK(pp.probability > 0.95);
  // 2γ(h) = 1e-4 → near complete dependence.
  const BrModel near(v, SiteSet({{0.0, 0.0}, {5e-5, 0.0}}));
  double sum = 0.0;
  for (const auto& pp : exact_conditional(z2, near, 1)) {
    sum += pp.probability;
    if (pp.partition.num_blocks() == 1) CHECK(pp.probability > 0.95);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gibbs_sweep trivial and audited moves") {
  const StableVariogram v(2.0, 1.0);
  const BrModel one(v, SiteSet({{0.0, 0.0}}));
  const std::vector<double> z1{1.0};
  CHECK(gibbs_sweep(SetPartition::singletons({0}), z1, one, 4) == SetPartition::singletons({0}));

  const BrModel m(v, SiteSet({{0.0, 0.0}, {1.0, 0.5}, {2.0, -0.3}, {0.4, 1.6}, {1.5, 1.5}}));
  const std::vector<double> z{0.8, 1.4, 2.0, 0.6, 1.1};
  const auto g = iota_ground(5);
  BlockTermCache cache(z, m, 17);
  auto rng = make_rng(5);
  SetPartition pi = SetPartition::singletons(g);
  for (int s = 0; s < 50; ++s) {
    std::vector<GibbsMove> trace;
    pi = gibbs_sweep(pi, cache, rng, &trace);
    CHECK(valid(pi, g));
    CHECK(trace.size() == 5);
    std::set<int> visited;
    for (const auto& mv : trace) {
      visited.insert(mv.site);
      CHECK(mv.candidates.size() == mv.without_site.num_blocks() + 1);
      double total = 0.0;
      for (std::size_t c = 0; c < mv.candidates.size(); ++c) {
        CHECK(valid(mv.candidates[c], g));
        // Removing the site from the candidate gives back π_{−j}.
        std::vector<std::vector<int>> reduced;
        for (auto b : mv.candidates[c].blocks()) {
          b.erase(std::remove(b.begin(), b.end(), mv.site), b.end());
          if (!b.empty()) reduced.push_back(b);
        }
        CHECK(SetPartition(reduced) == mv.without_site);
        total += mv.probabilities[c];
      }
      CHECK(total == doctest::Approx(1.0));
    }
    CHECK(visited.size() == 5);
  }
}

TEST_CASE("gibbs_sweep stationary distribution matches enumeration (D = 4)") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 3; ++rep) {
    const StableVariogram v(1.0, 1.0);
    std::vector<Point> pts;
    for (int i = 0; i < 4; ++i) pts.push_back({2 * u(gen), 2 * u(gen)});
    const BrModel m(v, SiteSet(pts), std::nullopt, 2000);
    std::vector<double> z;
    for (int i = 0; i < 4; ++i) z.push_back(0.3 + 3 * u(gen));
    const std::uint64_t seed = 1000 + rep;
    const auto exact = exact_conditional(z, m, seed);
    BlockTermCache cache(z, m, seed);
    auto rng = make_rng(rep);
    std::map<std::string, int> counts;
    SetPartition pi = SetPartition::singletons(iota_ground(4));
    const int sweeps = 100000;
    for (int s = 0; s < sweeps; ++s) {
      pi = gibbs_sweep(pi, cache, rng);
      ++counts[pi.to_string()];
    }
    double tv = 0.0;
    for (const auto& pp : exact) tv += std::abs(pp.probability - counts[pp.partition.to_string()] / double(sweeps));
    tv /= 2.0;
    CAPTURE(rep);
    CHECK(tv < 0.02);
  }
}
