#include "brmax/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_point.hpp>

#include "brmax/errors.hpp"
#include "brmax/rng.hpp"

namespace brmax {

namespace bg = boost::geometry;

BrSimulator::BrSimulator(SiteSet sites, StableVariogram v, std::optional<Point> anchor)
    : sites_(std::move(sites)), v_(v) {
  if (sites_.size() == 0) throw ValidationError("BrSimulator: no sites");
  const Point a = anchor ? *anchor : default_anchor(sites_);
  chol_ = cholesky_lower(build_covariance(sites_, v_, a));
  gamma_ = semivariogram_matrix(sites_, v_);
}

BrSimulator::Draw BrSimulator::draw(std::uint64_t seed) const {
  const auto d = static_cast<Eigen::Index>(sites_.size());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  std::vector<std::uint64_t> owner(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd w(d), y(d);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo;
  for (Eigen::Index k = 0; k < d; ++k) {
    auto arrivals = make_rng(derive_seed(seed, {seed_tag::kSimulation, static_cast<std::uint64_t>(k)}));
    double zeta = expo(arrivals);
    for (std::uint64_t c = 0; 1.0 / zeta > z(k); ++c) {
      auto rng = make_rng(derive_seed(seed, {seed_tag::kSimulation, static_cast<std::uint64_t>(k), c + 1}));
      for (Eigen::Index j = 0; j < d; ++j) w(j) = normal(rng);
      const Eigen::VectorXd eps = chol_.triangularView<Eigen::Lower>() * w;
      for (Eigen::Index j = 0; j < d; ++j) y(j) = std::exp(eps(j) - eps(k) - gamma_(j, k)) / zeta;
      y(k) = 1.0 / zeta;
      bool valid = true;
      for (Eigen::Index j = 0; j < k && valid; ++j) valid = y(j) < z(j);
      if (valid) {
        const std::uint64_t id = (static_cast<std::uint64_t>(k) << 32) | c;
        for (Eigen::Index j = 0; j < d; ++j)
          if (y(j) > z(j)) {
            z(j) = y(j);
            owner[static_cast<std::size_t>(j)] = id;
          }
      }
      zeta += expo(arrivals);
    }
  }
  std::map<std::uint64_t, SetPartition::Block> groups;
  for (Eigen::Index j = 0; j < d; ++j) groups[owner[static_cast<std::size_t>(j)]].push_back(static_cast<int>(j));
  std::vector<SetPartition::Block> blocks;
  for (auto& [id, b] : groups) blocks.push_back(std::move(b));
  return {std::vector<double>(z.data(), z.data() + d), SetPartition(std::move(blocks))};
}

std::vector<double> simulate_simple_br(const SiteSet& sites, const StableVariogram& v, std::uint64_t seed) {
  return BrSimulator(sites, v).draw(seed).z;
}

GridSpec GridSpec::over_hull(const SiteSet& stations, double resolution_km) {
  if (!(resolution_km > 0.0)) throw ValidationError("grid resolution must be positive");
  using P = bg::model::d2::point_xy<double>;
  bg::model::multi_point<P> pts;
  for (const auto& s : stations.coords()) pts.emplace_back(s.x, s.y);
  bg::model::polygon<P> hull;
  bg::convex_hull(pts, hull);
  const auto& c = stations.coords();
  const auto [x0, x1] = std::minmax_element(c.begin(), c.end(), [](Point a, Point b) { return a.x < b.x; });
  const auto [y0, y1] = std::minmax_element(c.begin(), c.end(), [](Point a, Point b) { return a.y < b.y; });
  GridSpec g;
  g.resolution_km = resolution_km;
  for (double x = x0->x; x <= x1->x + 1e-9; x += resolution_km)
    for (double y = y0->y; y <= y1->y + 1e-9; y += resolution_km)
      if (bg::covered_by(P(x, y), hull)) g.cells.push_back({x, y});
  return g;
}

std::vector<double> simulate_temperature_field(const SiteSet& cells, const GevField& field,
                                               const StableVariogram& dep, double t, std::uint64_t seed) {
  if (static_cast<std::size_t>(field.u.size()) != cells.size())
    throw ValidationError("simulate_temperature_field: one location effect per cell required");
  const auto z = BrSimulator(cells, dep).draw(seed).z;
  std::vector<double> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const GevParams p = field.at_site(j, t);
    // Unit-Fréchet z has cdf exp(−1/z); map through the local GEV quantile.
    const double x = std::abs(p.xi) < kGumbelThreshold ? p.mu + p.sigma * std::log(z[j])
                                                       : p.mu + p.sigma * (std::pow(z[j], p.xi) - 1.0) / p.xi;
    out[j] = -x;
  }
  return out;
}

Eigen::MatrixXd exponential_correlation(const SiteSet& sites, double delta) {
  const auto d = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd r(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      r(i, j) = std::exp(-distance(sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]) / delta);
  return r;
}

Eigen::VectorXd krige_random_effect(const SiteSet& stations, const Eigen::VectorXd& u,
                                    const Eigen::MatrixXd& x_stations, const Eigen::VectorXd& beta,
                                    double tau2, double delta, const std::vector<Point>& targets,
                                    const Eigen::MatrixXd& x_targets) {
  if (!(tau2 >= 0.0) || !(delta > 0.0)) throw ValidationError("krige: τ² ≥ 0 and δ > 0 required");
  const auto m = static_cast<Eigen::Index>(targets.size());
  Eigen::VectorXd mean = x_targets * beta;
  if (tau2 == 0.0) return mean;
  const Eigen::MatrixXd r = exponential_correlation(stations, delta);
  Eigen::MatrixXd cross(m, static_cast<Eigen::Index>(stations.size()));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < cross.cols(); ++j)
      cross(i, j) = std::exp(-distance(targets[static_cast<std::size_t>(i)], stations[static_cast<std::size_t>(j)]) / delta);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(r);
  if (ldlt.info() != Eigen::Success) throw NotPositiveDefinite("krige: station correlation is singular");
  // τ² cancels between the cross-covariance and the station covariance.
  mean += cross * ldlt.solve(u - x_stations * beta);
  return mean;
}

Eigen::VectorXd krige_random_effect(const SiteSet& stations, const std::vector<LatentDraw>& draws,
                                    const Eigen::MatrixXd& x_stations, const std::vector<Point>& targets,
                                    const Eigen::MatrixXd& x_targets) {
  if (draws.empty()) throw ValidationError("krige: no posterior draws");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
  for (const auto& d : draws)
    acc += krige_random_effect(stations, d.u, x_stations, d.beta, d.tau2, d.delta, targets, x_targets);
  return acc / static_cast<double>(draws.size());
}

std::vector<double> group_extreme_predictive(const std::vector<int>& group, const SiteSet& stations,
                                             const GevField& field, const StableVariogram& dep, double t,
                                             GroupStat stat, int n_sims, std::uint64_t seed) {
  if (group.empty()) throw ValidationError("group_extreme_predictive: empty group");
  const auto sub = stations.subset(group);
  GevField f = field;
  f.u.resize(static_cast<Eigen::Index>(group.size()));
  for (std::size_t i = 0; i < group.size(); ++i) f.u(static_cast<Eigen::Index>(i)) = field.u(group[i]);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_sims));
  for (int s = 0; s < n_sims; ++s) {
    const auto y = simulate_temperature_field(sub, f, dep, t, derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    switch (stat) {
      case GroupStat::Max: out.push_back(*std::max_element(y.begin(), y.end())); break;
      case GroupStat::Min: out.push_back(*std::min_element(y.begin(), y.end())); break;
      case GroupStat::Mean: {
        double m = 0.0;
        for (double v : y) m += v;
        out.push_back(m / static_cast<double>(y.size()));
      }
    }
  }
  return out;
}

Eigen::VectorXd sample_random_effect(const SiteSet& sites, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                                     double tau2, double delta, std::uint64_t seed) {
  const Eigen::MatrixXd l = cholesky_lower(tau2 * exponential_correlation(sites, delta));
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd w(l.rows());
  for (auto& v : w) v = normal(rng);
  return x * beta + l * w;
}

SimulatedData simulate_dataset(const SiteSet& sites, const GevField& field, const StableVariogram& dep,
                               const std::vector<int>& winters, std::uint64_t seed, double missing_prob) {
  const auto n = static_cast<Eigen::Index>(winters.size());
  const auto d = static_cast<Eigen::Index>(sites.size());
  SimulatedData out;
  Dataset& data = out.data;
  data.sites = sites;
  data.years = winters;
  data.x = field.x;
  data.minima.resize(n, d);
  data.t.resize(n, d);
  data.days.assign(winters.size(), std::vector<std::vector<int>>(sites.size()));
  const BrSimulator sim(sites, dep);
  auto rng = make_rng(derive_seed(seed, {seed_tag::kSimulation}));
  std::uniform_real_distribution<double> unif;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int winter = winters[static_cast<std::size_t>(i)];
    const auto draw = sim.draw(derive_seed(seed, {seed_tag::kYear, static_cast<std::uint64_t>(i)}));
    std::uniform_int_distribution<int> day(0, winter_length(winter) - 1);
    std::vector<int> block_day;
    for (std::size_t b = 0; b < draw.partition.num_blocks(); ++b) block_day.push_back(day(rng));
    for (Eigen::Index j = 0; j < d; ++j) {
      const int dd = block_day[static_cast<std::size_t>(draw.partition.block_of(static_cast<int>(j)))];
      const double t = time_covariate(winter, dd);
      const GevParams p = field.at_site(static_cast<std::size_t>(j), t);
      const double z = draw.z[static_cast<std::size_t>(j)];
      const double x = std::abs(p.xi) < kGumbelThreshold ? p.mu + p.sigma * std::log(z)
                                                         : p.mu + p.sigma * (std::pow(z, p.xi) - 1.0) / p.xi;
      data.minima(i, j) = -x;
      data.t(i, j) = t;
      data.days[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = {dd};
    }
    out.partitions.push_back(draw.partition);
  }
  if (missing_prob > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        if (unif(rng) >= missing_prob) continue;
        const bool year_keeps = (data.minima.row(i).array().isNaN() == false).count() > 1;
        const bool site_keeps = (data.minima.col(j).array().isNaN() == false).count() > 1;
        if (!year_keeps || !site_keeps) continue;
        data.minima(i, j) = std::numeric_limits<double>::quiet_NaN();
        data.t(i, j) = std::numeric_limits<double>::quiet_NaN();
        data.days[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].clear();
      }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto obs = data.observed_sites(static_cast<std::size_t>(i));
      std::vector<SetPartition::Block> blocks;
      for (const auto& b : out.partitions[static_cast<std::size_t>(i)].blocks()) {
        SetPartition::Block kept;
        for (int s : b)
          if (data.observed(static_cast<std::size_t>(i), static_cast<std::size_t>(s))) kept.push_back(s);
        if (!kept.empty()) blocks.push_back(std::move(kept));
      }
      out.partitions[static_cast<std::size_t>(i)] = SetPartition(std::move(blocks));
    }
  }
  return out;
}

}  // namespace brmax
