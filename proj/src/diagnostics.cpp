#include "brmax/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "brmax/brown_resnick.hpp"
#include "brmax/errors.hpp"
#include "brmax/io.hpp"

namespace brmax {

namespace {

// Average ranks scaled to (0, 1).
std::vector<double> empirical_uniforms(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) u[idx[k]] = rank / (static_cast<double>(n) + 1.0);
    i = j + 1;
  }
  return u;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::size_t bin_of(const std::vector<double>& edges, double h) {
  const auto it = std::upper_bound(edges.begin(), edges.end(), h);
  return static_cast<std::size_t>(it - edges.begin()) - 1;  // may wrap for h < edges[0]
}

// Pairwise θ̂ for the years listed in `rows` (with repeats for the bootstrap).
std::vector<PairTheta> pair_thetas(const Dataset& data, const std::vector<std::size_t>& rows, std::size_t min_years) {
  std::vector<PairTheta> out;
  for (std::size_t a = 0; a < data.n_sites(); ++a)
    for (std::size_t b = a + 1; b < data.n_sites(); ++b) {
      std::vector<double> xa, xb;
      for (auto i : rows)
        if (data.observed(i, a) && data.observed(i, b)) {
          xa.push_back(data.minima(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)));
          xb.push_back(data.minima(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)));
        }
      if (xa.size() < min_years) continue;
      auto p = fmadogram_theta(xa, xb);
      p.a = static_cast<int>(a);
      p.b = static_cast<int>(b);
      p.distance_km = distance(data.sites[a], data.sites[b]);
      out.push_back(p);
    }
  return out;
}

std::vector<std::size_t> replicate_rows(const PosteriorSamples& ps, int n_rep) {
  if (ps.values.rows() == 0) throw ValidationError("no posterior samples");
  std::vector<std::size_t> rows;
  for (int r = 0; r < n_rep; ++r)
    rows.push_back(static_cast<std::size_t>(r) * static_cast<std::size_t>(ps.values.rows()) /
                   static_cast<std::size_t>(n_rep));
  return rows;
}

double group_statistic(const std::vector<double>& v, GroupStat stat) {
  switch (stat) {
    case GroupStat::Max: return *std::max_element(v.begin(), v.end());
    case GroupStat::Min: return *std::min_element(v.begin(), v.end());
    case GroupStat::Mean: return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  return 0.0;
}

std::ofstream open_table(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path.string());
  return f;
}

void write_qq(const std::filesystem::path& path, const std::vector<QqTable>& tables, const char* key) {
  auto f = open_table(path);
  f << key << ",k,empirical,median,lower,upper,lower_sim,upper_sim\n";
  for (const auto& t : tables)
    for (const auto& p : t.points)
      f << csv_field(t.label) << ',' << p.k + 1 << ',' << format_double(p.empirical) << ','
        << format_double(p.median) << ',' << format_double(p.lower) << ',' << format_double(p.upper) << ','
        << format_double(p.lower_sim) << ',' << format_double(p.upper_sim) << '\n';
}

}  // namespace

PairTheta fmadogram_theta(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("fmadogram_theta: need ≥ 2 paired values");
  const auto ua = empirical_uniforms(a);
  const auto ub = empirical_uniforms(b);
  double nu = 0.0;
  for (std::size_t i = 0; i < ua.size(); ++i) nu += std::abs(ua[i] - ub[i]);
  nu /= 2.0 * static_cast<double>(ua.size());
  PairTheta p;
  p.n_years = a.size();
  p.raw = (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu);
  p.theta = std::clamp(p.raw, 1.0, 2.0);
  p.clamped = p.theta != p.raw;
  return p;
}

ThetaEstimate empirical_extremal_coefficients(const Dataset& data, const std::vector<double>& edges, int n_boot,
                                              std::uint64_t seed, std::size_t min_years) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
    throw ValidationError("distance bin edges must be ascending, at least two");
  ThetaEstimate est;
  std::vector<std::size_t> all(data.n_years());
  std::iota(all.begin(), all.end(), 0);
  est.pairs = pair_thetas(data, all, min_years);

  const std::size_t nb = edges.size() - 1;
  auto bin_means = [&](const std::vector<PairTheta>& pairs) {
    std::vector<double> sum(nb, 0.0);
    std::vector<std::size_t> count(nb, 0);
    for (const auto& p : pairs) {
      const auto k = bin_of(edges, p.distance_km);
      if (k >= nb) continue;
      sum[k] += p.theta;
      ++count[k];
    }
    for (std::size_t k = 0; k < nb; ++k) sum[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : NAN;
    return std::pair{sum, count};
  };
  const auto [means, counts] = bin_means(est.pairs);

  std::vector<std::vector<double>> boot(nb);
  auto rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.n_years() - 1);
  for (int r = 0; r < n_boot; ++r) {
    std::vector<std::size_t> rows(data.n_years());
    for (auto& i : rows) i = pick(rng);
    const auto [m, c] = bin_means(pair_thetas(data, rows, min_years));
    for (std::size_t k = 0; k < nb; ++k)
      if (c[k]) boot[k].push_back(m[k]);
  }

  for (std::size_t k = 0; k < nb; ++k) {
    if (!counts[k]) {
      est.warnings.push_back("distance bin [" + format_double(edges[k]) + ", " + format_double(edges[k + 1]) +
                             ") has no station pair; omitted");
      continue;
    }
    ThetaBin b;
    b.lo = edges[k];
    b.hi = edges[k + 1];
    b.n_pairs = counts[k];
    b.theta = means[k];
    b.lower = boot[k].empty() ? b.theta : percentile(boot[k], 0.025);
    b.upper = boot[k].empty() ? b.theta : percentile(boot[k], 0.975);
    for (const auto& p : est.pairs)
      if (bin_of(edges, p.distance_km) == k && p.clamped) ++b.clamped;
    est.bins.push_back(b);
  }
  return est;
}

double QqTable::coverage() const {
  if (points.empty()) return 1.0;
  std::size_t in = 0;
  for (const auto& p : points) in += p.empirical >= p.lower_sim && p.empirical <= p.upper_sim;
  return static_cast<double>(in) / static_cast<double>(points.size());
}

void fill_bands(const Eigen::MatrixXd& replicates, QqTable& table) {
  const auto r = replicates.rows();
  const auto k = replicates.cols();
  if (static_cast<std::size_t>(k) != table.points.size()) throw ValidationError("fill_bands: size mismatch");
  // Per-column sorted values and ordinal ranks of each replicate.
  Eigen::MatrixXd sorted(r, k);
  Eigen::MatrixXi rank(r, k);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(r));
  for (Eigen::Index c = 0; c < k; ++c) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return replicates(a, c) < replicates(b, c); });
    for (Eigen::Index i = 0; i < r; ++i) {
      sorted(i, c) = replicates(idx[static_cast<std::size_t>(i)], c);
      rank(idx[static_cast<std::size_t>(i)], c) = static_cast<int>(i) + 1;
    }
  }
  // Extreme rank depth of each replicate curve; a band between the d-th
  // smallest and d-th largest value contains every curve of depth ≥ d.
  std::vector<int> depth(static_cast<std::size_t>(r));
  for (Eigen::Index i = 0; i < r; ++i) {
    int d = static_cast<int>(r);
    for (Eigen::Index c = 0; c < k; ++c) d = std::min({d, rank(i, c), static_cast<int>(r) + 1 - rank(i, c)});
    depth[static_cast<std::size_t>(i)] = d;
  }
  std::sort(depth.begin(), depth.end());
  const auto allowed = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(r)));
  const int d_sim = std::max(1, depth[std::min(allowed, depth.size() - 1)]);

  for (Eigen::Index c = 0; c < k; ++c) {
    std::vector<double> col(sorted.col(c).data(), sorted.col(c).data() + r);
    auto& p = table.points[static_cast<std::size_t>(c)];
    p.median = percentile(col, 0.5);
    p.lower = percentile(col, 0.025);
    p.upper = percentile(col, 0.975);
    p.lower_sim = col[static_cast<std::size_t>(d_sim - 1)];
    p.upper_sim = col[static_cast<std::size_t>(r - d_sim)];
  }
}

std::vector<QqTable> marginal_qq(const Dataset& data, const PosteriorSamples& ps, int n_rep, std::uint64_t seed) {
  const auto rows = replicate_rows(ps, n_rep);
  std::vector<ParameterState> states;
  for (auto r : rows) states.push_back(ps.state_at(static_cast<Eigen::Index>(r), data));
  std::vector<QqTable> out;
  for (std::size_t j = 0; j < data.n_sites(); ++j) {
    std::vector<std::size_t> years;
    for (std::size_t i = 0; i < data.n_years(); ++i)
      if (data.observed(i, j)) years.push_back(i);
    QqTable t;
    t.label = data.sites.ids().empty() ? std::to_string(j + 1) : data.sites.ids()[j];
    std::vector<double> emp;
    for (auto i : years) emp.push_back(data.minima(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    std::sort(emp.begin(), emp.end());
    for (std::size_t k = 0; k < emp.size(); ++k) t.points.push_back({k, emp[k]});
    Eigen::MatrixXd reps(n_rep, static_cast<Eigen::Index>(emp.size()));
    for (int r = 0; r < n_rep; ++r) {
      auto rng = make_rng(derive_seed(seed, {seed_tag::kSimulation, j, static_cast<std::uint64_t>(r)}));
      std::vector<double> v;
      for (auto i : years) {
        const auto g = states[static_cast<std::size_t>(r)].field.at_site(
            j, data.t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        v.push_back(-gev_sample(g, rng));
      }
      std::sort(v.begin(), v.end());
      for (std::size_t k = 0; k < v.size(); ++k) reps(r, static_cast<Eigen::Index>(k)) = v[k];
    }
    fill_bands(reps, t);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<QqTable> group_qq(const Dataset& data, const PosteriorSamples& ps,
                              const std::map<std::string, std::vector<int>>& groups, GroupStat stat, int n_rep,
                              std::uint64_t seed) {
  const auto rows = replicate_rows(ps, n_rep);
  std::vector<QqTable> out;
  std::uint64_t gi = 0;
  for (const auto& [name, group] : groups) {
    ++gi;
    for (int j : group)
      if (j < 0 || static_cast<std::size_t>(j) >= data.n_sites()) throw ValidationError("group " + name + ": bad site");
    std::vector<std::size_t> years;
    std::vector<double> emp;
    for (std::size_t i = 0; i < data.n_years(); ++i) {
      std::vector<double> v;
      for (int j : group)
        if (data.observed(i, static_cast<std::size_t>(j)))
          v.push_back(data.minima(static_cast<Eigen::Index>(i), j));
      if (v.size() != group.size()) continue;
      years.push_back(i);
      emp.push_back(group_statistic(v, stat));
    }
    QqTable t;
    t.label = name;
    if (years.empty()) {
      out.push_back(t);
      continue;
    }
    std::sort(emp.begin(), emp.end());
    for (std::size_t k = 0; k < emp.size(); ++k) t.points.push_back({k, emp[k]});
    const SiteSet sub = data.sites.subset(group);
    Eigen::MatrixXd reps(n_rep, static_cast<Eigen::Index>(emp.size()));
    for (int r = 0; r < n_rep; ++r) {
      const auto s = ps.state_at(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]), data);
      const BrSimulator sim(sub, s.dep);
      std::vector<double> v;
      for (auto i : years) {
        const auto z = sim.draw(derive_seed(seed, {seed_tag::kSimulation, gi, static_cast<std::uint64_t>(r), i})).z;
        std::vector<double> mins;
        for (std::size_t q = 0; q < group.size(); ++q) {
          const auto j = static_cast<std::size_t>(group[q]);
          const auto g = s.field.at_site(j, data.t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
          mins.push_back(-gev_quantile(g, std::exp(-1.0 / z[q])));
        }
        v.push_back(group_statistic(mins, stat));
      }
      std::sort(v.begin(), v.end());
      for (std::size_t k = 0; k < v.size(); ++k) reps(r, static_cast<Eigen::Index>(k)) = v[k];
    }
    fill_bands(reps, t);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<PartitionSizeRow> partition_size_table(const PosteriorSamples& ps, const std::vector<int>& winters,
                                                   const std::vector<SetPartition>* reference) {
  std::vector<PartitionSizeRow> out;
  if (ps.partitions.empty()) return out;
  for (std::size_t i = 0; i < winters.size(); ++i) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& draw : ps.partitions) ++counts[draw[i].num_blocks()];
    for (const auto& [nb, c] : counts) {
      PartitionSizeRow row;
      row.winter = winters[i];
      row.n_blocks = nb;
      row.probability = static_cast<double>(c) / static_cast<double>(ps.partitions.size());
      row.reference = reference && (*reference)[i].num_blocks() == nb;
      out.push_back(row);
    }
  }
  return out;
}

std::vector<RandRow> rand_index_table(const PosteriorSamples& ps, const std::vector<int>& winters,
                                      const std::vector<SetPartition>& reference) {
  if (reference.size() != winters.size()) throw ValidationError("rand_index_table: one reference per winter");
  std::vector<RandRow> out;
  for (std::size_t i = 0; i < winters.size(); ++i) {
    RandRow row;
    row.winter = winters[i];
    double s = 0.0, s2 = 0.0;
    for (const auto& draw : ps.partitions) {
      const double ri = rand_index(draw[i], reference[i]);
      s += ri;
      s2 += ri * ri;
    }
    row.n = ps.partitions.size();
    if (row.n) {
      const double n = static_cast<double>(row.n);
      row.mean = s / n;
      row.sd = row.n > 1 ? std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1))) : 0.0;
    }
    out.push_back(row);
  }
  return out;
}

std::vector<std::string> diagnostics_export(const std::filesystem::path& out_dir, const Dataset& data,
                                            const PosteriorSamples* ps,
                                            const std::map<std::string, std::vector<int>>& groups,
                                            const std::vector<SetPartition>* reference,
                                            const DiagnosticsOptions& options) {
  const auto theta = empirical_extremal_coefficients(data, options.theta_edges, options.n_boot, options.seed);
  {
    auto f = open_table(out_dir / "theta_pairs.csv");
    f << "site_a,site_b,distance_km,n_years,theta,raw,clamped\n";
    for (const auto& p : theta.pairs)
      f << p.a + 1 << ',' << p.b + 1 << ',' << format_double(p.distance_km) << ',' << p.n_years << ','
        << format_double(p.theta) << ',' << format_double(p.raw) << ',' << (p.clamped ? 1 : 0) << '\n';
  }
  {
    auto f = open_table(out_dir / "theta_bins.csv");
    f << "lo_km,hi_km,n_pairs,theta,lower,upper,clamped\n";
    for (const auto& b : theta.bins)
      f << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.n_pairs << ',' << format_double(b.theta)
        << ',' << format_double(b.lower) << ',' << format_double(b.upper) << ',' << b.clamped << '\n';
  }
  auto warnings = theta.warnings;
  if (!ps) return warnings;

  write_qq(out_dir / "qq_stations.csv", marginal_qq(data, *ps, options.n_rep, options.seed), "station");
  if (!groups.empty())
    write_qq(out_dir / "qq_groups.csv", group_qq(data, *ps, groups, options.group_stat, options.n_rep, options.seed),
             "group");
  if (!ps->partitions.empty()) {
    auto f = open_table(out_dir / "partition_sizes.csv");
    f << "winter,n_blocks,probability,reference\n";
    for (const auto& r : partition_size_table(*ps, data.years, reference))
      f << r.winter << ',' << r.n_blocks << ',' << format_double(r.probability) << ',' << (r.reference ? 1 : 0)
        << '\n';
    if (reference) {
      auto g = open_table(out_dir / "rand_index.csv");
      g << "winter,mean,sd,n\n";
      for (const auto& r : rand_index_table(*ps, data.years, *reference))
        g << r.winter << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ',' << r.n << '\n';
    }
  } else if (reference) {
    warnings.push_back("no partition samples; partition tables skipped");
  }
  return warnings;
}

}  // namespace brmax
