// brmax: simulate, decluster, fit, predict and diagnose winter-minimum
// temperature fields under a Brown–Resnick model.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "brmax/declustering.hpp"
#include "brmax/diagnostics.hpp"
#include "brmax/errors.hpp"
#include "brmax/io.hpp"
#include "brmax/mcmc.hpp"
#include "brmax/simulation.hpp"

namespace fs = std::filesystem;
using namespace brmax;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = "out";
};

Config load_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : Config::load(c.config_path);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  if (c.threads) cfg.set("threads", std::to_string(*c.threads));
  return cfg;
}

void finish(const Config& cfg, const fs::path& out, const char* command) {
  cfg.write_resolved(out / (std::string(command) + ".config"));
}

LoadedData load_data(const Config& cfg) {
  const auto stations = cfg.get("data.stations", "");
  const auto minima = cfg.get("data.minima", "");
  if (stations.empty() || minima.empty()) throw ConfigInvalid("data.stations and data.minima are required");
  auto d = load_dataset(stations, minima, cfg.get_strings("data.covariates", kDefaultCovariates),
                        cfg.get_bool("data.standardize", true));
  std::cerr << "loaded " << d.data.n_sites() << " stations, " << d.data.n_years() << " winters, "
            << d.data.missing_count() << " missing values (" << d.report.blank_entries << " blank)\n";
  return d;
}

std::vector<SetPartition> decluster(const Config& cfg, const Dataset& data, std::uint64_t seed) {
  const double cap = cfg.get_double("decluster.max_distance_km", 0.0);
  return decluster_dataset(data, derive_seed(seed, {1}), cfg.get_int("decluster.lag", 5),
                           cap > 0.0 ? std::optional<double>(cap) : std::nullopt);
}

GroupStat group_stat(const std::string& s) {
  if (s == "min") return GroupStat::Min;
  if (s == "max") return GroupStat::Max;
  if (s == "mean") return GroupStat::Mean;
  throw ConfigInvalid("group statistic must be min, max or mean");
}

// ---------------------------------------------------------------------------

StationTable synthetic_stations(const Config& cfg, std::uint64_t seed) {
  const int n = cfg.get_int("simulate.n_sites", 8);
  const double box = cfg.get_double("simulate.box_km", 500.0);
  if (n < 1 || !(box > 0.0)) throw ConfigInvalid("simulate.n_sites and simulate.box_km must be positive");
  auto rng = make_rng(derive_seed(seed, {seed_tag::kSimulation, 1}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StationTable st;
  for (int i = 0; i < n; ++i) {
    StationRecord r;
    r.id = "S" + std::to_string(i + 1);
    r.x_km = std::round(box * u(rng) * 10.0) / 10.0;
    r.y_km = std::round(box * u(rng) * 10.0) / 10.0;
    r.elevation_m = std::round(600.0 * u(rng));
    r.rel_elevation_m = std::round(100.0 * u(rng) - 50.0);
    r.ocean_proximity = std::round(100.0 * u(rng)) / 100.0;
    r.lake_cover = std::round(30.0 * u(rng)) / 100.0;
    st.rows.push_back(r);
  }
  return st;
}

GevField truth_field(const Config& cfg, const Eigen::MatrixXd& x) {
  GevField f;
  f.x = x;
  const auto beta = cfg.get_doubles("truth.beta", {35.0});
  if (beta.size() != static_cast<std::size_t>(x.cols()))
    throw ConfigInvalid("truth.beta needs " + std::to_string(x.cols()) + " values (intercept + covariates)");
  f.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), x.cols());
  f.alpha = cfg.get_double("truth.alpha", -0.06);
  f.sigma = cfg.get_double("truth.sigma", 3.5);
  f.xi = cfg.get_double("truth.xi", -0.1);
  f.tau2 = cfg.get_double("truth.tau2", 0.5);
  f.delta = cfg.get_double("truth.delta", 200.0);
  return f;
}

int cmd_simulate(const Common& c) {
  auto cfg = load_config(c);
  const fs::path out = c.out_dir;
  const auto seed = cfg.get_u64("seed", 1);
  const auto kind = cfg.get("simulate.kind", "dataset");
  const StableVariogram dep(cfg.get_double("truth.lambda", 300.0), cfg.get_double("truth.kappa", 1.0));
  const auto path = cfg.get("data.stations", "");
  const StationTable st = path.empty() ? synthetic_stations(cfg, seed) : load_stations(path);
  const auto covariates = cfg.get_strings("simulate.covariates", {});
  const auto design = Design::fit(st, covariates, cfg.get_bool("data.standardize", true));
  auto field = truth_field(cfg, design.matrix(st));
  field.u = sample_random_effect(st.sites(), field.x, field.beta, field.tau2, field.delta, derive_seed(seed, {2}));

  if (kind == "dataset") {
    const auto sim = simulate_dataset(st.sites(), field, dep, parse_winters(cfg.get("simulate.winters", "1966-2015")),
                                      derive_seed(seed, {3}), cfg.get_double("simulate.missing_prob", 0.0));
    save_stations(out / "stations.csv", st);
    save_minima(out / "minima.csv", st, sim.data);
    save_partitions(out / "partitions_true.csv", sim.data.years, sim.partitions);
    std::ofstream u(out / "truth_u.csv");
    u << "station,u\n";
    for (std::size_t j = 0; j < st.size(); ++j)
      u << csv_field(st.rows[j].id) << ',' << format_double(field.u(static_cast<Eigen::Index>(j))) << '\n';
    std::cerr << "simulated " << sim.data.n_years() << " winters at " << st.size() << " stations\n";
  } else if (kind == "field") {
    const auto grid = GridSpec::over_hull(st.sites(), cfg.get_double("grid.resolution_km", 25.0));
    const int winter = cfg.get_int("simulate.winter", 2000);
    const double t = time_covariate(winter, winter_length(winter) / 2);
    GevField cells = field;
    cells.x = design.matrix_at(grid.cells);
    cells.u = krige_random_effect(st.sites(), field.u, field.x, field.beta, field.tau2, field.delta, grid.cells,
                                  cells.x);
    const auto z = simulate_temperature_field(SiteSet(grid.cells), cells, dep, t, derive_seed(seed, {4}));
    fs::create_directories(out);
    std::ofstream f(out / "field.csv");
    f << "x_km,y_km,min_c\n";
    for (std::size_t k = 0; k < grid.cells.size(); ++k)
      f << format_double(grid.cells[k].x) << ',' << format_double(grid.cells[k].y) << ',' << format_double(z[k])
        << '\n';
    std::cerr << "simulated a field on " << grid.cells.size() << " cells\n";
  } else {
    throw ConfigInvalid("simulate.kind must be dataset or field");
  }
  finish(cfg, out, "simulate");
  return 0;
}

int cmd_decluster(const Common& c) {
  auto cfg = load_config(c);
  const auto d = load_data(cfg);
  const auto parts = decluster(cfg, d.data, cfg.get_u64("seed", 1));
  save_partitions(fs::path(c.out_dir) / "partitions.csv", d.data.years, parts);
  finish(cfg, c.out_dir, "decluster");
  return 0;
}

int cmd_fit(const Common& c, const std::string& mode) {
  auto cfg = load_config(c);
  const fs::path out = c.out_dir;
  const auto seed = cfg.get_u64("seed", 1);
  const auto d = load_data(cfg);
  auto chain = chain_config(cfg);
  chain.threads = cfg.get_int("threads", 1);
  chain.mode = mode == "m2" ? PartitionMode::Fixed : PartitionMode::Random;
  const auto priors = prior_spec(cfg, static_cast<std::size_t>(d.data.x.cols()));
  std::vector<SetPartition> start;
  if (chain.mode == PartitionMode::Fixed) {
    const auto file = cfg.get("fit.partitions", "");
    start = file.empty() ? decluster(cfg, d.data, seed) : load_partitions(file, d.data.years);
  }
  const auto ps = run_chains(chain, d.data, priors, seed, start);
  save_samples(out / "samples.csv", ps);
  save_summary(out / "summary.csv", ps.summarize());
  save_acceptance(out / "acceptance.csv", ps.acceptance);
  if (chain.mode == PartitionMode::Random) save_partition_samples(out / "partition_samples.csv", ps, d.data.years);
  long evals = 0;
  for (auto e : ps.likelihood_evaluations) evals += e;
  std::cerr << "fit " << mode << ": " << ps.values.rows() << " retained draws, " << evals
            << " likelihood evaluations\n";
  finish(cfg, out, "fit");
  return 0;
}

int cmd_predict(const Common& c) {
  auto cfg = load_config(c);
  const fs::path out = c.out_dir;
  const auto seed = cfg.get_u64("seed", 1);
  const auto d = load_data(cfg);
  const auto ps = load_samples(cfg.get("predict.samples", (out / "samples.csv").string()));
  const auto grid = GridSpec::over_hull(d.data.sites, cfg.get_double("grid.resolution_km", 25.0));
  const auto years = parse_winters(cfg.get("predict.years", "2020"));
  const double threshold = cfg.get_double("predict.threshold", -36.0);
  const int n_draws = std::min<int>(cfg.get_int("predict.draws", 100), static_cast<int>(ps.values.rows()));
  if (n_draws < 1) throw ValidationError("no posterior draws");
  const Eigen::MatrixXd xg = d.design.matrix_at(grid.cells);

  std::vector<ParameterState> draws;
  std::vector<Eigen::VectorXd> u_cells;
  for (int k = 0; k < n_draws; ++k) {
    const auto r = static_cast<Eigen::Index>(static_cast<long>(k) * ps.values.rows() / n_draws);
    draws.push_back(ps.state_at(r, d.data));
    const auto& f = draws.back().field;
    u_cells.push_back(krige_random_effect(d.data.sites, f.u, f.x, f.beta, f.tau2, f.delta, grid.cells, xg));
  }
  fs::create_directories(out);
  std::ofstream mean(out / "mean_map.csv"), exceed(out / "exceedance_map.csv");
  mean << "winter,x_km,y_km,mean_min_c\n";
  exceed << "winter,x_km,y_km,threshold_c,probability\n";
  for (int w : years) {
    const double t = time_covariate(w, winter_length(w) / 2);
    for (std::size_t k = 0; k < grid.cells.size(); ++k) {
      double m = 0.0, p = 0.0;
      for (std::size_t s = 0; s < draws.size(); ++s) {
        const double mu0 = u_cells[s](static_cast<Eigen::Index>(k));
        m += gev_mean_forecast(draws[s].field, mu0, t) / static_cast<double>(draws.size());
        p += exceedance_prob(draws[s].field, mu0, t, threshold) / static_cast<double>(draws.size());
      }
      const auto x = format_double(grid.cells[k].x), y = format_double(grid.cells[k].y);
      mean << w << ',' << x << ',' << y << ',' << format_double(m) << '\n';
      exceed << w << ',' << x << ',' << y << ',' << format_double(threshold) << ',' << format_double(p) << '\n';
    }
  }
  const auto groups = station_groups(cfg, d.stations);
  if (!groups.empty()) {
    const auto stat = group_stat(cfg.get("predict.group_stat", "min"));
    std::ofstream g(out / "group_predictive.csv");
    g << "group,winter,draw,value\n";
    std::uint64_t gi = 0;
    for (const auto& [name, members] : groups) {
      ++gi;
      for (int w : years) {
        const double t = time_covariate(w, winter_length(w) / 2);
        for (std::size_t s = 0; s < draws.size(); ++s) {
          const auto v = group_extreme_predictive(members, d.data.sites, draws[s].field, draws[s].dep, t, stat, 1,
                                                  derive_seed(seed, {gi, static_cast<std::uint64_t>(w), s}));
          g << csv_field(name) << ',' << w << ',' << s << ',' << format_double(v.front()) << '\n';
        }
      }
    }
  }
  finish(cfg, out, "predict");
  return 0;
}

int cmd_diagnose(const Common& c) {
  auto cfg = load_config(c);
  const fs::path out = c.out_dir;
  const auto seed = cfg.get_u64("seed", 1);
  const auto d = load_data(cfg);
  DiagnosticsOptions opt;
  opt.theta_edges = cfg.get_doubles("diagnose.theta_edges", opt.theta_edges);
  opt.n_boot = cfg.get_int("diagnose.bootstrap", opt.n_boot);
  opt.n_rep = cfg.get_int("diagnose.replicates", opt.n_rep);
  opt.group_stat = group_stat(cfg.get("diagnose.group_stat", "min"));
  opt.seed = seed;

  std::optional<PosteriorSamples> ps;
  const auto samples = cfg.get("diagnose.samples", "");
  if (!samples.empty()) {
    ps = load_samples(samples);
    const auto parts = cfg.get("diagnose.partition_samples", "");
    if (!parts.empty()) load_partition_samples(parts, *ps, d.data.years);
  }
  const auto ref_file = cfg.get("diagnose.reference_partitions", "");
  std::optional<std::vector<SetPartition>> ref;
  if (!ref_file.empty())
    ref = load_partitions(ref_file, d.data.years);
  else if (ps && !ps->partitions.empty())
    ref = decluster(cfg, d.data, seed);
  const auto warnings = diagnostics_export(out, d.data, ps ? &*ps : nullptr, station_groups(cfg, d.stations),
                                           ref ? &*ref : nullptr, opt);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  finish(cfg, out, "diagnose");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brown-Resnick models for winter minimum temperatures"};
  app.require_subcommand(1);
  Common common;
  std::string fit_mode;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed (overrides config)");
    sub->add_option("--threads", common.threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", common.out_dir, "output directory")->capture_default_str();
  };
  auto* simulate = app.add_subcommand("simulate", "simulate a dataset or a temperature field");
  auto* decl = app.add_subcommand("decluster", "write declustered partitions");
  auto* fit = app.add_subcommand("fit", "run the MCMC sampler");
  fit->add_option("mode", fit_mode, "m2 (fixed partitions) or m3 (random partitions)")
      ->required()
      ->check(CLI::IsMember({"m2", "m3"}));
  auto* predict = app.add_subcommand("predict", "mean and exceedance maps, group predictive draws");
  auto* diagnose = app.add_subcommand("diagnose", "extremal coefficients, QQ tables, partition diagnostics");
  for (auto* s : {simulate, decl, fit, predict, diagnose}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*decl) return cmd_decluster(common);
    if (*fit) return cmd_fit(common, fit_mode);
    if (*predict) return cmd_predict(common);
    if (*diagnose) return cmd_diagnose(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
