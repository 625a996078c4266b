// Command-line front end: run experiments from config files, run the
// acceptance suite, and dump noise paths or Malliavin blocks for inspection.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "lgir/acceptance.hpp"
#include "lgir/experiments.hpp"

using namespace lgir;

namespace {

int cmd_run(const std::string& config, const std::string& out_arg, int threads, bool timing) {
  ExperimentConfig cfg;
  try {
    cfg = load_config_file(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  }
  RunOptions ro;
  ro.threads = threads;
  ro.timing = timing;
  const ExperimentResult res = run_experiment(cfg, ro);
  const std::string out = out_arg.empty() ? cfg.output : out_arg;
  if (out.empty() || out == "-")
    std::cout << to_csv(res.report, timing);
  else
    write_csv(res.report, out, timing);
  std::ostream& msg = (out.empty() || out == "-") ? std::cerr : std::cout;
  msg << (res.pass ? "PASS" : "FAIL") << " " << to_string(cfg.experiment) << " [" << cfg.hash() << "]: " << res.summary
      << std::endl;
  return res.pass ? 0 : 1;
}

int cmd_verify(const AcceptanceOptions& opt) {
  const auto results = run_acceptance(opt, &std::cout);
  int passed = 0;
  for (const auto& r : results) passed += r.pass ? 1 : 0;
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}

int cmd_dump_path(double T, int N, int m, int dim, std::uint64_t seed, std::uint64_t stream, int refinements,
                  const std::string& out, bool csv) {
  NoisePath path = sample_path(make_grid(T, N, m), dim, seed, stream);
  for (int l = 0; l < refinements; ++l) path = refine(path);
  if (!csv) {
    write_path_binary(path, out);
    return 0;
  }
  std::ofstream f(out);
  if (!f) {
    std::cerr << "cannot write '" << out << "'" << std::endl;
    return 1;
  }
  const Mat B = brownian_partial_sums(path);
  f << "# lgir-path T=" << T << " N=" << N << " m=" << path.grid.m << " seed=" << seed << " stream=" << stream
    << "\n";
  f << "cell";
  for (int c = 0; c < dim; ++c) f << ",xi" << c;
  for (int c = 0; c < dim; ++c) f << ",B" << c;
  f << "\n";
  for (int i = 0; i < path.grid.cells(); ++i) {
    f << i;
    for (int c = 0; c < dim; ++c) f << "," << format_number(path.xi(c, i));
    for (int c = 0; c < dim; ++c) f << "," << format_number(B(c, i + 1));
    f << "\n";
  }
  return 0;
}

int cmd_dump_blocks(const std::string& config, std::uint64_t index, const std::string& out) {
  ExperimentConfig cfg;
  try {
    cfg = load_config_file(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  }
  const SchemeSetup setup = make_setup(cfg, 0);
  const TimeGrid grid = setup.grid;
  const NoisePath path = sample_path(grid, setup.V.dimension(), cfg.seed, index);
  const KineticSample z0 = sample_initial(setup.init, cfg.seed, index);
  const MidpointSchedule sched = make_schedule(setup, grid, index);
  MalliavinBlocks blocks;
  DriftRealization drift;
  switch (cfg.scheme) {
    case Scheme::EmLd: {
      const TrajectoryOD tr = simulate_em_ld(setup.V, path, z0.x);
      blocks = malliavin_blocks_em_ld(setup.V, setup.reference, tr, grid, 1.0, true);
      drift = drift_em_ld(setup.V, setup.reference, tr, grid);
      break;
    }
    case Scheme::Mlmc: {
      const TrajectoryOD tr = simulate_mlmc(setup.V, path, sched, z0.x);
      blocks = malliavin_blocks_mlmc(setup.V, tr, grid, sched, 1.0, true);
      drift = drift_mlmc(setup.V, tr, grid);
      break;
    }
    case Scheme::DmUlmc: {
      const TrajectoryUD tr = simulate_dmulmc(setup.V, path, sched, setup.gamma, z0.x, z0.p);
      blocks = malliavin_blocks_dmulmc(setup.V, tr, grid, sched, setup.gamma, 1.0, true);
      drift = drift_dmulmc(tr, grid, setup.gamma);
      break;
    }
    case Scheme::Ulmc:
      std::cerr << "ULMC has no Malliavin blocks" << std::endl;
      return 2;
  }
  const Mat D = assemble_dense(blocks);
  const LogWeight w = rn_log_weight(drift, blocks, path);
  std::ofstream fo;
  if (!out.empty() && out != "-") {
    fo.open(out);
    if (!fo) {
      std::cerr << "cannot write '" << out << "'" << std::endl;
      return 1;
    }
  }
  std::ostream& f = fo.is_open() ? static_cast<std::ostream&>(fo) : std::cout;
  f << "# lgir-blocks scheme=" << to_string(cfg.scheme) << " N=" << grid.N << " m=" << grid.m
    << " d=" << setup.V.dimension() << " path=" << index << " log_cf_det=" << format_number(w.log_cf_det)
    << " skorohod=" << format_number(w.skorohod) << " energy=" << format_number(w.energy)
    << " log_weight=" << format_number(w.log_weight) << "\n";
  f << "# row/column index = cell * d + coordinate\n";
  for (Eigen::Index r = 0; r < D.rows(); ++r) {
    for (Eigen::Index c = 0; c < D.cols(); ++c) f << (c ? "," : "") << format_number(D(r, c));
    f << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anticipating Girsanov weights for Langevin Monte Carlo schemes"};
  app.require_subcommand(1);

  int threads = 1;
  bool timing = false;
  std::string config, out;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config, "config file")->required();
  run->add_option("--out", out, "CSV output path (default: experiment.output or stdout)");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--timing", timing, "write wall-clock columns");

  AcceptanceOptions acc;
  auto* verify = app.add_subcommand("verify", "run the full acceptance suite");
  verify->add_option("--out-dir", acc.out_dir, "directory for the CSV reports");
  verify->add_option("--threads", acc.threads, "worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--seed", acc.seed, "base seed");

  double T = 1.0;
  int N = 1, m = 8, dim = 1, refinements = 0;
  std::uint64_t seed = 0, stream = 0;
  bool csv = false;
  std::string path_out;
  auto* dump_path = app.add_subcommand("dump-path", "write one noise path");
  dump_path->add_option("--T", T, "time horizon");
  dump_path->add_option("--N", N, "outer steps")->check(CLI::PositiveNumber);
  dump_path->add_option("--m", m, "inner cells per step")->check(CLI::PositiveNumber);
  dump_path->add_option("--dim", dim, "dimension")->check(CLI::PositiveNumber);
  dump_path->add_option("--seed", seed, "seed");
  dump_path->add_option("--stream", stream, "stream (path index)");
  dump_path->add_option("--refine", refinements, "bridge refinements")->check(CLI::NonNegativeNumber);
  dump_path->add_option("--out", path_out, "output file")->required();
  dump_path->add_flag("--csv", csv, "CSV (increments and Brownian path) instead of binary");

  std::string blocks_config, blocks_out;
  std::uint64_t index = 0;
  auto* dump_blocks = app.add_subcommand("dump-blocks", "write the Malliavin matrix of one path");
  dump_blocks->add_option("config", blocks_config, "config file")->required();
  dump_blocks->add_option("--path", index, "path index");
  dump_blocks->add_option("--out", blocks_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, threads, timing);
    if (*verify) return cmd_verify(acc);
    if (*dump_path) return cmd_dump_path(T, N, m, dim, seed, stream, refinements, path_out, csv);
    if (*dump_blocks) return cmd_dump_blocks(blocks_config, index, blocks_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
  return 0;
}
