#include "lgir/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lgir/parallel.hpp"

namespace lgir {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Row factory carrying the configuration columns.
struct RowMaker {
  const ExperimentConfig& cfg;
  std::string hash;

  ReportRow operator()(const std::string& metric, double h = kNA, const std::string& scheme = "") const {
    ReportRow r;
    r.experiment = to_string(cfg.experiment);
    r.config_hash = hash;
    r.scheme = scheme.empty() ? to_string(cfg.scheme) : scheme;
    r.metric = metric;
    r.h = h;
    r.d = cfg.potential.dim;
    r.m = cfg.m;
    r.gamma = cfg.gamma;
    return r;
  }
};

std::vector<LogWeight> weights_of(const std::vector<PathOutcome>& outs) {
  std::vector<LogWeight> w;
  w.reserve(outs.size());
  for (const PathOutcome& o : outs) w.push_back(o.weight);
  return w;
}

long failures_of(const std::vector<PathOutcome>& outs) {
  long n = 0;
  for (const PathOutcome& o : outs) n += o.failed ? 1 : 0;
  return n;
}

const char* status(bool ok) { return ok ? "pass" : "fail"; }

// ---------------------------------------------------------------------------

ExperimentResult run_normalization(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  const auto hs = cfg.step_sizes();
  for (std::size_t i = 0; i < cfg.steps.size(); ++i) {
    const SchemeSetup setup = make_setup(cfg, i);
    const auto t0 = Clock::now();
    const auto outs = run_paths(setup, static_cast<std::size_t>(cfg.n_paths), opt.threads);
    const double ms = elapsed_ms(t0);
    const MeanEstimate ne = estimate_normalization(weights_of(outs));
    const double dev = std::abs(ne.mean - 1.0);
    const bool ok = std::isfinite(ne.mean) && dev <= Thresholds::kNormalizationSigmas * ne.std_error &&
                    static_cast<double>(ne.n_rejected) < 0.01 * static_cast<double>(ne.n_paths);
    ReportRow r = row("mean_weight", hs[i]);
    r.q = 1.0;
    r.estimate = ne.mean;
    r.se = ne.std_error;
    r.rejections = static_cast<double>(ne.n_rejected);
    r.runtime_ms = ms;
    r.status = status(ok);
    res.report.rows.push_back(r);
    ReportRow a = row("abs_deviation", hs[i]);
    a.estimate = dev;
    a.se = ne.std_error;
    a.status = status(ok);
    res.report.rows.push_back(a);
    ReportRow f = row("failed_paths", hs[i]);
    f.estimate = static_cast<double>(failures_of(outs));
    res.report.rows.push_back(f);
    res.pass = res.pass && ok;
    if (i == 0) {
      res.facts["mean_weight"] = ne.mean;
      res.facts["se"] = ne.std_error;
      res.facts["rejected"] = static_cast<double>(ne.n_rejected);
      res.facts["runtime_ms"] = ms;
    }
    res.summary += "h=" + fmt(hs[i]) + ": E[M]=" + fmt(ne.mean, 6) + " +- " + fmt(ne.std_error, 3) + "; ";
  }
  return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_adapted(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  const SchemeSetup setup = make_setup(cfg, 0);
  const TimeGrid grid = setup.grid;
  const int d = setup.V.dimension();
  const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
  std::vector<double> diff(n), logdet(n), lw(n);
  parallel_for_chunks(n, opt.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const NoisePath path = sample_path(grid, d, cfg.seed, i);
      const KineticSample z0 = sample_initial(setup.init, cfg.seed, i);
      const TrajectoryOD traj = simulate_em_ld(setup.V, path, z0.x);
      const DriftRealization drift = drift_em_ld(setup.V, setup.reference, traj, grid);
      const MalliavinBlocks blocks = malliavin_blocks_em_ld(setup.V, setup.reference, traj, grid, 1.0);
      const LogWeight w = rn_log_weight(drift, blocks, path);
      // Classical Girsanov exponent for the adapted drift difference.
      const double s = std::sqrt(grid.eta() / 2.0);
      double classical = 0.0;
      for (int c = 0; c < grid.cells(); ++c) {
        const Vec x = traj.x.col(c);
        const Vec psi = s * (setup.reference.gradient(x) - setup.V.gradient(x));
        classical += -psi.dot(path.xi.col(c)) - 0.5 * psi.squaredNorm();
      }
      diff[i] = std::abs(w.log_weight - classical);
      logdet[i] = w.log_cf_det;
      lw[i] = w.log_weight;
    }
  });
  double max_diff = 0.0, max_logdet = 0.0;
  bool exact_zero = true;
  for (std::size_t i = 0; i < n; ++i) {
    max_diff = std::max(max_diff, diff[i]);
    max_logdet = std::max(max_logdet, std::abs(logdet[i]));
    exact_zero = exact_zero && logdet[i] == 0.0;
  }
  const bool ok = exact_zero && max_diff <= Thresholds::kAdaptedTolerance;
  ReportRow a = row("max_abs_log_cf_det", grid.h());
  a.estimate = max_logdet;
  a.status = status(exact_zero);
  ReportRow b = row("max_abs_diff_classical", grid.h());
  b.estimate = max_diff;
  b.status = status(max_diff <= Thresholds::kAdaptedTolerance);
  res.report.rows = {a, b};
  res.pass = ok;
  res.facts["max_abs_log_cf_det"] = max_logdet;
  res.facts["max_abs_diff"] = max_diff;
  res.summary = "max|log_cf_det|=" + fmt(max_logdet) + ", max|logw - classical|=" + fmt(max_diff);
  return res;
}

// ---------------------------------------------------------------------------

// Full-path drift for scheme `setup.scheme` as a function of the increments.
Mat path_drift(const SchemeSetup& setup, const NoisePath& path, const MidpointSchedule& sched,
               const KineticSample& z0, const FixedPointOptions& fp) {
  if (setup.scheme == Scheme::Mlmc) {
    const TrajectoryOD traj = simulate_mlmc(setup.V, path, sched, z0.x);
    return drift_mlmc(setup.V, traj, path.grid).psi;
  }
  const TrajectoryUD traj = simulate_dmulmc(setup.V, path, sched, setup.gamma, z0.x, z0.p, fp);
  return drift_dmulmc(traj, path.grid, setup.gamma).psi;
}

ExperimentResult run_fd_malliavin(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  if (cfg.scheme != Scheme::Mlmc && cfg.scheme != Scheme::DmUlmc)
    throw ConfigError("fd-malliavin supports M-LMC and DM-ULMC");
  const SchemeSetup setup = make_setup(cfg, 0);
  const TimeGrid grid = setup.grid;
  const int d = setup.V.dimension();
  FixedPointOptions fp;
  fp.tolerance = 1e-15;
  fp.max_iterations = 500;
  const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
  std::vector<double> max_abs(n), max_rel(n), violations(n);
  parallel_for_chunks(n, opt.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const NoisePath path = sample_path(grid, d, cfg.seed, i);
      const KineticSample z0 = sample_initial(setup.init, cfg.seed, i);
      const MidpointSchedule sched = make_schedule(setup, grid, i);
      MalliavinBlocks blocks;
      if (setup.scheme == Scheme::Mlmc) {
        const TrajectoryOD traj = simulate_mlmc(setup.V, path, sched, z0.x);
        blocks = malliavin_blocks_mlmc(setup.V, traj, grid, sched, 1.0, true);
      } else {
        const TrajectoryUD traj = simulate_dmulmc(setup.V, path, sched, setup.gamma, z0.x, z0.p, fp);
        blocks = malliavin_blocks_dmulmc(setup.V, traj, grid, sched, setup.gamma, 1.0, true);
      }
      const Mat D = assemble_dense(blocks);
      NoisePath probe = path;
      const Eigen::Index total = path.xi.size();
      double worst_abs = 0.0, worst_rel = 0.0;
      long bad = 0;
      for (Eigen::Index c = 0; c < total; ++c) {
        const double x = path.xi.data()[c];
        probe.xi.data()[c] = x + Thresholds::kFdProbe;
        const Mat up = path_drift(setup, probe, sched, z0, fp);
        probe.xi.data()[c] = x - Thresholds::kFdProbe;
        const Mat dn = path_drift(setup, probe, sched, z0, fp);
        probe.xi.data()[c] = x;
        const Mat delta = (up - dn) / (2.0 * Thresholds::kFdProbe);
        const Eigen::Map<const Vec> fd(delta.data(), total);
        for (Eigen::Index r = 0; r < total; ++r) {
          const double err = std::abs(D(r, c) - fd[r]);
          worst_abs = std::max(worst_abs, err);
          if (std::abs(fd[r]) > 0.0) worst_rel = std::max(worst_rel, err / std::abs(fd[r]));
          if (err > std::max(Thresholds::kFdRelative * std::abs(fd[r]), Thresholds::kFdAbsolute)) ++bad;
        }
      }
      max_abs[i] = worst_abs;
      max_rel[i] = worst_rel;
      violations[i] = static_cast<double>(bad);
    }
  });
  double wa = 0.0, wr = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wa = std::max(wa, max_abs[i]);
    wr = std::max(wr, max_rel[i]);
    nv += violations[i];
  }
  const bool ok = nv == 0.0;
  ReportRow a = row("max_abs_error", grid.h());
  a.estimate = wa;
  ReportRow r = row("max_rel_error", grid.h());
  r.estimate = wr;
  ReportRow v = row("violations", grid.h());
  v.estimate = nv;
  v.status = status(ok);
  res.report.rows = {a, r, v};
  res.pass = ok;
  res.facts["max_abs_error"] = wa;
  res.facts["max_rel_error"] = wr;
  res.facts["violations"] = nv;
  res.summary = to_string(cfg.scheme) + ": max abs err " + fmt(wa) + ", violations " + fmt(nv);
  return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_eta_refinement(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  if (cfg.randomized) throw ConfigError("eta-refinement needs a deterministic schedule");
  const SchemeSetup setup = make_setup(cfg, 0);
  const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
  const int levels = cfg.refinements + 1;
  std::vector<std::vector<double>> lw(levels, std::vector<double>(n));
  std::vector<bool> failed(n, false);
  for (int l = 0; l < levels; ++l) {
    const auto outs = run_paths(setup, n, opt.threads, 0, l);
    for (std::size_t i = 0; i < n; ++i) {
      lw[l][i] = outs[i].weight.log_weight;
      if (outs[i].failed || !weight_usable(outs[i].weight)) failed[i] = true;
    }
  }
  bool ok = true;
  double prev = kNA;
  for (int l = 0; l + 1 < levels; ++l) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!failed[i]) worst = std::max(worst, std::abs(lw[l][i] - lw[l + 1][i]));
    const bool dec = l == 0 || worst < prev;
    ok = ok && dec;
    ReportRow r = row("max_abs_logw_diff", setup.grid.h());
    r.m = static_cast<double>(cfg.m) * std::pow(2.0, l);
    r.estimate = worst;
    r.status = l == 0 ? "" : status(dec);
    res.report.rows.push_back(r);
    res.facts["diff_" + std::to_string(l)] = worst;
    res.summary += fmt(worst) + (l + 2 < levels ? " > " : "");
    prev = worst;
  }
  long nf = 0;
  for (bool f : failed) nf += f ? 1 : 0;
  ReportRow f = row("failed_paths", setup.grid.h());
  f.estimate = static_cast<double>(nf);
  res.report.rows.push_back(f);
  res.pass = ok && nf == 0;
  res.summary = to_string(cfg.scheme) + " max|logw(m)-logw(2m)|: " + res.summary;
  return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_kl_sweep(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  const auto hs = cfg.step_sizes();
  std::vector<double> cv, cv_se, plain;
  bool dp_ok = true, reliable = true, have_marginal = true;
  double total_ms = 0.0;
  const bool ud = is_underdamped(cfg.scheme);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const SchemeSetup setup = make_setup(cfg, i);
    const auto t0 = Clock::now();
    const auto outs = run_paths(setup, static_cast<std::size_t>(cfg.n_paths), opt.threads);
    const double ms = elapsed_ms(t0);
    total_ms += ms;
    const auto w = weights_of(outs);
    const DivergenceEstimate kl = estimate_kl(w);
    const DivergenceEstimate kc = estimate_kl_control_variate(w);
    reliable = reliable && kl.reliable && kc.reliable;
    ReportRow r = row("kl", hs[i]);
    r.q = 1.0;
    r.estimate = kl.value;
    r.se = kl.std_error;
    r.rejections = static_cast<double>(kl.n_rejected);
    r.runtime_ms = ms;
    r.status = kl.reliable ? "ok" : "unreliable";
    res.report.rows.push_back(r);
    ReportRow c = row("kl_control_variate", hs[i]);
    c.q = 1.0;
    c.estimate = kc.value;
    c.se = kc.std_error;
    c.rejections = static_cast<double>(kc.n_rejected);
    c.status = kc.reliable ? "ok" : "unreliable";
    res.report.rows.push_back(c);
    for (double q : cfg.q) {
      const DivergenceEstimate rq = estimate_renyi(w, q);
      ReportRow rr = row("renyi", hs[i]);
      rr.q = q;
      rr.estimate = rq.value;
      rr.se = rq.std_error;
      rr.rejections = static_cast<double>(rq.n_rejected);
      rr.status = rq.reliable ? "ok" : "unreliable";
      res.report.rows.push_back(rr);
    }
    ReportRow tv = row("tv_bound", hs[i]);
    tv.estimate = pinsker_tv_bound(std::max(0.0, kc.value));
    res.report.rows.push_back(tv);
    if (setup.V.is_quadratic() && !cfg.randomized) {
      const GaussianLaw g0 = gaussian_initial(setup.init, ud);
      const MidpointSchedule sched = make_schedule(setup, setup.grid, 0);
      const GaussianLaw gs = scheme_marginal_gaussian(cfg.scheme, setup.V, setup.grid, sched, cfg.gamma, g0);
      const GaussianLaw gd = diffusion_marginal_gaussian(setup.V, ud, cfg.gamma, cfg.T, g0);
      const double mk = gaussian_kl(gs.mean, gs.cov, gd.mean, gd.cov);
      const bool ok = mk <= kc.value + Thresholds::kDataProcessingSigmas * kc.std_error;
      dp_ok = dp_ok && ok;
      ReportRow mr = row("marginal_kl", hs[i]);
      mr.estimate = mk;
      mr.status = status(ok);
      res.report.rows.push_back(mr);
      res.facts["marginal_kl_" + std::to_string(i)] = mk;
    } else {
      have_marginal = false;
    }
    cv.push_back(kc.value);
    cv_se.push_back(kc.std_error);
    plain.push_back(kl.value);
    res.facts["kl_cv_" + std::to_string(i)] = kc.value;
    res.facts["kl_cv_se_" + std::to_string(i)] = kc.std_error;
    res.facts["kl_plain_" + std::to_string(i)] = kl.value;
    res.facts["kl_plain_se_" + std::to_string(i)] = kl.std_error;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < cv.size(); ++i)
    if (hs[i] < hs[i - 1] ? !(cv[i] < cv[i - 1]) : !(cv[i] > cv[i - 1])) monotone = false;
  double threshold = kNA;
  if (cfg.scheme == Scheme::Mlmc) threshold = Thresholds::kMlmcKlSlope;
  if (cfg.scheme == Scheme::DmUlmc) threshold = Thresholds::kDmKlSlope;
  bool slope_ok = true;
  bool positive = true;
  for (double v : cv) positive = positive && v > 0.0;
  if (hs.size() >= 2 && positive) {
    const SlopeFit fit = fit_loglog(hs, cv, cv_se);
    slope_ok = std::isnan(threshold) || fit.slope >= threshold;
    ReportRow s = row("kl_slope");
    s.estimate = fit.r2;
    s.slope = fit.slope;
    s.se = fit.mc_se;
    s.status = status(slope_ok && monotone);
    res.report.rows.push_back(s);
    res.facts["slope"] = fit.slope;
    res.facts["slope_se"] = fit.mc_se;
    res.facts["r2"] = fit.r2;
    res.summary = to_string(cfg.scheme) + " KL slope " + fmt(fit.slope) + " (threshold " + fmt(threshold) + ")";
    bool plain_positive = true;
    for (double v : plain) plain_positive = plain_positive && v > 0.0;
    if (plain_positive) {
      const SlopeFit pf = fit_loglog(hs, plain);
      ReportRow ps = row("kl_plain_slope");
      ps.estimate = pf.r2;
      ps.slope = pf.slope;
      res.report.rows.push_back(ps);
    }
  } else {
    slope_ok = hs.size() < 2 ? true : false;
    res.summary = to_string(cfg.scheme) + " KL estimates not all positive";
  }
  res.report.comments.push_back("kl_control_variate = mean of (1/2 |psi|^2 - log_cf_det); the Skorohod term has mean zero");
  res.facts["monotone"] = monotone ? 1.0 : 0.0;
  res.facts["data_processing"] = (dp_ok && have_marginal) ? 1.0 : 0.0;
  res.facts["runtime_ms"] = total_ms;
  res.facts["reliable"] = reliable ? 1.0 : 0.0;
  res.pass = slope_ok && monotone && dp_ok && reliable;
  res.summary += monotone ? ", monotone" : ", NOT monotone";
  if (have_marginal) res.summary += dp_ok ? ", data processing holds" : ", data processing VIOLATED";
  return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_local_error(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  const PotentialModel V = make_potential(cfg.potential);
  LocalErrorOptions lo;
  lo.m = cfg.reference_m;
  lo.n_paths = cfg.n_paths;
  lo.seed = cfg.seed;
  lo.threads = opt.threads;
  lo.tau_fraction = cfg.tau_fraction;
  const auto t0 = Clock::now();
  const LocalErrorReport rep = local_error_sweep(cfg.scheme, V, cfg.gamma, cfg.step_sizes(), make_initial(cfg, V), lo);
  const double ms = elapsed_ms(t0);
  const bool ud = is_underdamped(cfg.scheme);
  for (const LocalErrorPoint& p : rep.points) {
    auto add = [&](const std::string& metric, double v, double se) {
      ReportRow r = row(metric, p.h);
      r.m = p.m;
      r.estimate = v;
      r.se = se;
      res.report.rows.push_back(r);
    };
    add("strong_x", p.strong_x, p.strong_x_se);
    add("weak_x", p.weak_x, p.weak_x_se);
    if (ud) {
      add("strong_p", p.strong_p, p.strong_p_se);
      add("weak_p", p.weak_p, p.weak_p_se);
    }
  }
  auto add_slope = [&](const std::string& metric, const SlopeFit& f, double threshold) {
    ReportRow r = row(metric);
    r.m = cfg.reference_m;
    r.estimate = f.r2;
    r.slope = f.slope;
    r.se = f.mc_se;
    r.runtime_ms = ms;
    bool ok = true;
    if (!std::isnan(threshold)) {
      ok = f.points >= 4 && f.slope - Thresholds::kSlopeSigmas * f.mc_se >= threshold;
      r.status = status(ok);
    }
    res.report.rows.push_back(r);
    res.facts[metric] = f.slope;
    res.facts[metric + "_se"] = f.mc_se;
    res.facts[metric + "_r2"] = f.r2;
    return ok;
  };
  const bool dm = cfg.scheme == Scheme::DmUlmc;
  bool ok = true;
  ok = add_slope("strong_x_slope", rep.strong_x, kNA) && ok;
  ok = add_slope("weak_x_slope", rep.weak_x, kNA) && ok;
  if (ud) {
    ok = add_slope("strong_p_slope", rep.strong_p, dm ? Thresholds::kDmStrongMomentumSlope : kNA) && ok;
    ok = add_slope("weak_p_slope", rep.weak_p, dm ? Thresholds::kDmWeakMomentumSlope : kNA) && ok;
  }
  res.pass = ok;
  res.facts["runtime_ms"] = ms;
  res.summary = to_string(cfg.scheme) + " local error slopes: strong x " + fmt(rep.strong_x.slope) + ", weak x " +
                fmt(rep.weak_x.slope);
  if (ud) res.summary += ", strong p " + fmt(rep.strong_p.slope) + ", weak p " + fmt(rep.weak_p.slope);
  return res;
}

// ---------------------------------------------------------------------------

ExperimentResult run_trace(const ExperimentConfig& cfg, const RunOptions& opt) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  ExperimentConfig mcfg = cfg;
  mcfg.scheme = Scheme::Mlmc;
  const SchemeSetup base = make_setup(mcfg, 0);
  const int d = base.V.dimension();
  const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
  const std::string scheme = to_string(Scheme::Mlmc);

  // Trace limits along nested refinements of one base path per index.
  const int m0 = cfg.m_list.front();
  std::vector<double> gaps_ra, gaps_r2;
  for (int mm : cfg.m_list) {
    const TimeGrid grid = make_grid(cfg.T, cfg.steps.front(), mm);
    std::vector<double> a2(n), ra(n), lra(n), r2(n), lr2(n);
    parallel_for_chunks(n, opt.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        NoisePath path = sample_path(make_grid(cfg.T, cfg.steps.front(), m0), d, cfg.seed, i);
        while (path.grid.m < mm) path = refine(path);
        if (path.grid.m != mm) path = sample_path(grid, d, cfg.seed, i);
        const KineticSample z0 = sample_initial(base.init, cfg.seed, i);
        const MidpointSchedule sched = deterministic_od_schedule(grid, cfg.tau_fraction);
        const TrajectoryOD traj = simulate_mlmc(base.V, path, sched, z0.x);
        const TraceDiagnostics td = trace_diagnostics_mlmc(base.V, traj, grid, sched);
        a2[i] = td.tr_a2;
        ra[i] = std::abs(td.tr_ra - td.limit_ra);
        lra[i] = td.limit_ra;
        r2[i] = std::abs(td.tr_r2 - td.limit_r2);
        lr2[i] = td.limit_r2;
      }
    });
    auto mean = [&](const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(n); };
    const double gap_ra = mean(ra), gap_r2 = mean(r2);
    gaps_ra.push_back(gap_ra);
    gaps_r2.push_back(gap_r2);
    const double h = grid.h();
    auto add = [&](const std::string& metric, double v) {
      ReportRow r = row(metric, h, scheme);
      r.m = mm;
      r.estimate = v;
      res.report.rows.push_back(r);
    };
    add("tr_a2", mean(a2));
    add("limit_ra", mean(lra));
    add("gap_ra", gap_ra);
    add("limit_r2", mean(lr2));
    add("gap_r2", gap_r2);
  }
  bool trace_ok = true;
  for (std::size_t k = 0; k + 1 < gaps_ra.size(); ++k) {
    const double ratio = gaps_ra[k] / gaps_ra[k + 1];
    const bool ok = ratio >= Thresholds::kTraceGapRatio;
    trace_ok = trace_ok && ok;
    ReportRow r = row("gap_ra_ratio", cfg.T / cfg.steps.front(), scheme);
    r.m = cfg.m_list[k + 1];
    r.estimate = ratio;
    r.status = status(ok);
    res.report.rows.push_back(r);
    res.facts["gap_ra_ratio_" + std::to_string(k)] = ratio;
  }
  // tr(R^2) has a closed form on the grid; its gap must vanish to rounding.
  double worst_r2 = 0.0;
  for (double g : gaps_r2) worst_r2 = std::max(worst_r2, g);
  const bool r2_ok = worst_r2 <= 1e-10;
  res.facts["max_gap_r2"] = worst_r2;
  res.facts["trace_ok"] = (trace_ok && r2_ok) ? 1.0 : 0.0;

  // Carleman-Fredholm expansion: exact log_cf_det against -1/2 tr(D^2).
  std::vector<double> gaps;
  const auto hs = cfg.step_sizes();
  for (std::size_t gi = 0; gi < cfg.steps.size(); ++gi) {
    const TimeGrid grid = cfg.grid(gi);
    std::vector<double> gap(n);
    parallel_for_chunks(n, opt.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const NoisePath path = sample_path(grid, d, cfg.seed, i);
        const KineticSample z0 = sample_initial(base.init, cfg.seed, i);
        const MidpointSchedule sched = deterministic_od_schedule(grid, cfg.tau_fraction);
        const TrajectoryOD traj = simulate_mlmc(base.V, path, sched, z0.x);
        const MalliavinBlocks blocks = malliavin_blocks_mlmc(base.V, traj, grid, sched, 1.0);
        const double exact = carleman_fredholm_logdet(blocks).value;
        double quad = 0.0;
        for (const Mat& D : blocks.diag) quad += -0.5 * (D * D).trace();
        gap[i] = std::abs(exact - quad);
      }
    });
    const double g = pairwise_sum(gap) / static_cast<double>(n);
    gaps.push_back(g);
    ReportRow r = row("cf_expansion_gap", hs[gi], scheme);
    r.estimate = g;
    res.report.rows.push_back(r);
  }
  bool expansion_ok = true;
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
    const double ratio = gaps[k] / gaps[k + 1];
    const bool ok = ratio >= Thresholds::kExpansionRatio;
    expansion_ok = expansion_ok && ok;
    ReportRow r = row("cf_expansion_ratio", hs[k + 1], scheme);
    r.estimate = ratio;
    r.status = status(ok);
    res.report.rows.push_back(r);
    res.facts["cf_ratio_" + std::to_string(k)] = ratio;
  }
  res.facts["expansion_ok"] = expansion_ok ? 1.0 : 0.0;
  res.pass = trace_ok && r2_ok && expansion_ok;
  std::string ratios;
  for (std::size_t k = 0; k + 1 < gaps_ra.size(); ++k) ratios += fmt(gaps_ra[k] / gaps_ra[k + 1], 3) + " ";
  std::string cf;
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) cf += fmt(gaps[k] / gaps[k + 1], 3) + " ";
  res.summary = "trace gap ratios " + ratios + "| max tr(R^2) gap " + fmt(worst_r2) + " | expansion ratios " + cf;
  return res;
}

// ---------------------------------------------------------------------------

struct AffineGaussian {
  Mat A;
  Vec b;
  Mat Q;
};

// g2 after g1.
AffineGaussian compose(const AffineGaussian& g2, const AffineGaussian& g1) {
  AffineGaussian r;
  r.A = g2.A * g1.A;
  r.b = g2.A * g1.b + g2.b;
  r.Q = g2.A * g1.Q * g2.A.transpose() + g2.Q;
  r.Q = 0.5 * (r.Q + r.Q.transpose());
  return r;
}

PotentialModel doubled(const PotentialSpec& spec) {
  PotentialSpec s = spec;
  s.dim = 2 * spec.dim;
  if (spec.spectrum.size() > 0) {
    s.spectrum.resize(2 * spec.spectrum.size());
    s.spectrum << spec.spectrum, spec.spectrum;
  }
  return make_potential(s);
}

ExperimentResult run_complexity(const ExperimentConfig& cfg, const RunOptions&) {
  ExperimentResult res;
  const RowMaker row{cfg, cfg.hash()};
  const PotentialModel V = make_potential(cfg.potential);
  const InitialLaw init = make_initial(cfg, V);
  const std::vector<Scheme> schemes = {Scheme::Mlmc, Scheme::Ulmc, Scheme::DmUlmc};
  std::map<Scheme, double> exponent;
  res.report.comments.push_back("qualitative: only orderings of the fitted exponents are asserted");
  for (Scheme s : schemes) {
    const GaussianLaw g0 = gaussian_initial(init, is_underdamped(s));
    std::vector<double> inv_eps, steps;
    for (double eps : cfg.epsilons) {
      const ComplexityPoint p = required_steps(s, V, cfg.T, cfg.m, cfg.gamma, g0, eps);
      ReportRow r = row("required_steps", p.steps > 0 ? cfg.T / p.steps : kNA, to_string(s));
      r.q = eps;  // the q column carries the accuracy target for this table
      r.estimate = static_cast<double>(p.steps);
      r.se = p.kl;
      r.slope = kNA;
      r.status = p.steps > 0 ? "ok" : "unreachable";
      res.report.rows.push_back(r);
      ReportRow gq = row("gradient_queries", p.steps > 0 ? cfg.T / p.steps : kNA, to_string(s));
      gq.q = eps;
      gq.estimate = static_cast<double>(p.gradient_queries);
      res.report.rows.push_back(gq);
      if (p.steps >= 4) {
        inv_eps.push_back(1.0 / eps);
        steps.push_back(static_cast<double>(p.steps));
      }
    }
    double ex = kNA;
    if (inv_eps.size() >= 2) {
      const SlopeFit f = fit_loglog(inv_eps, steps);
      ex = f.slope;
      ReportRow r = row("exponent_N_vs_inv_eps", kNA, to_string(s));
      r.estimate = f.r2;
      r.slope = f.slope;
      r.se = f.fit_se;
      res.report.rows.push_back(r);
    }
    exponent[s] = ex;
    res.facts["exponent_" + to_string(s)] = ex;
  }
  // Dimension doubling at a mid-range accuracy.
  const double eps_mid = cfg.epsilons[cfg.epsilons.size() / 2];
  const PotentialModel V2 = doubled(cfg.potential);
  InitialLaw init2 = cfg.initial == InitialKind::Stationary ? stationary_initial(V2) : init;
  if (cfg.initial == InitialKind::Point) {
    init2.x_mean.resize(2 * cfg.potential.dim);
    init2.x_mean << init.x_mean, init.x_mean;
    init2.p_mean.resize(2 * cfg.potential.dim);
    init2.p_mean << init.p_mean, init.p_mean;
    init2.x_std = Vec::Zero(2 * cfg.potential.dim);
    init2.p_std = Vec::Zero(2 * cfg.potential.dim);
  }
  std::map<Scheme, double> factor;
  for (Scheme s : schemes) {
    const bool ud = is_underdamped(s);
    const ComplexityPoint a = required_steps(s, V, cfg.T, cfg.m, cfg.gamma, gaussian_initial(init, ud), eps_mid);
    const ComplexityPoint b = required_steps(s, V2, cfg.T, cfg.m, cfg.gamma, gaussian_initial(init2, ud), eps_mid);
    const double f = (a.steps > 0 && b.steps > 0) ? static_cast<double>(b.steps) / a.steps : kNA;
    factor[s] = f;
    ReportRow r = row("dimension_doubling_factor", kNA, to_string(s));
    r.q = eps_mid;
    r.d = 2 * cfg.potential.dim;
    r.estimate = f;
    res.report.rows.push_back(r);
    res.facts["doubling_" + to_string(s)] = f;
  }
  const double em = exponent[Scheme::Mlmc], eu = exponent[Scheme::Ulmc], ed = exponent[Scheme::DmUlmc];
  const bool dm_le_u = ed <= eu;
  const bool u_le_m = eu <= em;
  const bool dim_order = factor[Scheme::Mlmc] >= factor[Scheme::DmUlmc];
  ReportRow o1 = row("ordering_DM_le_ULMC", kNA, "all");
  o1.estimate = dm_le_u ? 1 : 0;
  o1.status = status(dm_le_u);
  ReportRow o2 = row("ordering_ULMC_le_MLMC", kNA, "all");
  o2.estimate = u_le_m ? 1 : 0;
  o2.status = status(u_le_m);
  ReportRow o3 = row("ordering_dimension_MLMC_ge_DM", kNA, "all");
  o3.estimate = dim_order ? 1 : 0;
  o3.status = status(dim_order);
  res.report.rows.push_back(o1);
  res.report.rows.push_back(o2);
  res.report.rows.push_back(o3);
  res.facts["ordering_dm_le_ulmc"] = dm_le_u;
  res.facts["ordering_ulmc_le_mlmc"] = u_le_m;
  res.facts["ordering_dimension"] = dim_order;
  res.pass = dm_le_u && u_le_m;
  res.summary = "exponents N ~ eps^-r: M-LMC " + fmt(em, 3) + ", ULMC " + fmt(eu, 3) + ", DM-ULMC " + fmt(ed, 3) +
                " (qualitative)";
  return res;
}

}  // namespace

long gradient_queries_per_step(Scheme scheme) {
  switch (scheme) {
    case Scheme::EmLd: return 1;
    case Scheme::Mlmc: return 2;
    case Scheme::Ulmc: return 1;
    case Scheme::DmUlmc: return 3;
  }
  return 1;
}

double scheme_marginal_kl(Scheme scheme, const PotentialModel& V, double T, long N, int m, double gamma,
                          const GaussianLaw& initial) {
  const TimeGrid grid = make_grid(T, static_cast<int>(N), m);
  const bool ud = is_underdamped(scheme);
  const MidpointSchedule sched = ud ? deterministic_ud_schedule(grid) : deterministic_od_schedule(grid, 0.5);
  const AffineStepMap map = scheme_step_map(scheme, V, grid, sched, gamma, MarginalMode::Continuum);
  AffineGaussian step{map.A, map.b, map.B * map.B.transpose()};
  const Eigen::Index n = map.A.rows();
  AffineGaussian total{Mat::Identity(n, n), Vec::Zero(n), Mat::Zero(n, n)};
  for (long k = N; k > 0; k >>= 1) {
    if (k & 1) total = compose(step, total);
    step = compose(step, step);
  }
  GaussianLaw g;
  g.mean = total.A * initial.mean + total.b;
  g.cov = total.A * initial.cov * total.A.transpose() + total.Q;
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  const GaussianLaw gd = diffusion_marginal_gaussian(V, ud, gamma, T, initial);
  return gaussian_kl(g.mean, g.cov, gd.mean, gd.cov);
}

ComplexityPoint required_steps(Scheme scheme, const PotentialModel& V, double T, int m, double gamma,
                               const GaussianLaw& initial, double epsilon, long n_max) {
  ComplexityPoint p;
  p.epsilon = epsilon;
  const double target = epsilon * epsilon;
  auto kl = [&](long N) { return scheme_marginal_kl(scheme, V, T, N, m, gamma, initial); };
  // Exponential search for a feasible N, then bisection for the least one.
  long hi = 1;
  double k_hi = kl(hi);
  while (k_hi > target) {
    if (hi >= n_max) return p;
    hi = std::min(n_max, hi * 2);
    k_hi = kl(hi);
  }
  long lo = hi / 2;  // infeasible (or zero)
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    const double k = kl(mid);
    if (k <= target) {
      hi = mid;
      k_hi = k;
    } else {
      lo = mid;
    }
  }
  p.steps = hi;
  p.kl = k_hi;
  p.gradient_queries = hi * gradient_queries_per_step(scheme);
  return p;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  check_step_bounds(cfg);
  ExperimentResult res;
  switch (cfg.experiment) {
    case Experiment::Normalization: res = run_normalization(cfg, options); break;
    case Experiment::AdaptedEquivalence: res = run_adapted(cfg, options); break;
    case Experiment::FdMalliavin: res = run_fd_malliavin(cfg, options); break;
    case Experiment::EtaRefinement: res = run_eta_refinement(cfg, options); break;
    case Experiment::KlOrderSweep: res = run_kl_sweep(cfg, options); break;
    case Experiment::LocalErrorSweep: res = run_local_error(cfg, options); break;
    case Experiment::TraceDiagnostics: res = run_trace(cfg, options); break;
    case Experiment::ComplexityTable: res = run_complexity(cfg, options); break;
  }
  res.report.comments.insert(res.report.comments.begin(),
                             "experiment=" + to_string(cfg.experiment) + " config_hash=" + cfg.hash() +
                                 " seed=" + std::to_string(cfg.seed));
  return res;
}

}  // namespace lgir
