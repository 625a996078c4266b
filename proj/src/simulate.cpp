#include "lgir/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "lgir/parallel.hpp"
#include "lgir/rng.hpp"

namespace lgir {

InitialLaw point_initial(const Vec& x0, const Vec& p0) {
  return InitialLaw{x0, Vec::Zero(x0.size()), p0, Vec::Zero(p0.size())};
}

InitialLaw stationary_initial(const PotentialModel& V) {
  if (!V.is_quadratic() || !(V.alpha() > 0.0))
    throw std::invalid_argument("stationary initial law needs a strongly convex quadratic V");
  const int d = V.dimension();
  const Vec& lam = V.spectrum();
  InitialLaw law;
  law.x_mean = -V.gradient_offset().cwiseQuotient(lam);
  law.x_std = lam.cwiseSqrt().cwiseInverse();
  law.p_mean = Vec::Zero(d);
  law.p_std = Vec::Ones(d);
  return law;
}

KineticSample sample_initial(const InitialLaw& law, std::uint64_t seed, std::uint64_t stream) {
  const int d = static_cast<int>(law.x_mean.size());
  Vec z(2 * d);
  const CounterRng rng(seed, stream);
  rng.normals(RngPurpose::Initial, 0, 0, z.data(), 2 * d);
  KineticSample s;
  s.x = law.x_mean + law.x_std.cwiseProduct(z.head(d));
  s.p = law.p_mean + law.p_std.cwiseProduct(z.tail(d));
  return s;
}

bool is_underdamped(Scheme scheme) { return scheme == Scheme::Ulmc || scheme == Scheme::DmUlmc; }

MidpointSchedule make_schedule(const SchemeSetup& setup, const TimeGrid& grid, std::uint64_t stream) {
  const bool ud = is_underdamped(setup.scheme);
  if (setup.schedule_mode == ScheduleMode::RandomizedUniform)
    return randomized_schedule(grid, ud, setup.seed, stream);
  return ud ? deterministic_ud_schedule(grid) : deterministic_od_schedule(grid, setup.tau_fraction);
}

namespace {

struct BlockStats {
  double logdet = 0.0;
  double trace = 0.0;
  double rho = 0.0;
  bool negative = false;
  bool singular = false;
};

BlockStats block_stats(const Mat& D) {
  BlockStats s;
  const BlockLogDet ld = block_logdet(D);
  s.logdet = ld.value;
  s.negative = ld.negative;
  s.singular = ld.singular;
  s.trace = D.trace();
  s.rho = spectral_radius_estimate(D);
  return s;
}

// Grid-dependent precomputation shared by all paths of one run.
struct Prepared {
  const SchemeSetup* setup = nullptr;
  TimeGrid grid;
  bool deterministic = true;
  MidpointSchedule schedule;  // valid when deterministic
  UdGridPlan plan;
  UdMidpoints mid;
  bool has_const_block = false;
  BlockStats const_block;
};

Prepared prepare(const SchemeSetup& setup, const TimeGrid& grid) {
  Prepared p;
  p.setup = &setup;
  p.grid = grid;
  p.deterministic = setup.schedule_mode != ScheduleMode::RandomizedUniform;
  const int d = setup.V.dimension();
  if (p.deterministic) p.schedule = make_schedule(setup, grid, 0);
  if (is_underdamped(setup.scheme)) {
    p.plan = setup.scheme == Scheme::Ulmc ? make_ud_endpoint_plan(setup.gamma, grid.h(), grid.m)
                                          : make_ud_grid_plan(setup.gamma, grid.h(), grid.m);
    if (p.deterministic)
      p.mid = make_ud_midpoints(p.plan, p.schedule.tau_minus.at(0), p.schedule.tau_plus.at(0));
  }
  // With a constant Hessian and a fixed schedule every diagonal block is the
  // same matrix, so its determinant, trace and spectral radius are computed once.
  const bool const_hessian =
      setup.V.is_quadratic() && (setup.scheme != Scheme::EmLd || setup.reference.is_quadratic());
  if (const_hessian && p.deterministic && setup.scheme != Scheme::Ulmc) {
    const Mat nodes = Mat::Zero(d, grid.m + 1);
    const Vec zero = Vec::Zero(d);
    Mat D;
    switch (setup.scheme) {
      case Scheme::EmLd:
        D = em_step_sensitivity(setup.V, setup.reference, grid.eta(), nodes, false).D;
        break;
      case Scheme::Mlmc:
        D = mlmc_step_sensitivity(setup.V, grid.eta(), p.schedule.tau_index(0, grid), nodes, zero, false).D;
        break;
      case Scheme::DmUlmc: {
        DmInterpolation seg;
        seg.x = nodes;
        seg.x_minus = zero;
        seg.x_plus = zero;
        D = dmulmc_step_sensitivity(setup.V, p.plan, p.mid, seg, false).D;
        break;
      }
      case Scheme::Ulmc: break;
    }
    p.const_block = block_stats(D);
    p.has_const_block = true;
  }
  return p;
}

PathOutcome evaluate_prepared(const Prepared& prep, const NoisePath& path, const KineticSample& z0) {
  const SchemeSetup& setup = *prep.setup;
  const TimeGrid& grid = prep.grid;
  if (!(path.grid == grid)) throw std::invalid_argument("noise path grid differs from the setup grid");
  const int m = grid.m;
  const double eta = grid.eta();
  PathOutcome out;
  Vec x = z0.x, p = z0.p;
  MidpointSchedule own;
  const MidpointSchedule* sched = &prep.schedule;
  if (!prep.deterministic) {
    own = make_schedule(setup, grid, path.stream);
    sched = &own;
  }
  double psi_xi = 0.0, trace = 0.0, energy = 0.0, logdet = 0.0, rho = 0.0;
  int negative = 0;
  bool singular = false;
  try {
    for (int k = 0; k < grid.N; ++k) {
      const auto xi = path.step_block(k);
      Mat psi;
      Mat D;
      const bool need_block = !prep.has_const_block;
      switch (setup.scheme) {
        case Scheme::EmLd: {
          const Mat nodes = step_em_ld(setup.V, eta, x, xi, k);
          psi = em_step_drift(setup.V, setup.reference, eta, nodes);
          if (need_block) D = em_step_sensitivity(setup.V, setup.reference, eta, nodes, false).D;
          x = nodes.col(m);
          out.gradient_queries += m;
          break;
        }
        case Scheme::Mlmc: {
          const int kt = sched->tau_index(k, grid);
          const MlmcSegment seg = step_mlmc(setup.V, eta, kt, x, xi, k);
          psi = mlmc_step_drift(setup.V, eta, seg.x, seg.x_plus);
          if (need_block) D = mlmc_step_sensitivity(setup.V, eta, kt, seg.x, seg.x_plus, false).D;
          x = seg.x.col(m);
          out.gradient_queries += 2;
          break;
        }
        case Scheme::DmUlmc: {
          UdMidpoints own_mid;
          const UdMidpoints* mid = &prep.mid;
          if (!prep.deterministic) {
            own_mid = make_ud_midpoints(prep.plan, sched->tau_minus.at(k), sched->tau_plus.at(k));
            mid = &own_mid;
          }
          const DmInterpolation seg =
              solve_dmulmc_interpolation(setup.V, prep.plan, *mid, x, p, xi, setup.fixed_point, k);
          psi = dmulmc_step_drift(prep.plan, seg.lambda1, seg.lambda2);
          if (need_block) D = dmulmc_step_sensitivity(setup.V, prep.plan, *mid, seg, false).D;
          x = seg.x.col(m);
          p = seg.p.col(m);
          out.gradient_queries += 3;
          break;
        }
        case Scheme::Ulmc: {
          const KineticState s = step_ulmc(setup.V, prep.plan, x, p, xi, k);
          x = s.x;
          p = s.p;
          out.gradient_queries += 1;
          continue;
        }
      }
      psi_xi += psi.cwiseProduct(xi).sum();
      energy += 0.5 * psi.squaredNorm();
      const BlockStats st = need_block ? block_stats(D) : prep.const_block;
      logdet += st.logdet;
      trace += st.trace;
      rho = std::max(rho, st.rho);
      negative += st.negative ? 1 : 0;
      singular = singular || st.singular;
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    out.weight.invertible = false;
    return out;
  }
  out.x_end = x;
  out.p_end = p;
  LogWeight& w = out.weight;
  w.log_cf_det = logdet;
  w.skorohod = psi_xi - trace;
  w.energy = energy;
  w.spectral_radius = rho;
  w.negative_det_blocks = negative;
  w.invertible = !singular && rho < kSpectralRadiusThreshold;
  w.log_weight = w.log_cf_det - w.skorohod - w.energy;
  return out;
}

NoisePath path_for(const SchemeSetup& setup, std::uint64_t index, int refine_levels) {
  NoisePath path = sample_path(setup.grid, setup.V.dimension(), setup.seed, index);
  for (int l = 0; l < refine_levels; ++l) path = refine(path);
  return path;
}

TimeGrid refined_grid(TimeGrid g, int levels) {
  for (int l = 0; l < levels; ++l) g = g.refined();
  return g;
}

}  // namespace

PathOutcome evaluate_path(const SchemeSetup& setup, const NoisePath& path, const KineticSample& z0) {
  const Prepared prep = prepare(setup, path.grid);
  return evaluate_prepared(prep, path, z0);
}

PathOutcome evaluate_index(const SchemeSetup& setup, std::uint64_t index, int refine_levels) {
  const Prepared prep = prepare(setup, refined_grid(setup.grid, refine_levels));
  return evaluate_prepared(prep, path_for(setup, index, refine_levels),
                           sample_initial(setup.init, setup.seed, index));
}

std::vector<PathOutcome> run_paths(const SchemeSetup& setup, std::size_t n, int threads,
                                   std::uint64_t first_stream, int refine_levels) {
  const Prepared prep = prepare(setup, refined_grid(setup.grid, refine_levels));
  std::vector<PathOutcome> out(n);
  parallel_for_chunks(n, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::uint64_t stream = first_stream + i;
      out[i] = evaluate_prepared(prep, path_for(setup, stream, refine_levels),
                                 sample_initial(setup.init, setup.seed, stream));
    }
  });
  return out;
}

}  // namespace lgir
