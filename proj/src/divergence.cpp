#include "lgir/divergence.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lgir/exp_integrals.hpp"
#include "lgir/ou_flow.hpp"
#include "lgir/parallel.hpp"

namespace lgir {

namespace {

constexpr double kRejectionLimit = 0.01;

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

// Mean and its jackknife standard error (for a mean the jackknife reduces to s / sqrt(n)).
Moments mean_and_se(const std::vector<double>& v) {
  Moments out;
  const std::size_t n = v.size();
  if (n == 0) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.mean = pairwise_sum(v) / static_cast<double>(n);
  if (n < 2) return out;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
  out.se = std::sqrt(pairwise_sum(sq) / (static_cast<double>(n) * static_cast<double>(n - 1)));
  return out;
}

template <class F>
DivergenceEstimate mean_estimate(const std::vector<LogWeight>& weights, const Direction& direction,
                                 F&& value_of) {
  DivergenceEstimate est;
  est.kind = DivergenceKind::KL;
  est.direction = direction;
  std::vector<double> v;
  v.reserve(weights.size());
  for (const LogWeight& w : weights) {
    if (weight_usable(w))
      v.push_back(value_of(w));
    else
      ++est.n_rejected;
  }
  est.n_paths = static_cast<long>(weights.size());
  const Moments mo = mean_and_se(v);
  est.value = mo.mean;
  est.std_error = mo.se;
  est.reliable = std::isfinite(est.value) &&
                 static_cast<double>(est.n_rejected) < kRejectionLimit * static_cast<double>(est.n_paths);
  return est;
}

}  // namespace

bool weight_usable(const LogWeight& w) {
  return w.invertible && std::isfinite(w.log_weight) && std::isfinite(w.energy) &&
         std::isfinite(w.log_cf_det);
}

DivergenceEstimate estimate_kl(const std::vector<LogWeight>& weights, const Direction& direction) {
  return mean_estimate(weights, direction, [](const LogWeight& w) { return -w.log_weight; });
}

DivergenceEstimate estimate_kl_control_variate(const std::vector<LogWeight>& weights,
                                               const Direction& direction) {
  return mean_estimate(weights, direction,
                       [](const LogWeight& w) { return w.energy - w.log_cf_det; });
}

DivergenceEstimate estimate_renyi(const std::vector<LogWeight>& weights, double q,
                                  const Direction& direction) {
  if (!(q > 1.0)) throw std::invalid_argument("Renyi order q must exceed 1");
  DivergenceEstimate est;
  est.kind = DivergenceKind::Renyi;
  est.q = q;
  est.direction = direction;
  est.n_paths = static_cast<long>(weights.size());
  std::vector<double> a;
  a.reserve(weights.size());
  for (const LogWeight& w : weights) {
    if (weight_usable(w))
      a.push_back(-(q - 1.0) * w.log_weight);
    else
      ++est.n_rejected;
  }
  const std::size_t n = a.size();
  est.reliable = static_cast<double>(est.n_rejected) < kRejectionLimit * static_cast<double>(est.n_paths);
  if (n == 0) {
    est.value = std::numeric_limits<double>::quiet_NaN();
    est.reliable = false;
    return est;
  }
  double amax = a[0];
  for (double x : a) amax = std::max(amax, x);
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(a[i] - amax);
  const double s = pairwise_sum(e);
  const double dn = static_cast<double>(n);
  est.value = (std::log(s / dn) + amax) / (q - 1.0);
  if (n >= 2) {
    std::vector<double> loo(n);
    const double tiny = std::numeric_limits<double>::min();
    for (std::size_t i = 0; i < n; ++i)
      loo[i] = (std::log(std::max(s - e[i], tiny) / (dn - 1.0)) + amax) / (q - 1.0);
    const double mean_loo = pairwise_sum(loo) / dn;
    for (std::size_t i = 0; i < n; ++i) loo[i] = (loo[i] - mean_loo) * (loo[i] - mean_loo);
    est.std_error = std::sqrt((dn - 1.0) / dn * pairwise_sum(loo));
  }
  if (!std::isfinite(est.value)) est.reliable = false;
  return est;
}

MeanEstimate estimate_normalization(const std::vector<LogWeight>& weights) {
  MeanEstimate out;
  out.n_paths = static_cast<long>(weights.size());
  std::vector<double> v;
  v.reserve(weights.size());
  for (const LogWeight& w : weights) {
    if (weight_usable(w))
      v.push_back(std::exp(w.log_weight));
    else
      ++out.n_rejected;
  }
  const Moments mo = mean_and_se(v);
  out.mean = mo.mean;
  out.std_error = mo.se;
  return out;
}

double gaussian_kl(const Vec& mean1, const Mat& cov1, const Vec& mean2, const Mat& cov2) {
  const Eigen::Index d = mean1.size();
  if (mean2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d)
    throw std::domain_error("gaussian_kl: dimension mismatch");
  auto check_sym = [](const Mat& c) {
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff()))
      throw std::domain_error("gaussian_kl: covariance is not symmetric");
  };
  check_sym(cov1);
  check_sym(cov2);
  const Eigen::LLT<Mat> l1(cov1), l2(cov2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success)
    throw std::domain_error("gaussian_kl: covariance is not positive definite");
  // Whitened form: 1/2 [sum (mu - 1 - log mu) + |L2^{-1} (m2 - m1)|^2], mu the
  // eigenvalues of L2^{-1} cov1 L2^{-T}; avoids cancellation for nearby laws.
  const Mat L2 = l2.matrixL();
  const Mat Linv = L2.triangularView<Eigen::Lower>().solve(Mat::Identity(d, d));
  Mat W = Linv * cov1 * Linv.transpose();
  W = 0.5 * (W + W.transpose());
  const Vec mu = Eigen::SelfAdjointEigenSolver<Mat>(W, Eigen::EigenvaluesOnly).eigenvalues();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(mu[i] > 0.0)) throw std::domain_error("gaussian_kl: covariance is not positive definite");
    const double t = mu[i] - 1.0;
    if (std::abs(t) < 1e-3)
      kl += t * t * (0.5 - t * (1.0 / 3.0 - t * (0.25 - t * 0.2)));
    else
      kl += t - std::log1p(t);
  }
  const Vec z = Linv * (mean2 - mean1);
  return 0.5 * (kl + z.squaredNorm());
}

double pinsker_tv_bound(double kl) {
  if (!(kl >= 0.0)) throw std::domain_error("pinsker_tv_bound: KL must be non-negative");
  return std::min(1.0, std::sqrt(kl / 2.0));
}

GaussianLaw gaussian_initial(const InitialLaw& init, bool underdamped) {
  GaussianLaw g;
  if (!underdamped) {
    g.mean = init.x_mean;
    g.cov = init.x_std.cwiseAbs2().asDiagonal();
    return g;
  }
  const Eigen::Index d = init.x_mean.size();
  g.mean.resize(2 * d);
  g.mean << init.x_mean, init.p_mean;
  Vec var(2 * d);
  var << init.x_std.cwiseAbs2(), init.p_std.cwiseAbs2();
  g.cov = var.asDiagonal();
  return g;
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Stochastic-integral features of one underdamped step per coordinate:
//   u0 = int_0^h E1(s,h) dB, u1 = int_0^h E2(s,h) dB,
//   u2 = int_0^{tau-} E2(s,tau-) dB, u3 = int_0^{tau+} E2(s,tau+) dB,
// all times sqrt(2 gamma).  Returns a square-root factor of their covariance.
Mat feature_factor(double gamma, double h, double tau_minus, double tau_plus, int k) {
  std::vector<double> breaks = {0.0, tau_minus, tau_plus, h};
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> gx, gw;
  gauss_legendre(24, gx, gw);
  auto kernel = [&](int a, double s) {
    switch (a) {
      case 0: return exp_kernel(1, gamma, s, h);
      case 1: return exp_kernel(2, gamma, s, h);
      case 2: return s < tau_minus ? exp_kernel(2, gamma, s, tau_minus) : 0.0;
      default: return s < tau_plus ? exp_kernel(2, gamma, s, tau_plus) : 0.0;
    }
  };
  Mat cov = Mat::Zero(k, k);
  for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
    const double lo = breaks[seg], hi = breaks[seg + 1];
    if (hi <= lo) continue;
    for (std::size_t q = 0; q < gx.size(); ++q) {
      const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[q];
      const double wq = 0.5 * (hi - lo) * gw[q];
      Vec kv(k);
      for (int a = 0; a < k; ++a) kv[a] = kernel(a, s);
      cov += wq * kv * kv.transpose();
    }
  }
  cov *= 2.0 * gamma;
  const Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

template <class F>
AffineStepMap probe_affine(int n, int noise_dim, F&& step) {
  AffineStepMap map;
  const Vec z0 = Vec::Zero(n);
  const Vec u0 = Vec::Zero(noise_dim);
  map.b = step(z0, u0);
  map.A.resize(n, n);
  map.B.resize(n, noise_dim);
  for (int i = 0; i < n; ++i) map.A.col(i) = step(Vec::Unit(n, i), u0) - map.b;
  for (int j = 0; j < noise_dim; ++j) map.B.col(j) = step(z0, Vec::Unit(noise_dim, j)) - map.b;
  return map;
}

}  // namespace

AffineStepMap scheme_step_map(Scheme scheme, const PotentialModel& V, const TimeGrid& grid,
                              const MidpointSchedule& schedule, double gamma, MarginalMode mode) {
  if (!V.is_quadratic()) throw std::invalid_argument("scheme marginals need a quadratic potential");
  if (schedule.mode == ScheduleMode::RandomizedUniform)
    throw std::invalid_argument("scheme marginals need a deterministic schedule");
  const int d = V.dimension();
  const int m = grid.m;
  const double h = grid.h(), eta = grid.eta();
  auto as_block = [d, m](const Vec& u) { return Eigen::Map<const Mat>(u.data(), d, m); };
  switch (scheme) {
    case Scheme::EmLd:
      return probe_affine(d, d * m, [&](const Vec& z, const Vec& u) -> Vec {
        return step_em_ld(V, eta, z, as_block(u)).col(m);
      });
    case Scheme::Mlmc: {
      const int kt = schedule.tau_index(0, grid);
      return probe_affine(d, d * m, [&](const Vec& z, const Vec& u) -> Vec {
        return step_mlmc(V, eta, kt, z, as_block(u)).x.col(m);
      });
    }
    case Scheme::Ulmc:
    case Scheme::DmUlmc:
      break;
  }
  const UdGridPlan plan = make_ud_endpoint_plan(gamma, h, m);
  const bool dm = scheme == Scheme::DmUlmc;
  const double tm = dm ? schedule.tau_minus.at(0) : 0.0;
  const double tp = dm ? schedule.tau_plus.at(0) : 0.0;
  UdMidpoints mid;
  if (dm) mid = make_ud_midpoints(plan, tm, tp);
  auto kinetic = [d](const Vec& x, const Vec& p) {
    Vec z(2 * d);
    z << x, p;
    return z;
  };
  if (mode == MarginalMode::Grid) {
    return probe_affine(2 * d, d * m, [&](const Vec& z, const Vec& u) -> Vec {
      if (dm) {
        const DmMarginal s = step_dmulmc_marginal(V, plan, mid, z.head(d), z.tail(d), as_block(u));
        return kinetic(s.x, s.p);
      }
      const KineticState s = step_ulmc(V, plan, z.head(d), z.tail(d), as_block(u));
      return kinetic(s.x, s.p);
    });
  }
  const int k = dm ? 4 : 2;
  const Mat L = feature_factor(gamma, h, tm, tp, k);
  return probe_affine(2 * d, d * k, [&](const Vec& z, const Vec& u) -> Vec {
    const Mat f = Eigen::Map<const Mat>(u.data(), d, k) * L.transpose();  // d x k features
    const Vec x = z.head(d), p = z.tail(d);
    const Vec g0 = V.gradient(x);
    if (!dm)
      return kinetic(x + plan.e2h * p - plan.e3h * g0 + f.col(1), plan.e1h * p - plan.e2h * g0 + f.col(0));
    const Vec xm = x + mid.e2m * p - mid.e3m * g0 + f.col(2);
    const Vec xp = x + mid.e2p * p - mid.e3p * g0 + f.col(3);
    return kinetic(x + plan.e2h * p - plan.e3h * V.gradient(xm) + f.col(1),
                   plan.e1h * p - plan.e2h * V.gradient(xp) + f.col(0));
  });
}

GaussianLaw scheme_marginal_gaussian(Scheme scheme, const PotentialModel& V, const TimeGrid& grid,
                                     const MidpointSchedule& schedule, double gamma,
                                     const GaussianLaw& initial, MarginalMode mode) {
  const AffineStepMap map = scheme_step_map(scheme, V, grid, schedule, gamma, mode);
  if (initial.mean.size() != map.A.rows())
    throw std::invalid_argument("initial law has the wrong state dimension");
  const Mat noise = map.B * map.B.transpose();
  GaussianLaw g = initial;
  for (int k = 0; k < grid.N; ++k) {
    g.mean = map.A * g.mean + map.b;
    g.cov = map.A * g.cov * map.A.transpose() + noise;
    g.cov = 0.5 * (g.cov + g.cov.transpose());
  }
  return g;
}

GaussianLaw diffusion_marginal_gaussian(const PotentialModel& V, bool underdamped, double gamma,
                                        double T, const GaussianLaw& initial) {
  if (!V.is_quadratic()) throw std::invalid_argument("diffusion marginals need a quadratic potential");
  const LinearSde sde = underdamped ? kinetic_langevin_sde(V, gamma) : langevin_sde(V);
  const LinearTransition tr = linear_sde_transition(sde.A, sde.a, sde.S, T);
  GaussianLaw g;
  g.mean = tr.Phi * initial.mean + tr.shift;
  g.cov = tr.Phi * initial.cov * tr.Phi.transpose() + tr.Q;
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  return g;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& y_se) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs >= 2 points");
  if (!y_se.empty() && y_se.size() != y.size()) throw std::invalid_argument("slope fit: SE size mismatch");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::domain_error("slope fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  SlopeFit f;
  f.points = static_cast<int>(n);
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - f.intercept - f.slope * lx[i];
    ssr += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  f.fit_se = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
  if (!y_se.empty()) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = (lx[i] - mx) / sxx;
      const double rel = y_se[i] / y[i];
      v += c * c * rel * rel;
    }
    f.mc_se = std::sqrt(v);
  }
  return f;
}

LocalErrorReport local_error_sweep(Scheme scheme, const PotentialModel& V, double gamma,
                                   const std::vector<double>& hs, const InitialLaw& init,
                                   const LocalErrorOptions& opt) {
  const int d = V.dimension();
  const bool ud = is_underdamped(scheme);
  const bool quad = V.is_quadratic();
  const int m = opt.m;
  if (m < 1 || opt.n_paths < 2) throw std::invalid_argument("local error sweep needs m >= 1 and >= 2 paths");
  LocalErrorReport rep;
  rep.scheme = scheme;
  for (double h : hs) {
    const TimeGrid grid = make_grid(h, 1, m);
    const double eta = grid.eta();
    const int kt = std::min(m - 1, static_cast<int>(std::lround(opt.tau_fraction * m)));
    UdGridPlan plan, cell_plan;
    UdMidpoints mid;
    if (ud) {
      plan = make_ud_endpoint_plan(gamma, h, m);
      cell_plan = make_ud_endpoint_plan(gamma, eta, 1);
      if (scheme == Scheme::DmUlmc) mid = make_ud_midpoints(plan, h / 3.0, h / 2.0);
    }
    LinearTransition exact;
    if (quad) {
      const LinearSde sde = ud ? kinetic_langevin_sde(V, gamma) : langevin_sde(V);
      exact = linear_sde_transition(sde.A, sde.a, sde.S, h);
    }
    // Scheme endpoint (x, p) from (x0, p0) and the step increments.
    auto scheme_step = [&](const Vec& x0, const Vec& p0, const Mat& xi) -> Vec {
      Vec z(ud ? 2 * d : d);
      switch (scheme) {
        case Scheme::EmLd:
          z = x0 - h * V.gradient(x0) + std::sqrt(2.0 * eta) * xi.rowwise().sum();
          break;
        case Scheme::Mlmc:
          z = step_mlmc(V, eta, kt, x0, xi).x.col(m);
          break;
        case Scheme::Ulmc: {
          const KineticState s = step_ulmc(V, plan, x0, p0, xi);
          z << s.x, s.p;
          break;
        }
        case Scheme::DmUlmc: {
          const DmMarginal s = step_dmulmc_marginal(V, plan, mid, x0, p0, xi);
          z << s.x, s.p;
          break;
        }
      }
      return z;
    };
    const std::size_t n = static_cast<std::size_t>(opt.n_paths);
    const int nz = ud ? 2 * d : d;
    std::vector<double> sx(n), sp(n), wx(n), wp(n);
    Mat delta(nz, n);
    parallel_for_chunks(n, opt.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const NoisePath path = sample_path(grid, d, opt.seed, i);
        const KineticSample z0 = sample_initial(init, opt.seed, i);
        const Mat xi = path.step_block(0);
        Vec ref(nz);
        if (quad) {
          if (ud) {
            const KineticTrajectory tr = exact_ou_flow_uld(V, gamma, path, z0.x, z0.p);
            ref << tr.x.col(m), tr.p.col(m);
          } else {
            ref = exact_ou_flow_ld(V, path, z0.x).col(m);
          }
        } else if (ud) {
          Vec x = z0.x, p = z0.p;
          for (int j = 0; j < m; ++j) {
            const KineticState s = step_ulmc(V, cell_plan, x, p, xi.col(j));
            x = s.x;
            p = s.p;
          }
          ref << x, p;
        } else {
          ref = step_em_ld(V, eta, z0.x, xi).col(m);
        }
        const Vec dz = ref - scheme_step(z0.x, z0.p, xi);
        delta.col(static_cast<Eigen::Index>(i)) = dz;
        sx[i] = dz.head(d).squaredNorm();
        sp[i] = ud ? dz.tail(d).squaredNorm() : 0.0;
        if (quad) {
          Vec z0v(nz);
          if (ud)
            z0v << z0.x, z0.p;
          else
            z0v = z0.x;
          const Vec mean_exact = exact.Phi * z0v + exact.shift;
          const Vec dw = mean_exact - scheme_step(z0.x, z0.p, Mat::Zero(d, m));
          wx[i] = dw.head(d).squaredNorm();
          wp[i] = ud ? dw.tail(d).squaredNorm() : 0.0;
        }
      }
    });
    LocalErrorPoint pt;
    pt.h = h;
    pt.m = m;
    const Moments msx = mean_and_se(sx), msp = mean_and_se(sp);
    pt.strong_x = msx.mean;
    pt.strong_x_se = msx.se;
    pt.strong_p = msp.mean;
    pt.strong_p_se = msp.se;
    if (quad) {
      const Moments mwx = mean_and_se(wx), mwp = mean_and_se(wp);
      pt.weak_x = mwx.mean;
      pt.weak_x_se = mwx.se;
      pt.weak_p = mwp.mean;
      pt.weak_p_se = mwp.se;
    } else {
      // |mean of the coupled differences|^2 with a delta-method SE.
      auto weak_block = [&](int off, double& val, double& se) {
        val = 0.0;
        double var = 0.0;
        for (int c = off; c < off + d; ++c) {
          std::vector<double> row(n);
          for (std::size_t i = 0; i < n; ++i) row[i] = delta(c, static_cast<Eigen::Index>(i));
          const Moments mo = mean_and_se(row);
          val += mo.mean * mo.mean;
          var += 4.0 * mo.mean * mo.mean * mo.se * mo.se;
        }
        se = std::sqrt(var);
      };
      weak_block(0, pt.weak_x, pt.weak_x_se);
      if (ud) weak_block(d, pt.weak_p, pt.weak_p_se);
    }
    rep.points.push_back(pt);
  }
  if (rep.points.size() >= 2) {
    std::vector<double> h, a, ase, b, bse, c, cse, e, ese;
    for (const LocalErrorPoint& p : rep.points) {
      h.push_back(p.h);
      a.push_back(p.strong_x);
      ase.push_back(p.strong_x_se);
      b.push_back(p.strong_p);
      bse.push_back(p.strong_p_se);
      c.push_back(p.weak_x);
      cse.push_back(p.weak_x_se);
      e.push_back(p.weak_p);
      ese.push_back(p.weak_p_se);
    }
    auto safe_fit = [&](const std::vector<double>& y, const std::vector<double>& se) {
      for (double v : y)
        if (!(v > 0.0)) return SlopeFit{};
      return fit_loglog(h, y, se);
    };
    rep.strong_x = safe_fit(a, ase);
    rep.weak_x = safe_fit(c, cse);
    if (ud) {
      rep.strong_p = safe_fit(b, bse);
      rep.weak_p = safe_fit(e, ese);
    }
  }
  return rep;
}

}  // namespace lgir
