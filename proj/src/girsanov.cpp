#include "lgir/girsanov.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lgir {

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::EmLd: return "EM-LD";
    case Scheme::Mlmc: return "M-LMC";
    case Scheme::Ulmc: return "ULMC";
    case Scheme::DmUlmc: return "DM-ULMC";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "EM-LD") return Scheme::EmLd;
  if (name == "M-LMC") return Scheme::Mlmc;
  if (name == "ULMC") return Scheme::Ulmc;
  if (name == "DM-ULMC") return Scheme::DmUlmc;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

// ---------------------------------------------------------------------------
// Euler-Maruyama against a reference potential (adapted drift).

Mat em_step_drift(const PotentialModel& V, const PotentialModel& reference, double eta,
                  const CMatRef& nodes) {
  const int d = static_cast<int>(nodes.rows());
  const int m = static_cast<int>(nodes.cols()) - 1;
  const double s = std::sqrt(eta / 2.0);
  Mat psi(d, m);
  Vec gv(d), gu(d);
  for (int i = 0; i < m; ++i) {
    V.gradient_into(nodes.col(i), gv);
    reference.gradient_into(nodes.col(i), gu);
    psi.col(i) = s * (gu - gv);
  }
  return psi;
}

StepSensitivity em_step_sensitivity(const PotentialModel& V, const PotentialModel& reference,
                                    double eta, const CMatRef& nodes, bool full) {
  const int d = static_cast<int>(nodes.rows());
  const int m = static_cast<int>(nodes.cols()) - 1;
  const int nx = m * d;
  const double s = std::sqrt(eta / 2.0);
  const double noise = std::sqrt(2.0 * eta);
  // J = d X_i / d (xi_0..xi_{m-1}, x0).
  Mat J = Mat::Zero(d, nx + d);
  J.rightCols(d).setIdentity();
  Mat hv(d, d), hu(d, d);
  StepSensitivity out;
  out.D = Mat::Zero(nx, nx);
  if (full) out.Dz.resize(nx, d);
  for (int i = 0; i < m; ++i) {
    V.hessian_into(nodes.col(i), hv);
    reference.hessian_into(nodes.col(i), hu);
    const Mat row = s * (hu - hv) * J;
    out.D.middleRows(i * d, d) = row.leftCols(nx);
    if (full) out.Dz.middleRows(i * d, d) = row.rightCols(d);
    J = (Mat::Identity(d, d) - eta * hv) * J;
    J.middleCols(i * d, d) += noise * Mat::Identity(d, d);
  }
  if (full) {
    out.Exi = J.leftCols(nx);
    out.Ez = J.rightCols(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// M-LMC.

Mat mlmc_step_drift(const PotentialModel& V, double eta, const CMatRef& nodes,
                    const CVecRef& x_plus) {
  const int d = static_cast<int>(nodes.rows());
  const int m = static_cast<int>(nodes.cols()) - 1;
  const double s = std::sqrt(eta / 2.0);
  Vec gp(d), g(d);
  V.gradient_into(x_plus, gp);
  Mat psi(d, m);
  for (int i = 0; i < m; ++i) {
    V.gradient_into(nodes.col(i), g);
    psi.col(i) = s * (g - gp);
  }
  return psi;
}

StepSensitivity mlmc_step_sensitivity(const PotentialModel& V, double eta, int tau_index,
                                      const CMatRef& nodes, const CVecRef& x_plus, bool full) {
  const int d = static_cast<int>(nodes.rows());
  const int m = static_cast<int>(nodes.cols()) - 1;
  const int nx = m * d;
  const Mat I = Mat::Identity(d, d);
  Mat hp(d, d), hi(d, d);
  V.hessian_into(x_plus, hp);
  StepSensitivity out;
  out.D = Mat::Zero(nx, nx);
  Mat p0;
  const double tau = tau_index * eta;
  if (full) {
    Mat h0(d, d);
    V.hessian_into(nodes.col(0), h0);
    p0 = I - tau * h0;  // d X+ / d x0
    out.Dz.resize(nx, d);
  }
  const double s = std::sqrt(eta / 2.0);
  for (int i = 0; i < m; ++i) {
    V.hessian_into(nodes.col(i), hi);
    // d psi_i / d xi_j = eta [H_i 1{j<i} - (i eta H_i H+ + H+) 1{j<k_tau}].
    const Mat mid = -eta * (i * eta * hi * hp + hp);
    for (int j = 0; j < m; ++j) {
      auto blk = out.D.block(i * d, j * d, d, d);
      if (j < i) blk += eta * hi;
      if (j < tau_index) blk += mid;
    }
    if (full) out.Dz.middleRows(i * d, d) = s * (hi * (I - i * eta * hp * p0) - hp * p0);
  }
  if (full) {
    const double h = m * eta;
    out.Ez = I - h * hp * p0;
    out.Exi.resize(d, nx);
    const double noise = std::sqrt(2.0 * eta);
    for (int j = 0; j < m; ++j)
      out.Exi.middleCols(j * d, d) = noise * (j < tau_index ? Mat(I - h * hp) : I);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DM-ULMC.

Mat dmulmc_step_drift(const UdGridPlan& plan, const CVecRef& lambda1, const CVecRef& lambda2) {
  const int d = static_cast<int>(lambda1.size());
  Mat psi(d, plan.m);
  for (int j = 0; j < plan.m; ++j)
    psi.col(j) = plan.psi_scale * (plan.c1[j] * lambda1 + plan.c2[j] * lambda2);
  return psi;
}

StepSensitivity dmulmc_step_sensitivity(const PotentialModel& V, const UdGridPlan& plan,
                                        const UdMidpoints& mid, const DmInterpolation& seg,
                                        bool full) {
  const int d = static_cast<int>(seg.x.rows());
  const int m = plan.m;
  const int nx = m * d;
  const int nc = full ? nx + 2 * d : nx;  // columns: xi, then (x0, p0)
  const int nn = (m + 1) * d;
  const Mat I = Mat::Identity(d, d);

  std::vector<Mat> hn(static_cast<std::size_t>(m + 1), Mat(d, d));
  for (int n = 0; n <= m; ++n) V.hessian_into(seg.x.col(n), hn[static_cast<std::size_t>(n)]);
  Mat hm(d, d), hp(d, d);
  V.hessian_into(seg.x_minus, hm);
  V.hessian_into(seg.x_plus, hp);
  const Mat& h0 = hn[0];

  // Derivatives of the midpoints.
  Mat dxm = Mat::Zero(d, nc), dxp = Mat::Zero(d, nc);
  for (int j = 0; j < m; ++j) {
    dxm.middleCols(j * d, d) = mid.w_minus[j] * I;
    dxp.middleCols(j * d, d) = mid.w_plus[j] * I;
  }
  if (full) {
    dxm.middleCols(nx, d) = I - mid.e3m * h0;
    dxm.middleCols(nx + d, d) = mid.e2m * I;
    dxp.middleCols(nx, d) = I - mid.e3p * h0;
    dxp.middleCols(nx + d, d) = mid.e2p * I;
  }
  const Mat k1 = plan.e2h * hp * dxp;  // d G^p
  const Mat k2 = plan.e3h * hm * dxm;  // d G^x

  // (I + [Cpos(k,n) H_n]) Y = R - F2 (K1, K2).
  Mat sys = Mat::Identity(nn, nn);
  for (int k = 0; k <= m; ++k)
    for (int n = 0; n <= m; ++n)
      if (plan.Cpos(k, n) != 0.0)
        sys.block(k * d, n * d, d, d) += plan.Cpos(k, n) * hn[static_cast<std::size_t>(n)];
  Mat rhs = Mat::Zero(nn, nc);
  for (int k = 0; k <= m; ++k) {
    auto rk = rhs.middleRows(k * d, d);
    for (int j = 0; j < k; ++j) rk.middleCols(j * d, d) = plan.noise_scale * plan.W2(k, j) * I;
    if (full) {
      rk.middleCols(nx, d) = I;
      rk.middleCols(nx + d, d) = plan.e2_nodes[k] * I;
    }
    rk -= plan.F2(k, 0) * k1 + plan.F2(k, 1) * k2;
  }
  const Mat Y = sys.partialPivLu().solve(rhs);

  Mat dd1 = -k1, dd2 = -k2;
  for (int n = 0; n <= m; ++n) {
    const Mat hy = hn[static_cast<std::size_t>(n)] * Y.middleRows(n * d, d);
    dd1 += plan.Omega1(m, n) * hy;
    dd2 += plan.Omega2(m, n) * hy;
  }
  const Mat dl1 = plan.gram_inv(0, 0) * dd1 + plan.gram_inv(0, 1) * dd2;
  const Mat dl2 = plan.gram_inv(1, 0) * dd1 + plan.gram_inv(1, 1) * dd2;

  StepSensitivity out;
  out.D.resize(nx, nx);
  if (full) out.Dz.resize(nx, 2 * d);
  for (int j = 0; j < m; ++j) {
    const Mat row = plan.psi_scale * (plan.c1[j] * dl1 + plan.c2[j] * dl2);
    out.D.middleRows(j * d, d) = row.leftCols(nx);
    if (full) out.Dz.middleRows(j * d, d) = row.rightCols(2 * d);
  }
  if (full) {
    // Endpoint (x_h, p_h): x_h is node m; p_h = e1h p0 + noise - G^p.
    Mat dph = -k1;
    for (int j = 0; j < m; ++j) dph.middleCols(j * d, d) += plan.noise_scale * plan.W1(m, j) * I;
    dph.middleCols(nx + d, d) += plan.e1h * I;
    Mat dz(2 * d, nc);
    dz.topRows(d) = Y.middleRows(m * d, d);
    dz.bottomRows(d) = dph;
    out.Exi = dz.leftCols(nx);
    out.Ez = dz.rightCols(2 * d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-path assembly.

DriftRealization drift_em_ld(const PotentialModel& V, const PotentialModel& reference,
                             const TrajectoryOD& traj, const TimeGrid& grid) {
  if (traj.x.cols() != grid.cells() + 1) throw std::invalid_argument("trajectory/grid mismatch");
  DriftRealization dr;
  dr.scheme = Scheme::EmLd;
  dr.psi.resize(traj.x.rows(), grid.cells());
  for (int k = 0; k < grid.N; ++k)
    dr.psi.middleCols(k * grid.m, grid.m) =
        em_step_drift(V, reference, grid.eta(), traj.x.middleCols(k * grid.m, grid.m + 1));
  dr.energy = 0.5 * dr.psi.squaredNorm();
  return dr;
}

DriftRealization drift_mlmc(const PotentialModel& V, const TrajectoryOD& traj,
                            const TimeGrid& grid) {
  if (traj.x.cols() != grid.cells() + 1 || traj.x_plus.cols() != grid.N)
    throw std::invalid_argument("trajectory/grid mismatch");
  DriftRealization dr;
  dr.scheme = Scheme::Mlmc;
  dr.psi.resize(traj.x.rows(), grid.cells());
  for (int k = 0; k < grid.N; ++k)
    dr.psi.middleCols(k * grid.m, grid.m) = mlmc_step_drift(
        V, grid.eta(), traj.x.middleCols(k * grid.m, grid.m + 1), traj.x_plus.col(k));
  dr.energy = 0.5 * dr.psi.squaredNorm();
  return dr;
}

DriftRealization drift_dmulmc(const TrajectoryUD& traj, const TimeGrid& grid, double gamma) {
  if (traj.x.cols() != grid.cells() + 1 || traj.lambda1.cols() != grid.N)
    throw std::invalid_argument("trajectory/grid mismatch");
  if (static_cast<int>(traj.iterations.size()) != grid.N)
    throw std::invalid_argument("trajectory has unsolved steps");
  const UdGridPlan plan = make_ud_grid_plan(gamma, grid.h(), grid.m);
  DriftRealization dr;
  dr.scheme = Scheme::DmUlmc;
  dr.psi.resize(traj.x.rows(), grid.cells());
  for (int k = 0; k < grid.N; ++k)
    dr.psi.middleCols(k * grid.m, grid.m) =
        dmulmc_step_drift(plan, traj.lambda1.col(k), traj.lambda2.col(k));
  dr.energy = 0.5 * dr.psi.squaredNorm();
  return dr;
}

namespace {

// Chains per-step sensitivities into the strictly lower blocks.
class LowerBlockChain {
 public:
  void add(int k, const StepSensitivity& s, MalliavinBlocks& out) {
    std::vector<Mat> row;
    for (std::size_t l = 0; l < jac_.size(); ++l) row.push_back(s.Dz * jac_[l]);
    out.lower.push_back(std::move(row));
    for (Mat& j : jac_) j = (s.Ez * j).eval();
    jac_.push_back(s.Exi);
    (void)k;
  }

 private:
  std::vector<Mat> jac_;  // d z_k / d xi_l for l < k
};

void scale_blocks(MalliavinBlocks& b, double q) {
  b.q = q;
  for (Mat& m : b.diag) m *= q;
  for (auto& row : b.lower)
    for (Mat& m : row) m *= q;
}

}  // namespace

MalliavinBlocks malliavin_blocks_em_ld(const PotentialModel& V, const PotentialModel& reference,
                                       const TrajectoryOD& traj, const TimeGrid& grid, double q,
                                       bool with_lower) {
  MalliavinBlocks b;
  LowerBlockChain chain;
  for (int k = 0; k < grid.N; ++k) {
    StepSensitivity s = em_step_sensitivity(V, reference, grid.eta(),
                                            traj.x.middleCols(k * grid.m, grid.m + 1), with_lower);
    if (with_lower) chain.add(k, s, b);
    b.diag.push_back(std::move(s.D));
  }
  scale_blocks(b, q);
  return b;
}

MalliavinBlocks malliavin_blocks_mlmc(const PotentialModel& V, const TrajectoryOD& traj,
                                      const TimeGrid& grid, const MidpointSchedule& schedule,
                                      double q, bool with_lower) {
  MalliavinBlocks b;
  LowerBlockChain chain;
  for (int k = 0; k < grid.N; ++k) {
    StepSensitivity s =
        mlmc_step_sensitivity(V, grid.eta(), schedule.tau_index(k, grid),
                              traj.x.middleCols(k * grid.m, grid.m + 1), traj.x_plus.col(k), with_lower);
    if (with_lower) chain.add(k, s, b);
    b.diag.push_back(std::move(s.D));
  }
  scale_blocks(b, q);
  return b;
}

MalliavinBlocks malliavin_blocks_dmulmc(const PotentialModel& V, const TrajectoryUD& traj,
                                        const TimeGrid& grid, const MidpointSchedule& schedule,
                                        double gamma, double q, bool with_lower) {
  if (static_cast<int>(traj.iterations.size()) != grid.N)
    throw std::invalid_argument("trajectory has unsolved steps");
  const UdGridPlan plan = make_ud_grid_plan(gamma, grid.h(), grid.m);
  MalliavinBlocks b;
  LowerBlockChain chain;
  for (int k = 0; k < grid.N; ++k) {
    const UdMidpoints mid = make_ud_midpoints(plan, schedule.tau_minus.at(k), schedule.tau_plus.at(k));
    DmInterpolation seg;
    seg.x = traj.x.middleCols(k * grid.m, grid.m + 1);
    seg.x_minus = traj.x_minus.col(k);
    seg.x_plus = traj.x_plus.col(k);
    StepSensitivity s = dmulmc_step_sensitivity(V, plan, mid, seg, with_lower);
    if (with_lower) chain.add(k, s, b);
    b.diag.push_back(std::move(s.D));
  }
  scale_blocks(b, q);
  return b;
}

Mat assemble_dense(const MalliavinBlocks& blocks) {
  const int nb = static_cast<int>(blocks.diag.size());
  if (nb == 0) return Mat();
  const int bs = static_cast<int>(blocks.diag[0].rows());
  Mat out = Mat::Zero(nb * bs, nb * bs);
  for (int k = 0; k < nb; ++k) {
    out.block(k * bs, k * bs, bs, bs) = blocks.diag[static_cast<std::size_t>(k)];
    if (!blocks.lower.empty())
      for (int l = 0; l < k; ++l)
        out.block(k * bs, l * bs, bs, bs) =
            blocks.lower[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
  }
  return out;
}

double skorohod_adjoint(const DriftRealization& drift, const MalliavinBlocks& blocks,
                        const NoisePath& path) {
  if (drift.psi.cols() != path.xi.cols()) throw std::invalid_argument("drift/path mismatch");
  double tr = 0.0;
  for (const Mat& b : blocks.diag) tr += b.trace();
  return drift.psi.cwiseProduct(path.xi).sum() - tr / blocks.q;
}

BlockLogDet block_logdet(const CMatRef& qd) {
  BlockLogDet out;
  const int n = static_cast<int>(qd.rows());
  bool strictly_lower = true;
  for (int j = 0; j < n && strictly_lower; ++j)
    for (int i = 0; i <= j; ++i)
      if (qd(i, j) != 0.0) {
        strictly_lower = false;
        break;
      }
  if (strictly_lower) return out;  // unit lower triangular: det = 1, trace = 0
  const Mat a = Mat::Identity(n, n) + qd;
  const Eigen::PartialPivLU<Mat> lu(a);
  double logabs = 0.0;
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  for (int i = 0; i < n; ++i) {
    const double u = lu.matrixLU()(i, i);
    if (u == 0.0) {
      out.singular = true;
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    if (u < 0.0) sign = -sign;
    logabs += std::log(std::abs(u));
  }
  out.negative = sign < 0;
  out.value = logabs - qd.trace();
  return out;
}

CarlemanFredholm carleman_fredholm_logdet(const MalliavinBlocks& blocks) {
  CarlemanFredholm out;
  for (const Mat& b : blocks.diag) {
    const BlockLogDet bl = block_logdet(b);
    if (bl.singular) {
      out.singular = true;
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    if (bl.negative) ++out.negative_blocks;
    out.value += bl.value;
  }
  return out;
}

double spectral_radius_estimate(const CMatRef& a, int iterations) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return 0.0;
  Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
  double log_growth = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec w = a * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    if (!std::isfinite(nw)) return std::numeric_limits<double>::infinity();
    log_growth += std::log(nw);
    v = w / nw;
  }
  return std::exp(log_growth / iterations);
}

LogWeight rn_log_weight(const DriftRealization& drift, const MalliavinBlocks& blocks,
                        const NoisePath& path) {
  LogWeight w;
  const CarlemanFredholm cf = carleman_fredholm_logdet(blocks);
  w.log_cf_det = cf.value;
  w.negative_det_blocks = cf.negative_blocks;
  w.skorohod = skorohod_adjoint(drift, blocks, path);
  w.energy = drift.energy;
  for (const Mat& b : blocks.diag) w.spectral_radius = std::max(w.spectral_radius, spectral_radius_estimate(b));
  w.invertible = !cf.singular && w.spectral_radius < kSpectralRadiusThreshold;
  w.log_weight = w.log_cf_det - w.skorohod - w.energy;
  return w;
}

TraceDiagnostics trace_diagnostics_mlmc(const PotentialModel& V, const TrajectoryOD& traj,
                                        const TimeGrid& grid, const MidpointSchedule& schedule) {
  const int d = static_cast<int>(traj.x.rows());
  const int m = grid.m;
  const double eta = grid.eta();
  const double c = std::sqrt(2.0) * eta;
  TraceDiagnostics out;
  Mat hp(d, d);
  std::vector<Mat> hn(static_cast<std::size_t>(m + 1), Mat(d, d));
  for (int k = 0; k < grid.N; ++k) {
    const int kt = schedule.tau_index(k, grid);
    V.hessian_into(traj.x_plus.col(k), hp);
    for (int n = 0; n <= m; ++n) V.hessian_into(traj.x.col(k * m + n), hn[static_cast<std::size_t>(n)]);
    Mat A = Mat::Zero(m * d, m * d), R = Mat::Zero(m * d, m * d);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (j < i) A.block(i * d, j * d, d, d) = c * hn[static_cast<std::size_t>(i)];
        if (j < kt) R.block(i * d, j * d, d, d) = c * hp;
      }
    out.tr_a2 += (A * A).trace();
    out.tr_ra += (R * A).trace();
    out.tr_r2 += (R * R).trace();
    // Trapezoid rule for 2 int_0^tau t tr(H+ H(X_t)) dt on the inner nodes.
    double integral = 0.0;
    for (int n = 0; n <= kt; ++n) {
      const double w = (n == 0 || n == kt) ? 0.5 : 1.0;
      integral += w * eta * (n * eta) * (hp * hn[static_cast<std::size_t>(n)]).trace();
    }
    out.limit_ra += 2.0 * integral;
    const double tau = kt * eta;
    out.limit_r2 += 2.0 * tau * tau * (hp * hp).trace();
  }
  return out;
}

}  // namespace lgir
