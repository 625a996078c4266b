#include "lgir/integrators.hpp"

#include <cmath>
#include <string>

#include "lgir/exp_integrals.hpp"

namespace lgir {

namespace {

void check_finite(const CVecRef& v, int step_index) {
  if (!v.allFinite())
    throw OverflowError("non-finite state at outer step " + std::to_string(step_index));
}

void check_finite_mat(const CMatRef& v, int step_index) {
  if (!v.allFinite())
    throw OverflowError("non-finite state at outer step " + std::to_string(step_index));
}

}  // namespace

Mat step_em_ld(const PotentialModel& V, double eta, const CVecRef& x0, const CMatRef& xi,
               int step_index) {
  const int d = static_cast<int>(x0.size());
  const int m = static_cast<int>(xi.cols());
  const double noise = std::sqrt(2.0 * eta);
  Mat x(d, m + 1);
  x.col(0) = x0;
  Vec g(d);
  for (int i = 0; i < m; ++i) {
    V.gradient_into(x.col(i), g);
    x.col(i + 1) = x.col(i) - eta * g + noise * xi.col(i);
    check_finite(x.col(i + 1), step_index);
  }
  return x;
}

MlmcSegment step_mlmc(const PotentialModel& V, double eta, int tau_index, const CVecRef& x0,
                      const CMatRef& xi, int step_index) {
  const int d = static_cast<int>(x0.size());
  const int m = static_cast<int>(xi.cols());
  if (tau_index < 0 || tau_index >= m) throw std::invalid_argument("midpoint index outside [0, m)");
  const double noise = std::sqrt(2.0 * eta);
  MlmcSegment seg;
  Vec g0(d), gp(d);
  V.gradient_into(x0, g0);
  seg.x_plus = x0 - (tau_index * eta) * g0;
  for (int j = 0; j < tau_index; ++j) seg.x_plus += noise * xi.col(j);
  check_finite(seg.x_plus, step_index);
  V.gradient_into(seg.x_plus, gp);
  seg.x.resize(d, m + 1);
  seg.x.col(0) = x0;
  for (int i = 0; i < m; ++i) seg.x.col(i + 1) = seg.x.col(i) - eta * gp + noise * xi.col(i);
  check_finite_mat(seg.x, step_index);
  return seg;
}

UdGridPlan make_ud_endpoint_plan(double gamma, double h, int m) {
  if (!(gamma > 0.0)) throw std::invalid_argument("friction gamma must be positive");
  if (!(h > 0.0) || m <= 0) throw std::invalid_argument("invalid underdamped step plan");
  UdGridPlan p;
  p.gamma = gamma;
  p.h = h;
  p.m = m;
  p.eta = h / m;
  p.noise_scale = std::sqrt(2.0 * gamma / p.eta);
  p.psi_scale = std::sqrt(p.eta / (2.0 * gamma));
  const ExpKernels eh = exp_integrals(gamma, 0.0, h);
  p.e1h = eh.e1;
  p.e2h = eh.e2;
  p.e3h = eh.e3;
  p.w1_end.resize(m);
  p.w2_end.resize(m);
  for (int j = 0; j < m; ++j) {
    const double a = j * p.eta;
    const double b = (j + 1 == m) ? h : (j + 1) * p.eta;
    p.w1_end[j] = kernel_cell_integral(1, gamma, a, b, h);
    p.w2_end[j] = kernel_cell_integral(2, gamma, a, b, h);
  }
  p.c1 = p.w1_end / p.eta;
  p.c2 = p.w2_end / p.eta;
  return p;
}

UdGridPlan make_ud_grid_plan(double gamma, double h, int m) {
  if (!(gamma > 0.0)) throw std::invalid_argument("friction gamma must be positive");
  if (!(h > 0.0) || m <= 0) throw std::invalid_argument("invalid underdamped step plan");
  UdGridPlan p;
  p.gamma = gamma;
  p.h = h;
  p.m = m;
  p.eta = h / m;
  p.noise_scale = std::sqrt(2.0 * gamma / p.eta);
  p.psi_scale = std::sqrt(p.eta / (2.0 * gamma));
  const ExpKernels eh = exp_integrals(gamma, 0.0, h);
  p.e1h = eh.e1;
  p.e2h = eh.e2;
  p.e3h = eh.e3;
  p.e1_nodes.resize(m + 1);
  p.e2_nodes.resize(m + 1);
  p.W1 = Mat::Zero(m + 1, m);
  p.W2 = Mat::Zero(m + 1, m);
  p.Omega1 = Mat::Zero(m + 1, m + 1);
  p.Omega2 = Mat::Zero(m + 1, m + 1);
  for (int k = 0; k <= m; ++k) {
    const double t = (k == m) ? h : k * p.eta;
    const ExpKernels e = exp_integrals(gamma, 0.0, t);
    p.e1_nodes[k] = e.e1;
    p.e2_nodes[k] = e.e2;
    for (int j = 0; j < k; ++j) {
      const double a = j * p.eta;
      const double b = (j + 1 == m) ? h : (j + 1) * p.eta;
      for (int kern = 1; kern <= 2; ++kern) {
        const double tot = kernel_cell_integral(kern, gamma, a, b, t);
        const double right = kernel_cell_right_weight(kern, gamma, a, b, t);
        Mat& W = kern == 1 ? p.W1 : p.W2;
        Mat& Om = kern == 1 ? p.Omega1 : p.Omega2;
        W(k, j) = tot;
        Om(k, j) += tot - right;
        Om(k, j + 1) += right;
      }
    }
  }
  p.w1_end = p.W1.row(m).transpose();
  p.w2_end = p.W2.row(m).transpose();
  p.c1 = p.w1_end / p.eta;
  p.c2 = p.w2_end / p.eta;
  p.gram(0, 0) = p.W1.row(m).dot(p.c1);
  p.gram(0, 1) = p.W1.row(m).dot(p.c2);
  p.gram(1, 0) = p.gram(0, 1);
  p.gram(1, 1) = p.W2.row(m).dot(p.c2);
  p.gram_inv = p.gram.inverse();
  Mat c(m, 2);
  c.col(0) = p.c1;
  c.col(1) = p.c2;
  p.F1 = p.W1 * c * p.gram_inv;
  p.F2 = p.W2 * c * p.gram_inv;
  Mat end_rows(2, m + 1);
  end_rows.row(0) = p.Omega1.row(m);
  end_rows.row(1) = p.Omega2.row(m);
  p.Cmom = p.Omega1 - p.F1 * end_rows;
  p.Cpos = p.Omega2 - p.F2 * end_rows;
  return p;
}

UdMidpoints make_ud_midpoints(const UdGridPlan& plan, double tau_minus, double tau_plus) {
  if (!(tau_minus >= 0.0 && tau_minus < plan.h) || !(tau_plus >= 0.0 && tau_plus < plan.h))
    throw std::invalid_argument("underdamped midpoints must lie in [0, h)");
  UdMidpoints mid;
  mid.tau_minus = tau_minus;
  mid.tau_plus = tau_plus;
  const ExpKernels em = exp_integrals(plan.gamma, 0.0, tau_minus);
  const ExpKernels ep = exp_integrals(plan.gamma, 0.0, tau_plus);
  mid.e2m = em.e2;
  mid.e3m = em.e3;
  mid.e2p = ep.e2;
  mid.e3p = ep.e3;
  mid.w_minus.resize(plan.m);
  mid.w_plus.resize(plan.m);
  for (int j = 0; j < plan.m; ++j) {
    const double a = j * plan.eta, b = (j + 1) * plan.eta;
    mid.w_minus[j] = plan.noise_scale * kernel_cell_integral(2, plan.gamma, a, b, tau_minus);
    mid.w_plus[j] = plan.noise_scale * kernel_cell_integral(2, plan.gamma, a, b, tau_plus);
  }
  return mid;
}

KineticState step_ulmc(const PotentialModel& V, const UdGridPlan& plan, const CVecRef& x0,
                       const CVecRef& p0, const CMatRef& xi, int step_index) {
  const int d = static_cast<int>(x0.size());
  Vec g(d);
  V.gradient_into(x0, g);
  KineticState s;
  s.x = x0 + plan.e2h * p0 - plan.e3h * g + plan.noise_scale * (xi * plan.w2_end);
  s.p = plan.e1h * p0 - plan.e2h * g + plan.noise_scale * (xi * plan.w1_end);
  check_finite(s.x, step_index);
  check_finite(s.p, step_index);
  return s;
}

DmMarginal step_dmulmc_marginal(const PotentialModel& V, const UdGridPlan& plan,
                                const UdMidpoints& mid, const CVecRef& x0, const CVecRef& p0,
                                const CMatRef& xi, int step_index) {
  const int d = static_cast<int>(x0.size());
  Vec g0(d), gm(d), gp(d);
  V.gradient_into(x0, g0);
  DmMarginal out;
  out.x_minus = x0 + mid.e2m * p0 - mid.e3m * g0 + xi * mid.w_minus;
  out.x_plus = x0 + mid.e2p * p0 - mid.e3p * g0 + xi * mid.w_plus;
  check_finite(out.x_minus, step_index);
  check_finite(out.x_plus, step_index);
  V.gradient_into(out.x_minus, gm);
  V.gradient_into(out.x_plus, gp);
  out.x = x0 + plan.e2h * p0 - plan.e3h * gm + plan.noise_scale * (xi * plan.w2_end);
  out.p = plan.e1h * p0 - plan.e2h * gp + plan.noise_scale * (xi * plan.w1_end);
  check_finite(out.x, step_index);
  check_finite(out.p, step_index);
  out.gradient_queries = 3;
  return out;
}

namespace {

struct InterpolationSetup {
  Mat fixed;     // d x (m+1): everything in X that does not depend on the nodes
  Mat g_end;     // d x 2: (G^p, G^x)
  Vec x_minus, x_plus;
};

InterpolationSetup setup_interpolation(const PotentialModel& V, const UdGridPlan& plan,
                                       const UdMidpoints& mid, const CVecRef& x0,
                                       const CVecRef& p0, const CMatRef& xi, int step_index) {
  const int d = static_cast<int>(x0.size());
  InterpolationSetup s;
  Vec g0(d), gm(d), gp(d);
  V.gradient_into(x0, g0);
  s.x_minus = x0 + mid.e2m * p0 - mid.e3m * g0 + xi * mid.w_minus;
  s.x_plus = x0 + mid.e2p * p0 - mid.e3p * g0 + xi * mid.w_plus;
  check_finite(s.x_minus, step_index);
  check_finite(s.x_plus, step_index);
  V.gradient_into(s.x_minus, gm);
  V.gradient_into(s.x_plus, gp);
  s.g_end.resize(d, 2);
  s.g_end.col(0) = plan.e2h * gp;
  s.g_end.col(1) = plan.e3h * gm;
  s.fixed = x0 * Eigen::RowVectorXd::Ones(plan.m + 1) + p0 * plan.e2_nodes.transpose() +
            plan.noise_scale * (xi * plan.W2.transpose()) - s.g_end * plan.F2.transpose();
  return s;
}

void finish_interpolation(const PotentialModel& V, const UdGridPlan& plan, const CVecRef& p0,
                          const CMatRef& xi, const InterpolationSetup& s, DmInterpolation& out) {
  const int d = static_cast<int>(p0.size());
  const int m = plan.m;
  out.grad.resize(d, m + 1);
  for (int n = 0; n <= m; ++n) V.gradient_into(out.x.col(n), out.grad.col(n));
  const Vec diff1 = out.grad * plan.Omega1.row(m).transpose() - s.g_end.col(0);
  const Vec diff2 = out.grad * plan.Omega2.row(m).transpose() - s.g_end.col(1);
  out.lambda1 = plan.gram_inv(0, 0) * diff1 + plan.gram_inv(0, 1) * diff2;
  out.lambda2 = plan.gram_inv(1, 0) * diff1 + plan.gram_inv(1, 1) * diff2;
  out.p = p0 * plan.e1_nodes.transpose() + plan.noise_scale * (xi * plan.W1.transpose()) -
          out.grad * plan.Cmom.transpose() - s.g_end * plan.F1.transpose();
  out.x_minus = s.x_minus;
  out.x_plus = s.x_plus;
  out.g_p = s.g_end.col(0);
  out.g_x = s.g_end.col(1);
}

}  // namespace

DmInterpolation solve_dmulmc_interpolation(const PotentialModel& V, const UdGridPlan& plan,
                                           const UdMidpoints& mid, const CVecRef& x0,
                                           const CVecRef& p0, const CMatRef& xi,
                                           const FixedPointOptions& options, int step_index) {
  const int d = static_cast<int>(x0.size());
  const int m = plan.m;
  const InterpolationSetup s = setup_interpolation(V, plan, mid, x0, p0, xi, step_index);
  DmInterpolation out;
  out.x = s.fixed;
  Mat grad(d, m + 1);
  Mat next(d, m + 1);
  bool converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    for (int n = 0; n <= m; ++n) V.gradient_into(out.x.col(n), grad.col(n));
    next.noalias() = s.fixed - grad * plan.Cpos.transpose();
    if (!next.allFinite())
      throw StepSizeError("interpolation fixed point diverged at outer step " +
                          std::to_string(step_index) + "; h <~ 1/sqrt(beta) required");
    const double change = (next - out.x).cwiseAbs().maxCoeff();
    out.x.swap(next);
    out.iterations = it;
    if (change <= options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw StepSizeError("interpolation fixed point did not converge at outer step " +
                        std::to_string(step_index) + "; h <~ 1/sqrt(beta) required");
  finish_interpolation(V, plan, p0, xi, s, out);
  return out;
}

DmInterpolation solve_dmulmc_interpolation_linear(const PotentialModel& V, const UdGridPlan& plan,
                                                  const UdMidpoints& mid, const CVecRef& x0,
                                                  const CVecRef& p0, const CMatRef& xi) {
  if (!V.is_quadratic()) throw std::invalid_argument("direct interpolation solve needs a quadratic V");
  const int d = static_cast<int>(x0.size());
  const int m = plan.m;
  const InterpolationSetup s = setup_interpolation(V, plan, mid, x0, p0, xi, 0);
  const Mat H = V.quadratic_matrix();
  const Vec g0 = V.gradient_offset();
  // (I + Cpos (x) H) vec(X) = vec(fixed - g0 (Cpos 1)^T)
  const int n = (m + 1) * d;
  Mat A = Mat::Identity(n, n);
  for (int k = 0; k <= m; ++k)
    for (int j = 0; j <= m; ++j) A.block(k * d, j * d, d, d) += plan.Cpos(k, j) * H;
  const Mat rhs_mat = s.fixed - g0 * (plan.Cpos * Vec::Ones(m + 1)).transpose();
  const Vec rhs = Eigen::Map<const Vec>(rhs_mat.data(), n);
  const Vec sol = A.partialPivLu().solve(rhs);
  DmInterpolation out;
  out.x = Eigen::Map<const Mat>(sol.data(), d, m + 1);
  out.iterations = 0;
  finish_interpolation(V, plan, p0, xi, s, out);
  return out;
}

TrajectoryOD simulate_em_ld(const PotentialModel& V, const NoisePath& path, const Vec& x0) {
  const TimeGrid& g = path.grid;
  TrajectoryOD tr;
  tr.x.resize(path.dim, g.cells() + 1);
  tr.x.col(0) = x0;
  for (int k = 0; k < g.N; ++k) {
    const Mat seg = step_em_ld(V, g.eta(), tr.x.col(k * g.m), path.step_block(k), k);
    tr.x.middleCols(k * g.m, g.m + 1) = seg;
    tr.gradient_queries += g.m;
  }
  return tr;
}

TrajectoryOD simulate_mlmc(const PotentialModel& V, const NoisePath& path,
                           const MidpointSchedule& schedule, const Vec& x0) {
  const TimeGrid& g = path.grid;
  TrajectoryOD tr;
  tr.x.resize(path.dim, g.cells() + 1);
  tr.x_plus.resize(path.dim, g.N);
  tr.x.col(0) = x0;
  for (int k = 0; k < g.N; ++k) {
    const MlmcSegment seg =
        step_mlmc(V, g.eta(), schedule.tau_index(k, g), tr.x.col(k * g.m), path.step_block(k), k);
    tr.x.middleCols(k * g.m, g.m + 1) = seg.x;
    tr.x_plus.col(k) = seg.x_plus;
    tr.gradient_queries += 2;
  }
  return tr;
}

TrajectoryUD simulate_dmulmc(const PotentialModel& V, const NoisePath& path,
                             const MidpointSchedule& schedule, double gamma, const Vec& x0,
                             const Vec& p0, const FixedPointOptions& options) {
  const TimeGrid& g = path.grid;
  const UdGridPlan plan = make_ud_grid_plan(gamma, g.h(), g.m);
  TrajectoryUD tr;
  const int d = path.dim;
  tr.x.resize(d, g.cells() + 1);
  tr.p.resize(d, g.cells() + 1);
  tr.x_minus.resize(d, g.N);
  tr.x_plus.resize(d, g.N);
  tr.lambda1.resize(d, g.N);
  tr.lambda2.resize(d, g.N);
  tr.x.col(0) = x0;
  tr.p.col(0) = p0;
  for (int k = 0; k < g.N; ++k) {
    const UdMidpoints mid = make_ud_midpoints(plan, schedule.tau_minus.at(k), schedule.tau_plus.at(k));
    const DmInterpolation seg = solve_dmulmc_interpolation(
        V, plan, mid, tr.x.col(k * g.m), tr.p.col(k * g.m), path.step_block(k), options, k);
    tr.x.middleCols(k * g.m, g.m + 1) = seg.x;
    tr.p.middleCols(k * g.m, g.m + 1) = seg.p;
    tr.x_minus.col(k) = seg.x_minus;
    tr.x_plus.col(k) = seg.x_plus;
    tr.lambda1.col(k) = seg.lambda1;
    tr.lambda2.col(k) = seg.lambda2;
    tr.iterations.push_back(seg.iterations);
    tr.gradient_queries += 3;
  }
  return tr;
}

KineticEndpoints simulate_ulmc(const PotentialModel& V, const NoisePath& path, double gamma,
                               const Vec& x0, const Vec& p0) {
  const TimeGrid& g = path.grid;
  const UdGridPlan plan = make_ud_grid_plan(gamma, g.h(), g.m);
  KineticEndpoints out;
  out.x.resize(path.dim, g.N + 1);
  out.p.resize(path.dim, g.N + 1);
  out.x.col(0) = x0;
  out.p.col(0) = p0;
  for (int k = 0; k < g.N; ++k) {
    const KineticState s = step_ulmc(V, plan, out.x.col(k), out.p.col(k), path.step_block(k), k);
    out.x.col(k + 1) = s.x;
    out.p.col(k + 1) = s.p;
    out.gradient_queries += 1;
  }
  return out;
}

}  // namespace lgir
