#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lgir/path_grid.hpp"
#include "lgir/potential.hpp"

namespace lgir {

using CMatRef = Eigen::Ref<const Mat>;

// Raised when a state becomes non-finite; names the outer step.
class OverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an implicit per-step solve fails to contract.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Overdamped schemes.  Increments `xi` are the d x m block of one outer step.

// Euler-Maruyama on the inner grid; returns the d x (m+1) node values.
Mat step_em_ld(const PotentialModel& V, double eta, const CVecRef& x0, const CMatRef& xi,
               int step_index = 0);

struct MlmcSegment {
  Mat x;       // d x (m+1): x0 - t grad V(X+) + sqrt(2) B_t on the inner nodes
  Vec x_plus;  // X+ = x0 - tau grad V(x0) + sqrt(2) B_tau
};

MlmcSegment step_mlmc(const PotentialModel& V, double eta, int tau_index, const CVecRef& x0,
                      const CMatRef& xi, int step_index = 0);

// ---------------------------------------------------------------------------
// Underdamped schemes.
//
// Stochastic integrals int E_a(s,t) dB_s are taken against the piecewise-linear
// interpolant of the grid Brownian path, i.e. each cell contributes
// (int_cell E_a(s,t) ds) xi_j / sqrt(eta).  This is the conditional mean of the
// exact integral given the cell increments and is exact for any t, including
// midpoints strictly inside a cell.

// Quantities that depend only on (gamma, h, m).
struct UdGridPlan {
  double gamma = 1.0;
  double h = 0.0;
  double eta = 0.0;
  int m = 0;
  double noise_scale = 0.0;  // sqrt(2 gamma / eta)
  double psi_scale = 0.0;    // sqrt(eta / (2 gamma))
  double e1h = 1.0, e2h = 0.0, e3h = 0.0;  // E_a(0, h)
  Vec e1_nodes, e2_nodes;                  // E_1(0, t_k), E_2(0, t_k), k = 0..m
  Mat W1, W2;        // (m+1) x m: int_cell_j E_a(s, t_k) ds
  Mat Omega1, Omega2;  // (m+1) x (m+1): hat-quadrature weights of int_0^{t_k} E_a(s,t_k) f(s) ds
  Vec w1_end, w2_end;  // m: int_cell_j E_a(s, h) ds (the last rows of W1, W2)
  Vec c1, c2;        // cell averages of E_1(s,h), E_2(s,h)
  Eigen::Matrix2d gram;      // discrete Gram matrix sum_j a_a(j) a_b(j) / eta
  Eigen::Matrix2d gram_inv;
  Mat F1, F2;        // (m+1) x 2: response of nodes to the endpoint constraints
  Mat Cmom, Cpos;    // (m+1) x (m+1): fixed-point coefficients on grad V(X_n)
};

UdGridPlan make_ud_grid_plan(double gamma, double h, int m);
// Only the O(m) data needed by the endpoint maps (step_ulmc, step_dmulmc_marginal,
// make_ud_midpoints); the interpolation matrices are left empty.
UdGridPlan make_ud_endpoint_plan(double gamma, double h, int m);

// Per-step midpoint weights.
struct UdMidpoints {
  double tau_minus = 0.0, tau_plus = 0.0;
  double e2m = 0.0, e3m = 0.0, e2p = 0.0, e3p = 0.0;  // E_a(0, tau-+)
  Vec w_minus, w_plus;  // m: noise weights of X- / X+ (already scaled by sqrt(2 gamma/eta))
};

UdMidpoints make_ud_midpoints(const UdGridPlan& plan, double tau_minus, double tau_plus);

struct KineticState {
  Vec x;
  Vec p;
};

// Exponential-Euler baseline: both gradients frozen at x0.
KineticState step_ulmc(const PotentialModel& V, const UdGridPlan& plan, const CVecRef& x0,
                       const CVecRef& p0, const CMatRef& xi, int step_index = 0);

struct DmMarginal {
  Vec x, p;
  Vec x_minus, x_plus;
  int gradient_queries = 3;
};

DmMarginal step_dmulmc_marginal(const PotentialModel& V, const UdGridPlan& plan,
                                const UdMidpoints& mid, const CVecRef& x0, const CVecRef& p0,
                                const CMatRef& xi, int step_index = 0);

struct FixedPointOptions {
  double tolerance = 1e-12;
  int max_iterations = 100;
};

struct DmInterpolation {
  Mat x, p;  // d x (m+1) on the inner nodes; column m equals the marginal update
  Vec x_minus, x_plus;
  Vec lambda1, lambda2;
  Mat grad;  // d x (m+1): grad V at the nodes of the converged interpolation
  Vec g_p, g_x;  // E2(0,h) grad V(X+), E3(0,h) grad V(X-)
  int iterations = 0;
};

// Solves the implicit inner-grid interpolation
//   X_k = x0 + E2(0,t_k) p0 + noise_k - sum_n Cpos[k][n] grad V(X_n) - F2[k] (G^p, G^x),
// by Picard iteration; lambda and the momentum path follow in closed form.
DmInterpolation solve_dmulmc_interpolation(const PotentialModel& V, const UdGridPlan& plan,
                                           const UdMidpoints& mid, const CVecRef& x0,
                                           const CVecRef& p0, const CMatRef& xi,
                                           const FixedPointOptions& options = {},
                                           int step_index = 0);

// Quadratic potentials: the same fixed point by one dense linear solve.
DmInterpolation solve_dmulmc_interpolation_linear(const PotentialModel& V, const UdGridPlan& plan,
                                                  const UdMidpoints& mid, const CVecRef& x0,
                                                  const CVecRef& p0, const CMatRef& xi);

// ---------------------------------------------------------------------------
// Whole-path drivers.

struct TrajectoryOD {
  Mat x;       // d x (N m + 1)
  Mat x_plus;  // d x N (empty for Euler-Maruyama)
  long gradient_queries = 0;
};

struct TrajectoryUD {
  Mat x, p;  // d x (N m + 1)
  Mat x_minus, x_plus, lambda1, lambda2;  // d x N
  std::vector<int> iterations;
  long gradient_queries = 0;
};

TrajectoryOD simulate_em_ld(const PotentialModel& V, const NoisePath& path, const Vec& x0);
TrajectoryOD simulate_mlmc(const PotentialModel& V, const NoisePath& path,
                           const MidpointSchedule& schedule, const Vec& x0);
TrajectoryUD simulate_dmulmc(const PotentialModel& V, const NoisePath& path,
                             const MidpointSchedule& schedule, double gamma, const Vec& x0,
                             const Vec& p0, const FixedPointOptions& options = {});
// Outer-step endpoints of ULMC (d x (N+1) each).
struct KineticEndpoints {
  Mat x, p;
  long gradient_queries = 0;
};
KineticEndpoints simulate_ulmc(const PotentialModel& V, const NoisePath& path, double gamma,
                               const Vec& x0, const Vec& p0);

}  // namespace lgir
