#pragma once

#include "lgir/path_grid.hpp"
#include "lgir/potential.hpp"

namespace lgir {

// Exact Gaussian transition of the linear SDE dZ = (A Z + a) dt + S dB over time t:
//   Z_t = Phi Z_0 + shift + noise,  noise ~ N(0, Q),
// with cross-covariance Cov(noise, B_t) = cross.
struct LinearTransition {
  Mat Phi;
  Vec shift;
  Mat Q;
  Mat cross;  // n x k, where k is the Brownian dimension
};

LinearTransition linear_sde_transition(const Mat& A, const Vec& a, const Mat& S, double t);

// Drift data of the overdamped (state x) and underdamped (state (x, p)) Langevin
// diffusions for a quadratic potential.
struct LinearSde {
  Mat A;
  Vec a;
  Mat S;
};
LinearSde langevin_sde(const PotentialModel& V);
LinearSde kinetic_langevin_sde(const PotentialModel& V, double gamma);

// Per-cell exact transition coupled to the grid increments:
//   Z' = Phi Z + shift + K xi + R zeta,
// where K xi is the conditional mean of the exact noise given the cell increment
// sqrt(eta) xi and R zeta (zeta ~ N(0, I)) carries the independent remainder.
struct CoupledCellMap {
  Mat Phi;
  Vec shift;
  Mat K;
  Mat R;
};

CoupledCellMap coupled_cell_map(const LinearSde& sde, double eta);

// Exact flows on the inner grid of `path`, synchronously coupled to its
// increments; the remainder normals come from an auxiliary stream of the path.
Mat exact_ou_flow_ld(const PotentialModel& V, const NoisePath& path, const Vec& x0);

struct KineticTrajectory {
  Mat x, p;  // d x (N m + 1)
};
KineticTrajectory exact_ou_flow_uld(const PotentialModel& V, double gamma, const NoisePath& path,
                                    const Vec& x0, const Vec& p0);

}  // namespace lgir
