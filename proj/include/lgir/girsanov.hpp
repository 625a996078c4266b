#pragma once

#include <string>
#include <vector>

#include "lgir/integrators.hpp"

namespace lgir {

enum class Scheme { EmLd, Mlmc, Ulmc, DmUlmc };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

// Per-cell drift difference psi_i between the algorithm path law and the
// discretised diffusion, in units of the standard-normal increments:
// under the map xi -> xi + psi the algorithm path is the diffusion path.
struct DriftRealization {
  Mat psi;  // d x (N m)
  Scheme scheme = Scheme::Mlmc;
  double energy = 0.0;  // 1/2 sum |psi_i|^2
};

// Malliavin derivative of psi with respect to xi, per outer step.  Row/column
// index j*d + c addresses coordinate c of cell j inside the step.
struct MalliavinBlocks {
  std::vector<Mat> diag;                 // N blocks of size (m d) x (m d)
  std::vector<std::vector<Mat>> lower;   // lower[k][l], l < k; empty unless requested
  double q = 1.0;
};

// Sensitivities of one outer step: D = d psi / d xi (this step), Dz = d psi / d z0,
// Ez = d z_end / d z0, Exi = d z_end / d xi, where z is x (overdamped) or (x, p).
struct StepSensitivity {
  Mat D;
  Mat Dz;
  Mat Ez;
  Mat Exi;
};

// Euler-Maruyama chain for V measured against the Euler-Maruyama discretisation
// of the Langevin diffusion for `reference`: psi_i = sqrt(eta/2)(grad U - grad V)(X_i).
StepSensitivity em_step_sensitivity(const PotentialModel& V, const PotentialModel& reference,
                                    double eta, const CMatRef& nodes, bool full);
Mat em_step_drift(const PotentialModel& V, const PotentialModel& reference, double eta,
                  const CMatRef& nodes);

// M-LMC: psi_i = sqrt(eta/2)(grad V(X_i) - grad V(X+)), X_i the left node of cell i.
StepSensitivity mlmc_step_sensitivity(const PotentialModel& V, double eta, int tau_index,
                                      const CMatRef& nodes, const CVecRef& x_plus, bool full);
Mat mlmc_step_drift(const PotentialModel& V, double eta, const CMatRef& nodes,
                    const CVecRef& x_plus);

// DM-ULMC: psi_j = sqrt(eta/(2 gamma)) (c1_j lambda1 + c2_j lambda2), with c_a the
// cell averages of E_a(s, h); the Malliavin derivative solves the linearised
// interpolation system exactly (dense LU).
StepSensitivity dmulmc_step_sensitivity(const PotentialModel& V, const UdGridPlan& plan,
                                        const UdMidpoints& mid, const DmInterpolation& seg,
                                        bool full);
Mat dmulmc_step_drift(const UdGridPlan& plan, const CVecRef& lambda1, const CVecRef& lambda2);

// Whole-path assembly.
DriftRealization drift_em_ld(const PotentialModel& V, const PotentialModel& reference,
                             const TrajectoryOD& traj, const TimeGrid& grid);
DriftRealization drift_mlmc(const PotentialModel& V, const TrajectoryOD& traj,
                            const TimeGrid& grid);
DriftRealization drift_dmulmc(const TrajectoryUD& traj, const TimeGrid& grid, double gamma);

MalliavinBlocks malliavin_blocks_em_ld(const PotentialModel& V, const PotentialModel& reference,
                                       const TrajectoryOD& traj, const TimeGrid& grid, double q,
                                       bool with_lower = false);
MalliavinBlocks malliavin_blocks_mlmc(const PotentialModel& V, const TrajectoryOD& traj,
                                      const TimeGrid& grid, const MidpointSchedule& schedule,
                                      double q, bool with_lower = false);
MalliavinBlocks malliavin_blocks_dmulmc(const PotentialModel& V, const TrajectoryUD& traj,
                                        const TimeGrid& grid, const MidpointSchedule& schedule,
                                        double gamma, double q, bool with_lower = false);

// Dense (N m d) x (N m d) matrix from the blocks (lower blocks included if present).
Mat assemble_dense(const MalliavinBlocks& blocks);

// delta psi = sum <psi_i, xi_i> - sum_k tr(D_k).
double skorohod_adjoint(const DriftRealization& drift, const MalliavinBlocks& blocks,
                        const NoisePath& path);

struct BlockLogDet {
  double value = 0.0;     // log|det(I + q D)| - q tr D
  bool singular = false;  // exactly singular: value is -infinity
  bool negative = false;  // det(I + q D) < 0
};
// One block: exact via partial-pivoting LU (strictly lower triangular blocks give
// exactly zero).  `qd` is the already-scaled block q D.
BlockLogDet block_logdet(const CMatRef& qd);

struct CarlemanFredholm {
  double value = 0.0;
  bool singular = false;
  int negative_blocks = 0;
};
CarlemanFredholm carleman_fredholm_logdet(const MalliavinBlocks& blocks);

// Growth-rate estimate of the spectral radius: geometric mean of the norm ratios
// over `iterations` power-iteration steps from the all-ones vector.
double spectral_radius_estimate(const CMatRef& a, int iterations = 20);

constexpr double kSpectralRadiusThreshold = 0.9;

struct LogWeight {
  double log_cf_det = 0.0;
  double skorohod = 0.0;
  double energy = 0.0;
  double log_weight = 0.0;
  bool invertible = true;
  double spectral_radius = 0.0;
  int negative_det_blocks = 0;
};

LogWeight rn_log_weight(const DriftRealization& drift, const MalliavinBlocks& blocks,
                        const NoisePath& path);

struct TraceDiagnostics {
  double tr_a2 = 0.0;        // tr(A^2): A the adapted part (strictly lower)
  double tr_ra = 0.0;        // tr(R A): R = D grad V(X+) 1^T, temporally rank one
  double tr_r2 = 0.0;        // tr(R^2)
  double limit_ra = 0.0;     // 2 int_0^tau t tr(H(X+) H(X_t)) dt (trapezoid)
  double limit_r2 = 0.0;     // 2 tau^2 tr(H(X+)^2)
};

// Summed over the outer steps of an M-LMC trajectory.  Normalisation: both
// A_{ij} = sqrt(2) eta H(X_i) 1{j<i} and R_{ij} = sqrt(2) eta H(X+) 1{j<tau/eta}
// are d x d blocks indexed by inner cells.
TraceDiagnostics trace_diagnostics_mlmc(const PotentialModel& V, const TrajectoryOD& traj,
                                        const TimeGrid& grid, const MidpointSchedule& schedule);

}  // namespace lgir
