#include "lgir/ou_flow.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

#include "lgir/rng.hpp"

namespace lgir {

LinearTransition linear_sde_transition(const Mat& A, const Vec& a, const Mat& S, double t) {
  const int n = static_cast<int>(A.rows());
  const int k = static_cast<int>(S.cols());
  LinearTransition tr;
  // Van Loan: exp([[-A, S S^T], [0, A^T]] t) = [[*, F12], [0, F22]],
  // Phi = F22^T and Q = Phi F12.
  Mat vl = Mat::Zero(2 * n, 2 * n);
  vl.topLeftCorner(n, n) = -A;
  vl.topRightCorner(n, n) = S * S.transpose();
  vl.bottomRightCorner(n, n) = A.transpose();
  const Mat ev = (vl * t).exp();
  tr.Phi = ev.bottomRightCorner(n, n).transpose();
  tr.Q = tr.Phi * ev.topRightCorner(n, n);
  tr.Q = 0.5 * (tr.Q + tr.Q.transpose()).eval();
  // int_0^t e^{A u} du [S, a] from exp([[A, S, a], [0, 0, 0]] t).
  Mat aug = Mat::Zero(n + k + 1, n + k + 1);
  aug.topLeftCorner(n, n) = A;
  aug.block(0, n, n, k) = S;
  aug.block(0, n + k, n, 1) = a;
  const Mat ea = (aug * t).exp();
  tr.cross = ea.block(0, n, n, k);
  tr.shift = ea.block(0, n + k, n, 1);
  return tr;
}

LinearSde langevin_sde(const PotentialModel& V) {
  if (!V.is_quadratic()) throw std::invalid_argument("exact OU flow needs a quadratic potential");
  const int d = V.dimension();
  LinearSde s;
  s.A = -V.quadratic_matrix();
  s.a = -V.gradient_offset();
  s.S = std::sqrt(2.0) * Mat::Identity(d, d);
  return s;
}

LinearSde kinetic_langevin_sde(const PotentialModel& V, double gamma) {
  if (!V.is_quadratic()) throw std::invalid_argument("exact OU flow needs a quadratic potential");
  const int d = V.dimension();
  LinearSde s;
  s.A = Mat::Zero(2 * d, 2 * d);
  s.A.topRightCorner(d, d) = Mat::Identity(d, d);
  s.A.bottomLeftCorner(d, d) = -V.quadratic_matrix();
  s.A.bottomRightCorner(d, d) = -gamma * Mat::Identity(d, d);
  s.a = Vec::Zero(2 * d);
  s.a.tail(d) = -V.gradient_offset();
  s.S = Mat::Zero(2 * d, d);
  s.S.bottomRows(d) = std::sqrt(2.0 * gamma) * Mat::Identity(d, d);
  return s;
}

CoupledCellMap coupled_cell_map(const LinearSde& sde, double eta) {
  const LinearTransition tr = linear_sde_transition(sde.A, sde.a, sde.S, eta);
  CoupledCellMap c;
  c.Phi = tr.Phi;
  c.shift = tr.shift;
  // Cov(noise, xi) = cross / sqrt(eta) since B_eta = sqrt(eta) xi.
  c.K = tr.cross / std::sqrt(eta);
  const Mat resid = tr.Q - c.K * c.K.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (resid + resid.transpose()));
  const Vec ev = es.eigenvalues().cwiseMax(0.0);
  c.R = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
  return c;
}

namespace {

Mat coupled_flow(const LinearSde& sde, const NoisePath& path, const Vec& z0) {
  const int n = static_cast<int>(z0.size());
  const CoupledCellMap c = coupled_cell_map(sde, path.grid.eta());
  const CounterRng rng(path.seed, path.stream);
  Mat z(n, path.grid.cells() + 1);
  z.col(0) = z0;
  Vec zeta(n);
  for (int i = 0; i < path.grid.cells(); ++i) {
    rng.normals(RngPurpose::Auxiliary, path.level, static_cast<std::uint64_t>(i), zeta.data(), n);
    z.col(i + 1) = c.Phi * z.col(i) + c.shift + c.K * path.xi.col(i) + c.R * zeta;
  }
  return z;
}

}  // namespace

Mat exact_ou_flow_ld(const PotentialModel& V, const NoisePath& path, const Vec& x0) {
  return coupled_flow(langevin_sde(V), path, x0);
}

KineticTrajectory exact_ou_flow_uld(const PotentialModel& V, double gamma, const NoisePath& path,
                                    const Vec& x0, const Vec& p0) {
  const int d = V.dimension();
  Vec z0(2 * d);
  z0 << x0, p0;
  const Mat z = coupled_flow(kinetic_langevin_sde(V, gamma), path, z0);
  return KineticTrajectory{z.topRows(d), z.bottomRows(d)};
}

}  // namespace lgir
