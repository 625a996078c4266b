#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "lgir/girsanov.hpp"

using namespace lgir;

namespace {

// Central-difference Jacobian of the whole path-to-psi map, column per xi entry.
Mat fd_jacobian(const std::function<Mat(const NoisePath&)>& psi_of, const NoisePath& path,
                double step = 1e-5) {
  const Eigen::Index n = path.xi.size();
  Mat J(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    NoisePath up = path, dn = path;
    up.xi.data()[c] += step;
    dn.xi.data()[c] -= step;
    const Mat diff = (psi_of(up) - psi_of(dn)) / (2 * step);
    J.col(c) = Eigen::Map<const Vec>(diff.data(), n);
  }
  return J;
}

double max_rel_error(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double err = std::abs(a.data()[i] - b.data()[i]);
    worst = std::max(worst, err / std::max(1e-3, std::abs(b.data()[i])));
  }
  return worst;
}

PotentialModel perturbed2() {
  Vec spec(2);
  spec << 0.8, 1.4;
  return PotentialModel::perturbed(spec, PerturbationSpec{0.3, 0.2, 1.2});
}

Mat random_matrix(int n, double scale, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat A(n, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = scale * u(gen);
  return A;
}

}  // namespace

TEST_CASE("M-LMC drift by hand: one step, m = 2") {
  const auto V = PotentialModel::isotropic(1, 1.0);
  const TimeGrid g = make_grid(0.2, 1, 2);
  NoisePath path;
  path.grid = g;
  path.dim = 1;
  path.xi = Mat::Zero(1, 2);
  const auto sched = deterministic_od_schedule(g, 0.5);
  Vec x0(1);
  x0 << 1.0;
  const auto traj = simulate_mlmc(V, path, sched, x0);
  const auto drift = drift_mlmc(V, traj, g);
  CHECK(drift.psi(0, 0) == doctest::Approx(std::sqrt(0.05) * (1.0 - 0.9)));
  CHECK(drift.psi(0, 1) == doctest::Approx(std::sqrt(0.05) * (0.91 - 0.9)));
  CHECK(drift.energy == doctest::Approx(0.5 * drift.psi.squaredNorm()));
}

TEST_CASE("flat and tilted potentials give zero drift") {
  const TimeGrid g = make_grid(1.0, 4, 4);
  const NoisePath path = sample_path(g, 2, 2, 2);
  for (const auto& V : {PotentialModel::isotropic(2, 0.0), PotentialModel::isotropic(2, 0.0).with_tilt(Vec::Ones(2))}) {
    const auto traj = simulate_mlmc(V, path, deterministic_od_schedule(g, 0.5), Vec::Zero(2));
    const auto drift = drift_mlmc(V, traj, g);
    CHECK(drift.psi.norm() == 0.0);
    CHECK(drift.energy == 0.0);
    const auto blocks = malliavin_blocks_mlmc(V, traj, g, deterministic_od_schedule(g, 0.5), 1.0);
    for (const auto& D : blocks.diag) CHECK(D.norm() == 0.0);
    const auto w = rn_log_weight(drift, blocks, path);
    CHECK(w.log_weight == 0.0);
  }
  const auto V = PotentialModel::isotropic(2, 0.0);
  const auto ud = simulate_dmulmc(V, path, deterministic_ud_schedule(g), 1.0, Vec::Zero(2), Vec::Ones(2));
  CHECK(drift_dmulmc(ud, g, 1.0).psi.norm() == 0.0);
  const auto blocks = malliavin_blocks_dmulmc(V, ud, g, deterministic_ud_schedule(g), 1.0, 1.0);
  for (const auto& D : blocks.diag) CHECK(D.norm() == 0.0);
}

TEST_CASE("M-LMC Malliavin derivative matches finite differences") {
  const auto V = perturbed2();
  const TimeGrid g = make_grid(0.5, 2, 4);
  const NoisePath path = sample_path(g, 2, 31, 4);
  const auto sched = deterministic_od_schedule(g, 0.5);
  Vec x0(2);
  x0 << 0.7, -0.3;
  auto psi_of = [&](const NoisePath& p) { return drift_mlmc(V, simulate_mlmc(V, p, sched, x0), g).psi; };
  const auto traj = simulate_mlmc(V, path, sched, x0);
  const Mat D = assemble_dense(malliavin_blocks_mlmc(V, traj, g, sched, 1.0, true));
  CHECK(max_rel_error(D, fd_jacobian(psi_of, path)) < 1e-5);
}

TEST_CASE("DM-ULMC Malliavin derivative matches finite differences") {
  const auto V = perturbed2();
  const TimeGrid g = make_grid(0.5, 2, 4);
  const NoisePath path = sample_path(g, 2, 32, 4);
  const auto sched = deterministic_ud_schedule(g);
  const FixedPointOptions tight{1e-15, 200};
  Vec x0(2), p0(2);
  x0 << 0.7, -0.3;
  p0 << 0.2, 0.5;
  auto psi_of = [&](const NoisePath& p) {
    return drift_dmulmc(simulate_dmulmc(V, p, sched, 1.2, x0, p0, tight), g, 1.2).psi;
  };
  const auto traj = simulate_dmulmc(V, path, sched, 1.2, x0, p0, tight);
  const Mat D = assemble_dense(malliavin_blocks_dmulmc(V, traj, g, sched, 1.2, 1.0, true));
  CHECK(max_rel_error(D, fd_jacobian(psi_of, path)) < 1e-5);
}

TEST_CASE("DM-ULMC Malliavin blocks shrink at least quadratically in h") {
  const auto V = perturbed2();
  std::vector<double> norms;
  for (double h : {0.2, 0.1, 0.05}) {
    const TimeGrid g = make_grid(h, 1, 4);
    const NoisePath path = sample_path(g, 2, 5, 5);
    const auto sched = deterministic_ud_schedule(g);
    const auto traj = simulate_dmulmc(V, path, sched, 1.0, Vec::Ones(2), Vec::Zero(2));
    const auto blocks = malliavin_blocks_dmulmc(V, traj, g, sched, 1.0, 1.0);
    norms.push_back(Eigen::JacobiSVD<Mat>(blocks.diag[0]).singularValues()[0]);
  }
  CHECK(norms[0] / norms[1] >= 4.0 * 0.9);
  CHECK(norms[1] / norms[2] >= 4.0 * 0.9);
}

TEST_CASE("block log-determinant") {
  SUBCASE("zero and strictly lower triangular blocks give exactly zero") {
    CHECK(block_logdet(Mat::Zero(8, 8)).value == 0.0);
    Mat L = random_matrix(8, 0.5, 1).triangularView<Eigen::StrictlyLower>();
    CHECK(block_logdet(L).value == 0.0);
  }
  SUBCASE("agrees with a dense determinant") {
    const Mat A = random_matrix(8, 0.1, 2);
    const Mat I = Mat::Identity(8, 8);
    const double dense = std::log(std::abs((I + A).determinant())) - A.trace();
    CHECK(block_logdet(A).value == doctest::Approx(dense).epsilon(1e-12));
  }
  SUBCASE("second-order expansion with a cubic remainder") {
    // |q D| <= 0.1: the remainder of log det(I + D) - tr D ~ -tr(D^2)/2 is cubic.
    const Mat A = random_matrix(8, 0.1 / 8, 3);
    double prev = 0.0;
    for (int level = 0; level < 3; ++level) {
      const Mat D = A / std::pow(2.0, level);
      const double rem = std::abs(block_logdet(D).value + 0.5 * (D * D).trace());
      if (level > 0) CHECK(prev / rem == doctest::Approx(8.0).epsilon(0.05));
      prev = rem;
    }
  }
  SUBCASE("singular and negative determinants are flagged") {
    Mat S = Mat::Zero(2, 2);
    S(0, 0) = -1.0;
    CHECK(block_logdet(S).singular);
    Mat N = Mat::Zero(2, 2);
    N(0, 0) = -2.0;
    const auto r = block_logdet(N);
    CHECK(r.negative);
    CHECK(r.value == doctest::Approx(std::log(1.0) + 2.0));
  }
}

TEST_CASE("adapted Euler-Maruyama drift reduces to the classical Girsanov exponent") {
  const auto V = perturbed2();
  const auto U = PotentialModel::isotropic(2, 0.0);
  const TimeGrid g = make_grid(1.0, 4, 4);
  const NoisePath path = sample_path(g, 2, 8, 1);
  const auto traj = simulate_em_ld(V, path, Vec::Ones(2));
  const auto drift = drift_em_ld(V, U, traj, g);
  const auto blocks = malliavin_blocks_em_ld(V, U, traj, g, 1.0);
  for (const auto& D : blocks.diag) CHECK(Mat(D.triangularView<Eigen::Upper>()).norm() == 0.0);
  const auto w = rn_log_weight(drift, blocks, path);
  CHECK(w.log_cf_det == 0.0);
  const double ito = (drift.psi.array() * path.xi.array()).sum();
  CHECK(w.log_weight == doctest::Approx(-ito - 0.5 * drift.psi.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("Skorohod integral of an adapted drift has mean zero") {
  const auto V = perturbed2();
  const auto U = PotentialModel::isotropic(2, 0.0);
  const TimeGrid g = make_grid(0.5, 2, 2);
  const int n = 10000;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const NoisePath path = sample_path(g, 2, 4, static_cast<std::uint64_t>(i));
    const auto traj = simulate_em_ld(V, path, Vec::Ones(2));
    const auto drift = drift_em_ld(V, U, traj, g);
    v[i] = skorohod_adjoint(drift, malliavin_blocks_em_ld(V, U, traj, g, 1.0), path);
  }
  double s = 0.0, sq = 0.0;
  for (double x : v) {
    s += x;
    sq += x * x;
  }
  const double mean = s / n, se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean) < 4 * se);
}

TEST_CASE("Skorohod adjoint with a deterministic drift is the Gaussian inner product") {
  const TimeGrid g = make_grid(1.0, 2, 3);
  const NoisePath path = sample_path(g, 2, 1, 1);
  DriftRealization drift;
  drift.psi = Mat::Constant(2, 6, 0.3);
  MalliavinBlocks blocks;
  blocks.diag.assign(2, Mat::Zero(6, 6));
  CHECK(skorohod_adjoint(drift, blocks, path) == doctest::Approx(0.3 * path.xi.sum()));
  blocks.diag[1](2, 2) = 0.25;
  CHECK(skorohod_adjoint(drift, blocks, path) == doctest::Approx(0.3 * path.xi.sum() - 0.25));
}

TEST_CASE("log weight components") {
  const auto V = perturbed2();
  const TimeGrid g = make_grid(1.0, 8, 4);
  const NoisePath path = sample_path(g, 2, 3, 3);
  const auto sched = deterministic_od_schedule(g, 0.5);
  const auto traj = simulate_mlmc(V, path, sched, Vec::Zero(2));
  const auto drift = drift_mlmc(V, traj, g);
  const auto blocks = malliavin_blocks_mlmc(V, traj, g, sched, 1.0);
  const auto w = rn_log_weight(drift, blocks, path);
  CHECK(w.log_weight == doctest::Approx(w.log_cf_det - w.skorohod - w.energy));
  CHECK(w.energy >= 0.0);
  CHECK(w.invertible);
  CHECK(w.spectral_radius < kSpectralRadiusThreshold);
  const auto cf = carleman_fredholm_logdet(blocks);
  double sum = 0.0;
  for (const auto& D : blocks.diag) sum += block_logdet(D).value;
  CHECK(cf.value == doctest::Approx(sum));
}

TEST_CASE("spectral radius estimate") {
  Mat A = Mat::Zero(3, 3);
  A.diagonal() << 0.5, -0.2, 0.1;
  CHECK(spectral_radius_estimate(A, 200) == doctest::Approx(0.5).epsilon(0.02));
  Mat L = random_matrix(6, 1.0, 7).triangularView<Eigen::StrictlyLower>();
  CHECK(spectral_radius_estimate(L) < 0.05);  // nilpotent
}

TEST_CASE("trace diagnostics") {
  const TimeGrid g = make_grid(0.5, 1, 8);
  const NoisePath path = sample_path(g, 1, 1, 1);
  const auto sched = deterministic_od_schedule(g, 0.5);
  SUBCASE("flat potential") {
    const auto V = PotentialModel::isotropic(1, 0.0);
    const auto t = trace_diagnostics_mlmc(V, simulate_mlmc(V, path, sched, Vec::Zero(1)), g, sched);
    CHECK(t.tr_a2 == 0.0);
    CHECK(t.tr_ra == 0.0);
    CHECK(t.tr_r2 == 0.0);
  }
  SUBCASE("quadratic: closed-form limits and gap halving") {
    const double beta = 2.0, tau = 0.25;
    const auto V = PotentialModel::isotropic(1, beta);
    double prev_gap = 0.0;
    for (int level = 0; level < 4; ++level) {
      const NoisePath p = level == 0 ? path : sample_path(make_grid(0.5, 1, 8 << level), 1, 1, 1);
      const TimeGrid gl = p.grid;
      const auto s = deterministic_od_schedule(gl, 0.5);
      const auto t = trace_diagnostics_mlmc(V, simulate_mlmc(V, p, s, Vec::Zero(1)), gl, s);
      CHECK(t.tr_a2 == 0.0);
      CHECK(t.limit_ra == doctest::Approx(tau * tau * beta * beta));
      CHECK(t.limit_r2 == doctest::Approx(2 * tau * tau * beta * beta));
      const double gap = std::abs(t.tr_ra - t.limit_ra);
      if (level > 0) CHECK(prev_gap / gap == doctest::Approx(2.0).epsilon(0.1));
      prev_gap = gap;
    }
  }
}
