#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "lgir/ou_flow.hpp"

using namespace lgir;

namespace {

// Gauss-Legendre (5 nodes) on n panels of int_0^t e^{As} S S^T e^{A^T s} ds,
// with the matrix exponential from Eigen's own implementation.
Mat covariance_quadrature(const Mat& A, const Mat& S, double t, int n = 64) {
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  const double step = t / n;
  Mat Q = Mat::Zero(A.rows(), A.rows());
  for (int i = 0; i < n; ++i) {
    const double c = (i + 0.5) * step;
    for (int k = 0; k < 5; ++k) {
      const Mat E = (A * (c + 0.5 * step * x[k])).exp();
      Q += (0.5 * step * w[k]) * E * S * S.transpose() * E.transpose();
    }
  }
  return Q;
}

}  // namespace

TEST_CASE("transition covariance matches quadrature") {
  Vec spec(2);
  spec << 0.5, 3.0;
  const auto V = PotentialModel::anisotropic(spec);
  for (double gamma : {0.5, 2.0, std::sqrt(4 * 3.0)}) {  // includes a critically damped mode
    const auto sde = kinetic_langevin_sde(V, gamma);
    const auto tr = linear_sde_transition(sde.A, sde.a, sde.S, 0.3);
    CHECK((tr.Q - covariance_quadrature(sde.A, sde.S, 0.3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((tr.Phi - Mat((sde.A * 0.3).exp())).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto od = langevin_sde(V);
  const auto tr = linear_sde_transition(od.A, od.a, od.S, 0.7);
  CHECK((tr.Q - covariance_quadrature(od.A, od.S, 0.7)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("coupled cell map splits the noise covariance") {
  Vec spec(2);
  spec << 1.0, 2.0;
  const auto sde = kinetic_langevin_sde(PotentialModel::anisotropic(spec), 1.5);
  const double eta = 0.05;
  const auto cell = coupled_cell_map(sde, eta);
  const auto tr = linear_sde_transition(sde.A, sde.a, sde.S, eta);
  // K xi + R zeta has covariance K K^T + R R^T, which must be the exact Q.
  CHECK((cell.K * cell.K.transpose() + cell.R * cell.R.transpose() - tr.Q).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((cell.Phi - tr.Phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flat potential: Brownian motion and free kinetic flow") {
  const auto V = PotentialModel::isotropic(2, 0.0);
  const TimeGrid g = make_grid(1.0, 2, 4);
  const NoisePath path = sample_path(g, 2, 1, 3);
  Vec x0(2);
  x0 << 1.0, -2.0;
  const Mat x = exact_ou_flow_ld(V, path, x0);
  const Mat B = brownian_partial_sums(path);
  for (int i = 0; i <= g.cells(); ++i) CHECK((x.col(i) - x0 - std::sqrt(2.0) * B.col(i)).norm() < 1e-13);

  // gamma-damped momentum without noise: p_t = e^{-gamma t} p0 in mean.
  const auto sde = kinetic_langevin_sde(V, 2.0);
  const auto tr = linear_sde_transition(sde.A, sde.a, sde.S, 0.5);
  CHECK(tr.Phi(2, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(tr.Phi(0, 2) == doctest::Approx((1 - std::exp(-1.0)) / 2));
}

TEST_CASE("one-dimensional OU moments by Monte Carlo") {
  const auto V = PotentialModel::isotropic(1, 1.0);
  const TimeGrid g = make_grid(1.0, 2, 4);
  Vec x0(1);
  x0 << 2.0;
  const int n = 20000;
  double s = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Mat x = exact_ou_flow_ld(V, sample_path(g, 1, 5, static_cast<std::uint64_t>(i)), x0);
    s += x(0, g.cells());
    sq += x(0, g.cells()) * x(0, g.cells());
  }
  const double mean = s / n, var = sq / n - mean * mean;
  const double var_exact = 1 - std::exp(-2.0);
  CHECK(std::abs(mean - 2.0 * std::exp(-1.0)) < 4 * std::sqrt(var_exact / n));
  CHECK(std::abs(var - var_exact) < 4 * var_exact * std::sqrt(2.0 / n));
}

TEST_CASE("exact flow needs a quadratic potential") {
  const auto V = PotentialModel::product(1, ProductSpec{});
  const NoisePath path = sample_path(make_grid(1.0, 1, 2), 1, 1, 1);
  CHECK_THROWS_AS(exact_ou_flow_ld(V, path, Vec::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(exact_ou_flow_uld(V, 1.0, path, Vec::Zero(1), Vec::Zero(1)), std::invalid_argument);
}
