#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "lgir/potential.hpp"

using namespace lgir;

namespace {

// Central-difference gradient of V.value, independent of V.gradient.
Vec fd_gradient(const PotentialModel& V, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (V.value(up) - V.value(dn)) / (2 * h);
  }
  return g;
}

Mat fd_hessian(const PotentialModel& V, const Vec& x, double h = 1e-5) {
  Mat H(x.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    H.col(i) = (V.gradient(up) - V.gradient(dn)) / (2 * h);
  }
  return H;
}

Vec random_point(std::mt19937_64& gen, int d, double scale = 2.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = nd(gen);
  return x;
}

std::vector<PotentialModel> all_kinds() {
  Vec spec(3);
  spec << 0.5, 1.0, 2.0;
  return {PotentialModel::isotropic(3, 1.5), PotentialModel::anisotropic(spec),
          PotentialModel::perturbed(spec, PerturbationSpec{0.2, 0.1, 1.3}),
          PotentialModel::product(3, ProductSpec{1.0, 0.8})};
}

}  // namespace

TEST_CASE("quadratic values by hand") {
  CHECK(PotentialModel::isotropic(3, 1.0).value(Vec::Zero(3)) == 0.0);
  Vec x1(1);
  x1 << 2.0;
  CHECK(PotentialModel::isotropic(1, 1.0).value(x1) == doctest::Approx(2.0));
  Vec spec(2);
  spec << 1.0, 4.0;
  CHECK(PotentialModel::anisotropic(spec).value(Vec::Ones(2)) == doctest::Approx(2.5));
}

TEST_CASE("gradient of an isotropic quadratic is linear") {
  const double beta = 3.0;
  const auto V = PotentialModel::isotropic(4, beta);
  std::mt19937_64 gen(5);
  const Vec x = random_point(gen, 4);
  CHECK((V.gradient(x) - beta * x).norm() < 1e-14);
  CHECK(V.gradient(Vec::Zero(4)).norm() == 0.0);
}

TEST_CASE("product potential has a stationary point at the origin and a diagonal Hessian") {
  const auto V = PotentialModel::product(3, ProductSpec{1.0, 0.8});
  CHECK(V.gradient(Vec::Zero(3)).norm() < 1e-15);
  std::mt19937_64 gen(9);
  const Mat H = V.hessian(random_point(gen, 3));
  CHECK((H - Mat(H.diagonal().asDiagonal())).norm() == 0.0);
}

TEST_CASE("quadratic Hessians equal the declared spectrum matrix") {
  Vec spec(3);
  spec << 0.5, 1.0, 2.0;
  const auto V = PotentialModel::anisotropic(spec);
  std::mt19937_64 gen(3);
  CHECK((V.hessian(random_point(gen, 3)) - Mat(spec.asDiagonal())).norm() == 0.0);
  CHECK(V.beta() == 2.0);
  CHECK(V.alpha() == 0.5);
}

TEST_CASE("derivatives agree with finite differences") {
  std::mt19937_64 gen(11);
  for (const auto& V : all_kinds()) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vec x = random_point(gen, V.dimension());
      const Vec g = V.gradient(x);
      const Vec g_fd = fd_gradient(V, x);
      CHECK((g - g_fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
      const Mat H = V.hessian(x);
      CHECK((H - fd_hessian(V, x)).norm() <= 1e-5 * std::max(1.0, H.norm()));
    }
  }
}

TEST_CASE("Hessians are symmetric with spectrum inside [alpha, beta]") {
  std::mt19937_64 gen(13);
  for (const auto& V : all_kinds()) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Vec x = random_point(gen, V.dimension(), 3.0);
      const Mat H = V.hessian(x);
      CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues();
      CHECK(ev.cwiseAbs().maxCoeff() <= V.beta() * (1 + 1e-9));
      if (V.alpha() > 0) CHECK(ev.minCoeff() >= V.alpha() * (1 - 1e-9));
    }
  }
}

TEST_CASE("non-finite input is a domain error") {
  const auto V = PotentialModel::isotropic(2, 1.0);
  Vec x(2);
  x << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(V.value(x), std::domain_error);
  CHECK_THROWS_AS(V.gradient(x), std::domain_error);
  CHECK_THROWS_AS(V.hessian(x), std::domain_error);
}

TEST_CASE("centred and tilted quadratics keep their closed form") {
  Vec spec(2), c(2), b(2);
  spec << 1.0, 3.0;
  c << 0.5, -1.0;
  b << 0.2, 0.1;
  const auto V = PotentialModel::anisotropic(spec).with_center(c).with_tilt(b);
  CHECK(V.is_quadratic());
  std::mt19937_64 gen(17);
  const Vec x = random_point(gen, 2);
  const Vec expect = Mat(spec.asDiagonal()) * (x - c) + b;
  CHECK((V.gradient(x) - expect).norm() < 1e-14);
  CHECK((V.quadratic_matrix() * x + V.gradient_offset() - expect).norm() < 1e-14);
}
