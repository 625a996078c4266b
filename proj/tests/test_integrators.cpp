#include <doctest.h>

#include <cmath>
#include <functional>

#include "lgir/exp_integrals.hpp"
#include "lgir/integrators.hpp"

using namespace lgir;

namespace {

Vec scalar(double v) {
  Vec x(1);
  x << v;
  return x;
}

Mat random_xi(int d, int m, std::uint64_t stream) {
  return sample_path(make_grid(1.0, 1, m), d, 77, stream).xi;
}

// f(z + w) - f(z) - f(w) + f(0) vanishes for an affine map f.
double superposition_defect(const std::function<Vec(const Vec&, const Mat&)>& f, const Vec& za,
                            const Mat& xa, const Vec& zb, const Mat& xb) {
  const Vec lhs = f(za + zb, xa + xb) - f(za, xa) - f(zb, xb) +
                  f(Vec::Zero(za.size()), Mat::Zero(xa.rows(), xa.cols()));
  return lhs.cwiseAbs().maxCoeff();
}

PotentialModel quadratic2() {
  Vec spec(2);
  spec << 0.7, 1.6;
  return PotentialModel::anisotropic(spec);
}

}  // namespace

TEST_CASE("Euler-Maruyama") {
  SUBCASE("zero gradient is scaled Brownian motion") {
    const auto V = PotentialModel::isotropic(2, 0.0);
    const Mat xi = random_xi(2, 8, 1);
    const double eta = 0.05;
    Vec x0(2);
    x0 << 0.3, -1.0;
    const Mat x = step_em_ld(V, eta, x0, xi);
    Vec B = Vec::Zero(2);
    for (int i = 0; i < 8; ++i) {
      B += std::sqrt(eta) * xi.col(i);
      CHECK((x.col(i + 1) - (x0 + std::sqrt(2.0) * B)).norm() < 1e-14);
    }
  }
  SUBCASE("hand recursion") {
    const auto V = PotentialModel::isotropic(1, 1.0);
    const Mat x = step_em_ld(V, 0.1, scalar(1.0), Mat::Zero(1, 1));
    CHECK(x(0, 1) == doctest::Approx(0.9));
  }
  SUBCASE("affine in (x0, xi) for quadratic V") {
    const auto V = quadratic2();
    auto f = [&](const Vec& z, const Mat& xi) { Mat x = step_em_ld(V, 0.1, z, xi); return Vec(x.col(xi.cols())); };
    CHECK(superposition_defect(f, Vec::Ones(2), random_xi(2, 4, 2), -0.5 * Vec::Ones(2), random_xi(2, 4, 3)) < 1e-12);
  }
}

TEST_CASE("randomized midpoint (overdamped)") {
  SUBCASE("zero gradient") {
    const auto V = PotentialModel::isotropic(1, 0.0);
    const Mat xi = random_xi(1, 4, 4);
    const double eta = 0.05;
    const auto seg = step_mlmc(V, eta, 2, scalar(0.4), xi);
    const double B_tau = std::sqrt(eta) * (xi(0, 0) + xi(0, 1));
    const double B_h = std::sqrt(eta) * xi.sum();
    CHECK(seg.x_plus[0] == doctest::Approx(0.4 + std::sqrt(2.0) * B_tau));
    CHECK(seg.x(0, 4) == doctest::Approx(0.4 + std::sqrt(2.0) * B_h));
  }
  SUBCASE("hand recursion: h = 0.2, tau = 0.1") {
    const auto V = PotentialModel::isotropic(1, 1.0);
    const auto seg = step_mlmc(V, 0.1, 1, scalar(1.0), Mat::Zero(1, 2));
    CHECK(seg.x_plus[0] == doctest::Approx(0.9));
    CHECK(seg.x(0, 2) == doctest::Approx(0.82));
    CHECK(seg.x(0, 1) == doctest::Approx(0.91));
  }
  SUBCASE("tau = 0 is one Euler step") {
    const auto V = PotentialModel::perturbed(Vec::Ones(2), PerturbationSpec{});
    const Mat xi = random_xi(2, 1, 5);
    Vec x0(2);
    x0 << 0.2, 0.9;
    const auto seg = step_mlmc(V, 0.25, 0, x0, xi);
    const Mat em = step_em_ld(V, 0.25, x0, xi);
    CHECK((seg.x.col(1) - em.col(1)).norm() == 0.0);
  }
  SUBCASE("affine for quadratic V") {
    const auto V = quadratic2();
    auto f = [&](const Vec& z, const Mat& xi) { return Vec(step_mlmc(V, 0.05, 3, z, xi).x.col(8)); };
    CHECK(superposition_defect(f, Vec::Ones(2), random_xi(2, 8, 6), Vec::Zero(2), random_xi(2, 8, 7)) < 1e-12);
  }
}

TEST_CASE("exponential Euler (ULMC)") {
  SUBCASE("deterministic exponential decay") {
    const auto V = PotentialModel::isotropic(1, 0.0);
    const auto plan = make_ud_grid_plan(1.5, 0.2, 4);
    const auto out = step_ulmc(V, plan, scalar(0.3), scalar(2.0), Mat::Zero(1, 4));
    const auto k = exp_integrals(1.5, 0.0, 0.2);
    CHECK(out.x[0] == doctest::Approx(0.3 + k.e2 * 2.0));
    CHECK(out.p[0] == doctest::Approx(k.e1 * 2.0));
  }
  SUBCASE("hand evaluation: gamma = 1, h = 0.1") {
    const auto V = PotentialModel::isotropic(1, 1.0);
    const auto plan = make_ud_grid_plan(1.0, 0.1, 4);
    const auto out = step_ulmc(V, plan, scalar(1.0), scalar(0.0), Mat::Zero(1, 4));
    const auto k = exp_integrals(1.0, 0.0, 0.1);
    CHECK(out.p[0] == doctest::Approx(-k.e2).epsilon(1e-14));
    CHECK(out.x[0] == doctest::Approx(1.0 - k.e3).epsilon(1e-14));
  }
  SUBCASE("affine for quadratic V") {
    const auto V = quadratic2();
    const auto plan = make_ud_grid_plan(2.0, 0.2, 4);
    auto f = [&](const Vec& z, const Mat& xi) {
      const auto s = step_ulmc(V, plan, z.head(2), z.tail(2), xi);
      Vec out(4);
      out << s.x, s.p;
      return out;
    };
    Vec a(4), b(4);
    a << 1, 2, -1, 0.5;
    b << 0.1, -0.3, 0.2, 0.7;
    CHECK(superposition_defect(f, a, random_xi(2, 4, 8), b, random_xi(2, 4, 9)) < 1e-12);
  }
  SUBCASE("endpoint plan matches the full plan") {
    const auto V = quadratic2();
    const Mat xi = random_xi(2, 8, 10);
    const auto a = step_ulmc(V, make_ud_grid_plan(1.0, 0.3, 8), Vec::Ones(2), Vec::Zero(2), xi);
    const auto b = step_ulmc(V, make_ud_endpoint_plan(1.0, 0.3, 8), Vec::Ones(2), Vec::Zero(2), xi);
    CHECK((a.x - b.x).norm() < 1e-15);
    CHECK((a.p - b.p).norm() < 1e-15);
  }
}

TEST_CASE("DM-ULMC marginal update") {
  SUBCASE("zero gradient reduces to ULMC") {
    const auto V = PotentialModel::isotropic(2, 0.0);
    const auto plan = make_ud_grid_plan(1.0, 0.3, 6);
    const auto mid = make_ud_midpoints(plan, 0.1, 0.15);
    const Mat xi = random_xi(2, 6, 11);
    Vec x0(2), p0(2);
    x0 << 0.5, -0.5;
    p0 << 1.0, 0.2;
    const auto dm = step_dmulmc_marginal(V, plan, mid, x0, p0, xi);
    const auto ul = step_ulmc(V, plan, x0, p0, xi);
    CHECK((dm.x - ul.x).norm() < 1e-15);
    CHECK((dm.p - ul.p).norm() < 1e-15);
    CHECK(dm.gradient_queries == 3);
  }
  SUBCASE("hand evaluation of the interpolants and update") {
    const auto V = PotentialModel::isotropic(1, 1.0);
    const auto plan = make_ud_grid_plan(1.0, 0.3, 6);
    const auto mid = make_ud_midpoints(plan, 0.1, 0.15);
    const auto out = step_dmulmc_marginal(V, plan, mid, scalar(1.0), scalar(0.0), Mat::Zero(1, 6));
    const double xm = 1.0 - exp_integrals(1.0, 0.0, 0.1).e3;
    const double xp = 1.0 - exp_integrals(1.0, 0.0, 0.15).e3;
    const auto kh = exp_integrals(1.0, 0.0, 0.3);
    CHECK(out.x_minus[0] == doctest::Approx(xm).epsilon(1e-14));
    CHECK(out.x_plus[0] == doctest::Approx(xp).epsilon(1e-14));
    CHECK(out.x[0] == doctest::Approx(1.0 - kh.e3 * xm).epsilon(1e-14));
    CHECK(out.p[0] == doctest::Approx(-kh.e2 * xp).epsilon(1e-14));
  }
}

TEST_CASE("DM-ULMC interpolation") {
  const auto plan = make_ud_grid_plan(1.3, 0.25, 8);
  const auto mid = make_ud_midpoints(plan, plan.h / 3, plan.h / 2);
  const Mat xi = random_xi(2, 8, 12);
  Vec x0(2), p0(2);
  x0 << 0.8, -0.4;
  p0 << -0.3, 0.6;

  SUBCASE("zero gradient: no multipliers, one iteration") {
    const auto V = PotentialModel::isotropic(2, 0.0);
    const auto seg = solve_dmulmc_interpolation(V, plan, mid, x0, p0, xi);
    CHECK(seg.iterations == 1);
    CHECK(seg.lambda1.norm() == 0.0);
    CHECK(seg.lambda2.norm() == 0.0);
  }
  SUBCASE("Picard iteration agrees with the direct linear solve") {
    const auto V = quadratic2();
    const auto it = solve_dmulmc_interpolation(V, plan, mid, x0, p0, xi);
    const auto ls = solve_dmulmc_interpolation_linear(V, plan, mid, x0, p0, xi);
    CHECK((it.x - ls.x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((it.p - ls.p).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((it.lambda1 - ls.lambda1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((it.lambda2 - ls.lambda2).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("endpoint equals the marginal update") {
    for (const auto& V : {quadratic2(), PotentialModel::perturbed(Vec::Ones(2) * 1.5, PerturbationSpec{0.3, 0.2, 1.1})}) {
      const auto seg = solve_dmulmc_interpolation(V, plan, mid, x0, p0, xi);
      const auto mar = step_dmulmc_marginal(V, plan, mid, x0, p0, xi);
      CHECK((seg.x.col(8) - mar.x).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((seg.p.col(8) - mar.p).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((seg.x.col(0) - x0).norm() == 0.0);
    }
  }
  SUBCASE("divergent fixed point is a step-size error") {
    const auto V = PotentialModel::isotropic(2, 400.0);
    const auto big = make_ud_grid_plan(1.0, 1.0, 8);
    const auto bm = make_ud_midpoints(big, 1.0 / 3, 0.5);
    CHECK_THROWS_AS(solve_dmulmc_interpolation(V, big, bm, x0, p0, random_xi(2, 8, 13)), StepSizeError);
  }
}

TEST_CASE("whole-path drivers count gradient queries") {
  const TimeGrid g = make_grid(1.0, 5, 4);
  const NoisePath path = sample_path(g, 2, 3, 0);
  const auto V = quadratic2();
  CHECK(simulate_em_ld(V, path, Vec::Zero(2)).gradient_queries == 20);
  CHECK(simulate_mlmc(V, path, deterministic_od_schedule(g, 0.5), Vec::Zero(2)).gradient_queries == 10);
  CHECK(simulate_ulmc(V, path, 1.0, Vec::Zero(2), Vec::Zero(2)).gradient_queries == 5);
  const auto ud = simulate_dmulmc(V, path, deterministic_ud_schedule(g), 1.0, Vec::Zero(2), Vec::Zero(2));
  CHECK(ud.gradient_queries == 15);
  CHECK(ud.x.cols() == 21);
}

TEST_CASE("non-finite states are overflow errors naming the step") {
  const auto V = PotentialModel::isotropic(1, 1e308);
  const TimeGrid g = make_grid(1.0, 3, 2);
  const NoisePath path = sample_path(g, 1, 1, 1);
  try {
    simulate_em_ld(V, path, scalar(1e10));
    FAIL("expected an overflow error");
  } catch (const OverflowError& e) {
    CHECK(std::string(e.what()).find("outer step 0") != std::string::npos);
  }
}
