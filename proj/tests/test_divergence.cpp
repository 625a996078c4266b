#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "lgir/divergence.hpp"

using namespace lgir;

namespace {

// Log weights log M ~ N(-s^2/2, s^2) under P, so that E_P[M] = 1.  Then
// KL(P||Q) = s^2/2 and R_q(P||Q) = q s^2/2.
std::vector<LogWeight> lognormal_weights(double s, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(-0.5 * s * s, s);
  std::vector<LogWeight> w(n);
  for (auto& x : w) {
    x.log_weight = nd(gen);
    x.energy = 0.0;
  }
  return w;
}

Mat rotation(double angle) {
  Mat R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return R;
}

}  // namespace

TEST_CASE("Gaussian KL") {
  Vec m0 = Vec::Zero(1), m1 = Vec::Ones(1);
  const Mat I1 = Mat::Identity(1, 1);
  CHECK(gaussian_kl(m0, I1, m1, I1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gaussian_kl(m1, I1, m1, I1) == 0.0);

  // Scalar closed form: log(s2/s1) + (s1^2 + dm^2)/(2 s2^2) - 1/2.
  const double s1 = 0.7, s2 = 1.3, dm = 0.4;
  const double expect = std::log(s2 / s1) + (s1 * s1 + dm * dm) / (2 * s2 * s2) - 0.5;
  CHECK(gaussian_kl(m0, I1 * s1 * s1, m0 + Vec::Constant(1, dm), I1 * s2 * s2) ==
        doctest::Approx(expect).epsilon(1e-13));

  // Invariant under a common rotation.
  Mat A(2, 2), B(2, 2);
  A << 1.0, 0.3, 0.3, 0.5;
  B << 2.0, -0.2, -0.2, 0.8;
  Vec a(2), b(2);
  a << 0.1, -0.4;
  b << 0.6, 0.2;
  const Mat R = rotation(0.83);
  const double base = gaussian_kl(a, A, b, B);
  const double rotated = gaussian_kl(R * a, R * A * R.transpose(), R * b, R * B * R.transpose());
  CHECK(std::abs(base - rotated) < 1e-12);

  // Nearly identical laws: no cancellation below the true value.
  const double tiny = gaussian_kl(a, A, a, A * (1 + 1e-9));
  CHECK(tiny == doctest::Approx(0.5 * 2 * 1e-18 / 2).epsilon(1e-3));

  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(gaussian_kl(a, bad, b, B), std::domain_error);
}

TEST_CASE("Pinsker bound") {
  CHECK(pinsker_tv_bound(0.02) == doctest::Approx(0.1));
  CHECK(pinsker_tv_bound(2.0) == 1.0);
  CHECK(pinsker_tv_bound(0.0) == 0.0);
  CHECK_THROWS_AS(pinsker_tv_bound(-0.1), std::domain_error);
}

TEST_CASE("KL and Renyi estimators on synthetic weights") {
  const double s = 0.3;
  const auto w = lognormal_weights(s, 100000, 1);
  const auto kl = estimate_kl(w);
  CHECK(std::abs(kl.value - s * s / 2) < 4 * kl.std_error);
  const auto r101 = estimate_renyi(w, 1.01);
  const auto r2 = estimate_renyi(w, 2.0);
  const auto r3 = estimate_renyi(w, 3.0);
  CHECK(std::abs(r101.value - kl.value) < 0.02 * kl.value + 1e-3);
  CHECK(std::abs(r2.value - s * s) < 4 * r2.std_error);
  CHECK(r2.value <= r3.value);
  CHECK(r2.q == 2.0);
  CHECK(r2.kind == DivergenceKind::Renyi);

  std::vector<LogWeight> same(1000);
  CHECK(estimate_renyi(same, 2.0).value == 0.0);
  CHECK(estimate_kl(same).value == 0.0);
  CHECK_THROWS(estimate_renyi(same, 1.0));
}

TEST_CASE("normalization and rejections") {
  auto w = lognormal_weights(0.5, 50000, 2);
  const auto norm = estimate_normalization(w);
  CHECK(std::abs(norm.mean - 1.0) < 4 * norm.std_error);
  CHECK(norm.n_rejected == 0);

  w[3].invertible = false;
  w[7].log_weight = std::nan("");
  const auto kl = estimate_kl(w);
  CHECK(kl.n_rejected == 2);
  CHECK(kl.n_paths == 50000);
  CHECK(kl.reliable);
  for (int i = 0; i < 1000; ++i) w[i].invertible = false;
  CHECK_FALSE(estimate_kl(w).reliable);
}

TEST_CASE("control-variate KL drops the Skorohod term") {
  std::vector<LogWeight> w(3);
  w[0].energy = 0.5, w[0].log_cf_det = 0.1;
  w[1].energy = 0.2, w[1].log_cf_det = -0.1;
  w[2].energy = 0.3, w[2].log_cf_det = 0.0;
  CHECK(estimate_kl_control_variate(w).value == doctest::Approx((0.4 + 0.3 + 0.3) / 3));
}

TEST_CASE("flat potential: Euler-Maruyama covariance grows by 2h per step") {
  const auto V = PotentialModel::isotropic(2, 0.0);
  const TimeGrid g = make_grid(1.0, 5, 4);
  GaussianLaw init{Vec::Ones(2), Mat::Identity(2, 2) * 0.5};
  const auto law = scheme_marginal_gaussian(Scheme::EmLd, V, g, deterministic_od_schedule(g, 0.5), 1.0, init);
  CHECK((law.mean - init.mean).norm() < 1e-14);
  CHECK((law.cov - Mat::Identity(2, 2) * (0.5 + 2.0 * g.T)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("stationary law is preserved by the diffusion marginal") {
  Vec spec(2);
  spec << 0.5, 2.0;
  const auto V = PotentialModel::anisotropic(spec);
  const auto init = gaussian_initial(stationary_initial(V), true);
  const auto law = diffusion_marginal_gaussian(V, true, 1.0, 3.0, init);
  CHECK((law.mean - init.mean).norm() < 1e-12);
  CHECK((law.cov - init.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("M-LMC scheme marginal agrees with simulation") {
  Vec spec(2);
  spec << 0.8, 1.5;
  const auto V = PotentialModel::anisotropic(spec);
  const TimeGrid g = make_grid(1.0, 4, 4);
  const auto sched = deterministic_od_schedule(g, 0.5);
  Vec x0(2);
  x0 << 1.0, -1.0;
  const auto law = scheme_marginal_gaussian(Scheme::Mlmc, V, g, sched, 1.0, GaussianLaw{x0, Mat::Zero(2, 2)});
  const int n = 20000;
  Vec s = Vec::Zero(2), sq = Vec::Zero(2);
  for (int i = 0; i < n; ++i) {
    const auto tr = simulate_mlmc(V, sample_path(g, 2, 6, static_cast<std::uint64_t>(i)), sched, x0);
    const Vec x = tr.x.col(g.cells());
    s += x;
    sq += x.cwiseProduct(x);
  }
  const Vec mean = s / n;
  const Vec var = sq / n - mean.cwiseProduct(mean);
  for (int c = 0; c < 2; ++c) {
    const double v = law.cov(c, c);
    CHECK(std::abs(mean[c] - law.mean[c]) < 4 * std::sqrt(v / n));
    CHECK(std::abs(var[c] - v) < 4 * v * std::sqrt(2.0 / n));
  }
}

TEST_CASE("underdamped step maps contract") {
  Vec spec(2);
  spec << 0.5, 2.0;
  const auto V = PotentialModel::anisotropic(spec);
  const TimeGrid g = make_grid(2.0, 8, 4);
  for (auto mode : {MarginalMode::Grid, MarginalMode::Continuum}) {
    const auto ul = scheme_step_map(Scheme::Ulmc, V, g, deterministic_ud_schedule(g), 1.0, mode);
    CHECK(Eigen::EigenSolver<Mat>(ul.A).eigenvalues().cwiseAbs().maxCoeff() < 1.0);
    const auto dm = scheme_step_map(Scheme::DmUlmc, V, g, deterministic_ud_schedule(g), 1.0, mode);
    CHECK(Eigen::EigenSolver<Mat>(dm.A).eigenvalues().cwiseAbs().maxCoeff() < 1.0);
  }
  // Grid and continuum noise agree when the grid is fine.
  const TimeGrid fine = make_grid(2.0, 8, 256);
  const auto a = scheme_step_map(Scheme::DmUlmc, V, fine, deterministic_ud_schedule(fine), 1.0, MarginalMode::Grid);
  const auto b = scheme_step_map(Scheme::DmUlmc, V, fine, deterministic_ud_schedule(fine), 1.0, MarginalMode::Continuum);
  CHECK((a.A - b.A).cwiseAbs().maxCoeff() < 1e-12);
  const Mat qa = a.B * a.B.transpose(), qb = b.B * b.B.transpose();
  CHECK((qa - qb).cwiseAbs().maxCoeff() < 1e-3 * qb.cwiseAbs().maxCoeff());
}

TEST_CASE("log-log fit") {
  std::vector<double> x = {0.1, 0.2, 0.4, 0.8}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 2.5));
  const auto fit = fit_loglog(x, y);
  CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0));
  CHECK(fit.points == 4);
}
