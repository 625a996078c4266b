#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lgir/girsanov.hpp"
#include "lgir/simulate.hpp"

namespace lgir {

enum class DivergenceKind { KL, Renyi };

// Ordered pair (law the paths were simulated from, law it is compared with).
struct Direction {
  std::string p_law = "algorithm";
  std::string q_law = "diffusion";
};

struct DivergenceEstimate {
  DivergenceKind kind = DivergenceKind::KL;
  double q = 1.0;
  double value = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  long n_rejected = 0;
  Direction direction;
  bool reliable = true;  // false when >= 1% of the paths were rejected or the value is not finite
};

// Paths whose weight is flagged non-invertible or non-finite are excluded and counted.
bool weight_usable(const LogWeight& w);

// KL(P||Q) = E_P[-log M] with M = dQ/dP: sample mean of -log_weight, jackknife SE.
DivergenceEstimate estimate_kl(const std::vector<LogWeight>& weights, const Direction& direction = {});

// Same expectation with the Skorohod term dropped: E_P[delta psi] = 0, so
// E_P[-log M] = E_P[1/2 |psi|^2 - log_cf_det].  Far smaller variance when the
// divergence is small, because the dropped term has standard deviation sqrt(2 KL).
DivergenceEstimate estimate_kl_control_variate(const std::vector<LogWeight>& weights,
                                               const Direction& direction = {});

// R_q(P||Q) = 1/(q-1) log E_P[M^{-(q-1)}], jackknife SE on the log-mean-exp.
DivergenceEstimate estimate_renyi(const std::vector<LogWeight>& weights, double q,
                                  const Direction& direction = {});

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  long n_rejected = 0;
};
// E_P[M], which equals one for a valid change of measure.
MeanEstimate estimate_normalization(const std::vector<LogWeight>& weights);

double gaussian_kl(const Vec& mean1, const Mat& cov1, const Vec& mean2, const Mat& cov2);

// min(1, sqrt(kl / 2)).
double pinsker_tv_bound(double kl);

struct GaussianLaw {
  Vec mean;
  Mat cov;
};

// State law (x) or (x, p) of an independent-coordinate initial law.
GaussianLaw gaussian_initial(const InitialLaw& init, bool underdamped);

// One outer step of a scheme on a quadratic potential written as
//   z' = A z + b + B u,  u ~ N(0, I).
struct AffineStepMap {
  Mat A;
  Vec b;
  Mat B;
};

// Grid: the scheme as implemented on the m-cell grid (u = the cell increments).
// Continuum: the scheme driven by a continuous Brownian path; the Gaussian
// stochastic integrals are taken with their exact joint covariance.
enum class MarginalMode { Grid, Continuum };

AffineStepMap scheme_step_map(Scheme scheme, const PotentialModel& V, const TimeGrid& grid,
                              const MidpointSchedule& schedule, double gamma, MarginalMode mode);

// Exact law after N steps (deterministic schedules only).
GaussianLaw scheme_marginal_gaussian(Scheme scheme, const PotentialModel& V, const TimeGrid& grid,
                                     const MidpointSchedule& schedule, double gamma,
                                     const GaussianLaw& initial, MarginalMode mode = MarginalMode::Grid);

// Exact law of the Langevin (underdamped: kinetic Langevin) diffusion at time T.
GaussianLaw diffusion_marginal_gaussian(const PotentialModel& V, bool underdamped, double gamma,
                                        double T, const GaussianLaw& initial);

// Ordinary least squares of log y on log x.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double fit_se = 0.0;  // from the regression residuals
  double mc_se = 0.0;   // from the per-point standard errors
  int points = 0;
};
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& y_se = {});

struct LocalErrorPoint {
  double h = 0.0;
  int m = 0;
  double strong_x = 0.0, strong_x_se = 0.0;
  double strong_p = 0.0, strong_p_se = 0.0;
  double weak_x = 0.0, weak_x_se = 0.0;
  double weak_p = 0.0, weak_p_se = 0.0;
};

struct LocalErrorReport {
  Scheme scheme = Scheme::DmUlmc;
  std::vector<LocalErrorPoint> points;
  SlopeFit strong_x, strong_p, weak_x, weak_p;  // p fits are empty for overdamped schemes
};

struct LocalErrorOptions {
  int m = 1024;  // inner cells per step of the coupled reference
  long n_paths = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  double tau_fraction = 0.5;  // overdamped midpoint
};

// One step from z0 ~ init, scheme and reference synchronously coupled on the same
// noise path.  The reference is the exact flow for quadratic V and otherwise the
// fine-grid baseline scheme (Euler-Maruyama / exponential Euler) on m cells.
// Strong errors: E|Z_h - Z_h^alg|^2.  Weak errors: E_z0 |E[Z_h - Z_h^alg | z0]|^2,
// exact for quadratic V (both maps are affine in the noise); otherwise
// |E[Z_h - Z_h^alg]|^2.
LocalErrorReport local_error_sweep(Scheme scheme, const PotentialModel& V, double gamma,
                                   const std::vector<double>& hs, const InitialLaw& init,
                                   const LocalErrorOptions& options = {});

}  // namespace lgir
