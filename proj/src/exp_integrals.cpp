#include "lgir/exp_integrals.hpp"

#include <cmath>
#include <stdexcept>

namespace lgir {

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

double phi_function(int k, double x) {
  if (k < 0) throw std::invalid_argument("phi_function needs k >= 0");
  if (std::abs(x) < 1.0) {
    // Alternating series; 30 terms are far below double precision for |x| < 1.
    double term = 1.0 / factorial(k);
    double sum = term;
    for (int n = 1; n < 30; ++n) {
      term *= -x / (n + k);
      sum += term;
    }
    return sum;
  }
  double phi = std::exp(-x);
  for (int j = 0; j < k; ++j) phi = (1.0 / factorial(j) - phi) / x;
  return phi;
}

double exp_kernel(int k, double gamma, double s, double t) {
  if (t < s) throw std::domain_error("exponential kernel needs t >= s");
  if (!(gamma > 0.0)) throw std::domain_error("exponential kernel needs gamma > 0");
  if (k < 1 || k > 4) throw std::invalid_argument("exponential kernel index must be 1..4");
  const double u = t - s;
  return std::pow(u, k - 1) * phi_function(k - 1, gamma * u);
}

ExpKernels exp_integrals(double gamma, double s, double t) {
  if (t < s) throw std::domain_error("exp_integrals needs t >= s");
  if (!(gamma > 0.0)) throw std::domain_error("exp_integrals needs gamma > 0");
  const double u = t - s;
  const double x = gamma * u;
  return ExpKernels{phi_function(0, x), u * phi_function(1, x), u * u * phi_function(2, x)};
}

SigmaCoefficients sigma_coefficients(double gamma, double h) {
  if (!(h > 0.0)) throw std::domain_error("sigma_coefficients needs h > 0");
  if (!(gamma > 0.0)) throw std::domain_error("sigma_coefficients needs gamma > 0");
  const double x = gamma * h;
  SigmaCoefficients c;
  c.s11 = h * phi_function(1, 2.0 * x);
  c.s12 = h * h * (2.0 * phi_function(2, 2.0 * x) - phi_function(2, x));
  c.s22 = 2.0 * h * h * h * (2.0 * phi_function(3, 2.0 * x) - phi_function(3, x));
  c.delta = c.s11 * c.s22 - c.s12 * c.s12;
  return c;
}

double kernel_cell_integral(int k, double gamma, double a, double b, double t) {
  if (a >= t) return 0.0;
  const double hi = b < t ? b : t;
  // d/ds E_{k+1}(s,t) = -E_k(s,t).
  return exp_kernel(k + 1, gamma, a, t) - exp_kernel(k + 1, gamma, hi, t);
}

double kernel_cell_right_weight(int k, double gamma, double a, double b, double t) {
  if (b > t) throw std::domain_error("right-node weight needs the cell inside [0, t]");
  // Eight-point Gauss-Legendre on the cell; the integrand is smooth on the scale
  // 1/gamma, so this is exact to rounding for cells with gamma (b - a) <= 1 and
  // avoids the cancellation of the integration-by-parts closed form.
  static constexpr double kNodes[4] = {0.1834346424956498, 0.5255324099163290,
                                       0.7966664774136267, 0.9602898564975363};
  static constexpr double kWeights[4] = {0.3626837833783620, 0.3137066458778873,
                                         0.2223810344533745, 0.1012285362903763};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (double sign : {-1.0, 1.0}) {
      const double s = mid + sign * half * kNodes[i];
      acc += kWeights[i] * exp_kernel(k, gamma, s, t) * (s - a);
    }
  }
  return acc * half / (b - a);
}

}  // namespace lgir
