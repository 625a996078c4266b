#pragma once

namespace lgir {

// phi_k(x) = sum_{n>=0} (-x)^n / (n+k)!, i.e. phi_0 = e^{-x},
// phi_1 = (1 - e^{-x}) / x, phi_{k+1} = (1/k! - phi_k) / x.
double phi_function(int k, double x);

struct ExpKernels {
  double e1 = 1.0;
  double e2 = 0.0;
  double e3 = 0.0;
};

// E1(s,t) = e^{-gamma (t-s)}, E2 = (1 - E1)/gamma, E3 = ((t-s) + (E1 - 1)/gamma)/gamma.
// Evaluated through phi functions so that small gamma (t - s) is cancellation-free.
ExpKernels exp_integrals(double gamma, double s, double t);

// Kernel E_k(s,t) for k = 1..4 where E4(s,t) = int_s^t E3(s,r) dr.
double exp_kernel(int k, double gamma, double s, double t);

struct SigmaCoefficients {
  double s11 = 0.0;  // int_0^h E1(t,h)^2 dt
  double s12 = 0.0;  // int_0^h E1(t,h) E2(t,h) dt
  double s22 = 0.0;  // int_0^h E2(t,h)^2 dt
  double delta = 0.0;  // s11 s22 - s12^2
};

SigmaCoefficients sigma_coefficients(double gamma, double h);

// Integral of E_k(s,t) over [a, min(b, t)] (zero when a >= t), k = 1..3.
double kernel_cell_integral(int k, double gamma, double a, double b, double t);
// Integral of E_k(s,t) * (s - a) / (b - a) over [a, b] for b <= t, k = 1..2:
// the weight a piecewise-linear interpolant puts on the right node of the cell.
double kernel_cell_right_weight(int k, double gamma, double a, double b, double t);

}  // namespace lgir
