#pragma once

#include <Eigen/Dense>
#include <string>

namespace lgir {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<Vec>;
using CVecRef = Eigen::Ref<const Vec>;
using MatRef = Eigen::Ref<Mat>;

enum class PotentialKind {
  IsotropicQuadratic,
  AnisotropicQuadratic,
  QuadraticPlusSmoothPerturbation,
  ProductNonGaussian,
};

std::string to_string(PotentialKind kind);

// Bounded smooth perturbation added to a diagonal quadratic:
//   amplitude * sum_i cos(frequency * x_i + phase_i) + coupling * cos(frequency * <u, x>)
// with u = (1, ..., 1) / sqrt(d) and phase_i = 0.7 i.  Its Hessian is bounded by
// (|amplitude| + |coupling|) * frequency^2 in operator norm.
struct PerturbationSpec {
  double amplitude = 0.1;
  double coupling = 0.1;
  double frequency = 1.0;
};

// One-dimensional factor of a product potential:
//   v(y) = curvature / 2 * y^2 + logcosh_weight * log(cosh(y)),
// so v'' = curvature + logcosh_weight * sech^2(y).
struct ProductSpec {
  double curvature = 1.0;
  double logcosh_weight = 1.0;
};

// Target potential V : R^d -> R with exact gradient/Hessian and certified
// smoothness constants.  Quadratic kinds are V(x) = 1/2 <x - c, H (x - c)> + <b, x>
// with H = diag(spectrum).  Immutable after construction.
class PotentialModel {
 public:
  static PotentialModel isotropic(int dim, double scale);
  static PotentialModel anisotropic(const Vec& spectrum);
  static PotentialModel perturbed(const Vec& spectrum, const PerturbationSpec& spec);
  static PotentialModel product(int dim, const ProductSpec& spec);

  // Quadratic kinds only: shift the minimiser / add a linear tilt.
  PotentialModel with_center(const Vec& center) const;
  PotentialModel with_tilt(const Vec& tilt) const;

  PotentialKind kind() const { return kind_; }
  int dimension() const { return dim_; }
  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  bool is_quadratic() const;

  double value(const CVecRef& x) const;
  Vec gradient(const CVecRef& x) const;
  Mat hessian(const CVecRef& x) const;
  // Allocation-free variants used in the hot loops.
  void gradient_into(const CVecRef& x, VecRef g) const;
  void hessian_into(const CVecRef& x, MatRef h) const;

  // Quadratic kinds: grad V(x) = H x + g0.
  const Vec& spectrum() const { return spectrum_; }
  Mat quadratic_matrix() const;
  Vec gradient_offset() const;

  const PerturbationSpec& perturbation() const { return perturbation_; }
  const ProductSpec& product_spec() const { return product_; }

 private:
  PotentialModel() = default;
  void check_input(const CVecRef& x) const;

  PotentialKind kind_ = PotentialKind::IsotropicQuadratic;
  int dim_ = 0;
  double beta_ = 0.0;
  double alpha_ = 0.0;
  Vec spectrum_;
  Vec center_;
  Vec tilt_;
  PerturbationSpec perturbation_;
  ProductSpec product_;
};

}  // namespace lgir
