#include "lgir/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lgir {

namespace {

double phase(int i) { return 0.7 * i; }

}  // namespace

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::IsotropicQuadratic: return "isotropic";
    case PotentialKind::AnisotropicQuadratic: return "anisotropic";
    case PotentialKind::QuadraticPlusSmoothPerturbation: return "perturbed";
    case PotentialKind::ProductNonGaussian: return "product";
  }
  return "unknown";
}

PotentialModel PotentialModel::isotropic(int dim, double scale) {
  if (dim <= 0) throw std::invalid_argument("potential dimension must be positive");
  if (!(scale >= 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("isotropic scale must be finite and nonnegative");
  PotentialModel v;
  v.kind_ = PotentialKind::IsotropicQuadratic;
  v.dim_ = dim;
  v.spectrum_ = Vec::Constant(dim, scale);
  v.center_ = Vec::Zero(dim);
  v.tilt_ = Vec::Zero(dim);
  v.beta_ = scale;
  v.alpha_ = scale;
  return v;
}

PotentialModel PotentialModel::anisotropic(const Vec& spectrum) {
  if (spectrum.size() == 0) throw std::invalid_argument("spectrum must be nonempty");
  if (!spectrum.allFinite()) throw std::invalid_argument("spectrum must be finite");
  PotentialModel v;
  v.kind_ = PotentialKind::AnisotropicQuadratic;
  v.dim_ = static_cast<int>(spectrum.size());
  v.spectrum_ = spectrum;
  v.center_ = Vec::Zero(v.dim_);
  v.tilt_ = Vec::Zero(v.dim_);
  v.beta_ = spectrum.cwiseAbs().maxCoeff();
  v.alpha_ = std::max(0.0, spectrum.minCoeff());
  return v;
}

PotentialModel PotentialModel::perturbed(const Vec& spectrum, const PerturbationSpec& spec) {
  PotentialModel v = anisotropic(spectrum);
  v.kind_ = PotentialKind::QuadraticPlusSmoothPerturbation;
  v.perturbation_ = spec;
  const double bound =
      (std::abs(spec.amplitude) + std::abs(spec.coupling)) * spec.frequency * spec.frequency;
  v.beta_ = std::max(std::abs(spectrum.maxCoeff() + bound), std::abs(spectrum.minCoeff() - bound));
  v.alpha_ = std::max(0.0, spectrum.minCoeff() - bound);
  return v;
}

PotentialModel PotentialModel::product(int dim, const ProductSpec& spec) {
  if (dim <= 0) throw std::invalid_argument("potential dimension must be positive");
  PotentialModel v;
  v.kind_ = PotentialKind::ProductNonGaussian;
  v.dim_ = dim;
  v.product_ = spec;
  v.center_ = Vec::Zero(dim);
  v.tilt_ = Vec::Zero(dim);
  const double lo = std::min(spec.curvature, spec.curvature + spec.logcosh_weight);
  const double hi = std::max(spec.curvature, spec.curvature + spec.logcosh_weight);
  v.beta_ = std::max(std::abs(lo), std::abs(hi));
  v.alpha_ = std::max(0.0, lo);
  return v;
}

PotentialModel PotentialModel::with_center(const Vec& center) const {
  if (!is_quadratic()) throw std::invalid_argument("center shift requires a quadratic potential");
  if (center.size() != dim_) throw std::invalid_argument("center has wrong dimension");
  PotentialModel v = *this;
  v.center_ = center;
  return v;
}

PotentialModel PotentialModel::with_tilt(const Vec& tilt) const {
  if (!is_quadratic()) throw std::invalid_argument("linear tilt requires a quadratic potential");
  if (tilt.size() != dim_) throw std::invalid_argument("tilt has wrong dimension");
  PotentialModel v = *this;
  v.tilt_ = tilt;
  return v;
}

bool PotentialModel::is_quadratic() const {
  return kind_ == PotentialKind::IsotropicQuadratic || kind_ == PotentialKind::AnisotropicQuadratic;
}

void PotentialModel::check_input(const CVecRef& x) const {
  if (x.size() != dim_) throw std::domain_error("potential evaluated at a point of wrong dimension");
  if (!x.allFinite()) throw std::domain_error("potential evaluated at a non-finite point");
}

double PotentialModel::value(const CVecRef& x) const {
  check_input(x);
  switch (kind_) {
    case PotentialKind::IsotropicQuadratic:
    case PotentialKind::AnisotropicQuadratic: {
      const Vec y = x - center_;
      return 0.5 * y.dot(spectrum_.cwiseProduct(y)) + tilt_.dot(x);
    }
    case PotentialKind::QuadraticPlusSmoothPerturbation: {
      const PerturbationSpec& p = perturbation_;
      double v = 0.5 * x.dot(spectrum_.cwiseProduct(x));
      for (int i = 0; i < dim_; ++i) v += p.amplitude * std::cos(p.frequency * x[i] + phase(i));
      v += p.coupling * std::cos(p.frequency * x.sum() / std::sqrt(static_cast<double>(dim_)));
      return v;
    }
    case PotentialKind::ProductNonGaussian: {
      double v = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double y = x[i];
        // log cosh(y) = |y| + log1p(exp(-2|y|)) - log 2, stable for large |y|.
        const double lc = std::abs(y) + std::log1p(std::exp(-2.0 * std::abs(y))) - std::log(2.0);
        v += 0.5 * product_.curvature * y * y + product_.logcosh_weight * lc;
      }
      return v;
    }
  }
  return 0.0;
}

void PotentialModel::gradient_into(const CVecRef& x, VecRef g) const {
  check_input(x);
  switch (kind_) {
    case PotentialKind::IsotropicQuadratic:
    case PotentialKind::AnisotropicQuadratic:
      g = spectrum_.cwiseProduct(x - center_) + tilt_;
      return;
    case PotentialKind::QuadraticPlusSmoothPerturbation: {
      const PerturbationSpec& p = perturbation_;
      const double rs = 1.0 / std::sqrt(static_cast<double>(dim_));
      const double coupled = -p.coupling * p.frequency * std::sin(p.frequency * x.sum() * rs) * rs;
      for (int i = 0; i < dim_; ++i) {
        g[i] = spectrum_[i] * x[i] - p.amplitude * p.frequency * std::sin(p.frequency * x[i] + phase(i)) +
               coupled;
      }
      return;
    }
    case PotentialKind::ProductNonGaussian:
      for (int i = 0; i < dim_; ++i)
        g[i] = product_.curvature * x[i] + product_.logcosh_weight * std::tanh(x[i]);
      return;
  }
}

void PotentialModel::hessian_into(const CVecRef& x, MatRef h) const {
  check_input(x);
  h.setZero();
  switch (kind_) {
    case PotentialKind::IsotropicQuadratic:
    case PotentialKind::AnisotropicQuadratic:
      h.diagonal() = spectrum_;
      return;
    case PotentialKind::QuadraticPlusSmoothPerturbation: {
      const PerturbationSpec& p = perturbation_;
      const double w2 = p.frequency * p.frequency;
      const double rs = 1.0 / std::sqrt(static_cast<double>(dim_));
      const double coupled = -p.coupling * w2 * std::cos(p.frequency * x.sum() * rs) * rs * rs;
      h.setConstant(coupled);
      for (int i = 0; i < dim_; ++i)
        h(i, i) += spectrum_[i] - p.amplitude * w2 * std::cos(p.frequency * x[i] + phase(i));
      return;
    }
    case PotentialKind::ProductNonGaussian:
      for (int i = 0; i < dim_; ++i) {
        const double t = std::tanh(x[i]);
        h(i, i) = product_.curvature + product_.logcosh_weight * (1.0 - t * t);
      }
      return;
  }
}

Vec PotentialModel::gradient(const CVecRef& x) const {
  Vec g(dim_);
  gradient_into(x, g);
  return g;
}

Mat PotentialModel::hessian(const CVecRef& x) const {
  Mat h(dim_, dim_);
  hessian_into(x, h);
  return h;
}

Mat PotentialModel::quadratic_matrix() const {
  if (!is_quadratic()) throw std::invalid_argument("quadratic_matrix requires a quadratic potential");
  return spectrum_.asDiagonal();
}

Vec PotentialModel::gradient_offset() const {
  if (!is_quadratic()) throw std::invalid_argument("gradient_offset requires a quadratic potential");
  return tilt_ - spectrum_.cwiseProduct(center_);
}

}  // namespace lgir
