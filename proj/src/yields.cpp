#include "rpsim/yields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rpsim/density.hpp"
#include "rpsim/linalg.hpp"

namespace rpsim {

namespace {

// <Q_S(tau)> evaluated through the cached eigendecomposition of H.
class SingletFidelityCurve {
 public:
  SingletFidelityCurve(const Matrix& h, const Matrix& rho0, const Matrix& q_s)
      : prop_(h), rho0_(rho0), q_s_(q_s) {}

  double operator()(double t) const {
    Matrix u = prop_.u(t);
    return expectation(u * rho0_ * u.adjoint(), q_s_);
  }

 private:
  UnitaryPropagator prop_;
  Matrix rho0_;
  Matrix q_s_;
};

}  // namespace

double singlet_probability(const BetweenGenerator& between, const Matrix& rho0,
                           const SubspaceOps& ops, double rate, double t) {
  if (!validate_inicon(rho0, ops))
    throw InvariantViolationError("singlet_probability: rho0 has R-P coherence");
  SingletFidelityCurve qs(between.hamiltonian, rho0, ops.q(Channel::S));
  auto integrand = [&](double tau) { return rate * std::exp(-rate * tau) * qs(tau); };
  return adaptive_simpson(integrand, 0.0, t, 1e-8);
}

double yield_integral(const YieldSpec& spec, const BetweenGenerator& between,
                      const Matrix& rho0, const SubspaceOps& ops,
                      const HilbertLayout& layout) {
  if (spec.rate <= 0.0) throw DomainError("yield_integral: rate must be > 0");
  const double t_inf = spec.t_infinity > 0.0 ? spec.t_infinity : 40.0 / spec.rate;
  UnitaryPropagator prop(between.hamiltonian);

  std::function<double(const Matrix&)> f;
  switch (spec.functional) {
    case YieldFunctional::SingletFidelity:
      f = [&](const Matrix& rho) { return expectation(rho, ops.q(Channel::S)); };
      break;
    case YieldFunctional::Concurrence:
      f = [&](const Matrix& rho) {
        Matrix el = electron_state(rho, layout);
        double tr = el.trace().real();
        if (tr <= kZeroTraceTol) return 0.0;
        return concurrence(el / tr);
      };
      break;
    case YieldFunctional::Custom:
      if (spec.custom_op.size() == 0)
        throw ValidationError("yield_integral: custom functional without operator");
      f = [&](const Matrix& rho) { return expectation(rho, spec.custom_op); };
      break;
  }

  auto integrand = [&](double t) {
    Matrix u = prop.u(t);
    Matrix rho = u * rho0 * u.adjoint();
    return spec.rate * std::exp(-spec.rate * t) * f(rho);
  };
  return adaptive_simpson(integrand, 0.0, t_inf, 1e-8);
}

double yield_integral_first_encounter(const YieldSpec& spec,
                                      const BetweenGenerator& between,
                                      const Matrix& rho0, const SubspaceOps& ops,
                                      const HilbertLayout& layout,
                                      const RateModel& model) {
  model.validate();
  UnitaryPropagator prop(between.hamiltonian);
  std::function<double(const Matrix&)> f;
  switch (spec.functional) {
    case YieldFunctional::SingletFidelity:
      f = [&](const Matrix& rho) { return expectation(rho, ops.q(Channel::S)); };
      break;
    case YieldFunctional::Concurrence:
      f = [&](const Matrix& rho) {
        Matrix el = electron_state(rho, layout);
        double tr = el.trace().real();
        return tr <= kZeroTraceTol ? 0.0 : concurrence(el / tr);
      };
      break;
    case YieldFunctional::Custom:
      if (spec.custom_op.size() == 0)
        throw ValidationError("yield: custom functional without operator");
      f = [&](const Matrix& rho) { return expectation(rho, spec.custom_op); };
      break;
  }
  auto integrand = [&](double t) {
    Matrix u = prop.u(t);
    Matrix rho = u * rho0 * u.adjoint();
    return model.rate(t) * std::exp(-model.cumulative(t)) * f(rho);
  };
  return adaptive_simpson(integrand, 0.0, model.cutoff(), 1e-8);
}

Sensitivity magnetic_sensitivity(
    const YieldSpec& spec, const std::function<BetweenGenerator(double)>& family,
    const Matrix& rho0, const SubspaceOps& ops, const HilbertLayout& layout, double b,
    double delta_b) {
  if (delta_b <= 0.0) throw DomainError("magnetic_sensitivity: delta_b must be > 0");
  auto phi = [&](double field) {
    return yield_integral(spec, family(field), rho0, ops, layout);
  };
  auto central = [&](double h) { return (phi(b + h) - phi(b - h)) / (2.0 * h); };
  const double d1 = central(delta_b);
  const double d2 = central(0.5 * delta_b);
  return Sensitivity{(4.0 * d2 - d1) / 3.0, std::abs(d2 - d1)};
}

Matrix electron_state(const Matrix& rho, const HilbertLayout& layout) {
  if (layout.st0_only())
    throw ValidationError("electron_state: full (S,T0,T+,T-) layout required");
  const int n = layout.nuclear_dim();
  Matrix el = Matrix::Zero(4, 4);
  for (int b1 = 0; b1 < 4; ++b1)
    for (int b2 = 0; b2 < 4; ++b2)
      el(b1, b2) = rho.block(layout.block_offset(b1), layout.block_offset(b2), n, n)
                       .trace();
  return el;
}

double concurrence(const Matrix& rho_electron) {
  if (rho_electron.rows() != 4 || rho_electron.cols() != 4)
    throw DimensionError("concurrence: 4x4 two-qubit state required");
  DensityMatrix dm{rho_electron, true};
  std::string why;
  if (!is_valid_density(dm, &why))
    throw InvariantViolationError("concurrence: not a state (" + why + ")");

  // Work in the product basis where the spin flip is (sigma_y (x) sigma_y) K.
  const Matrix t4 = singlet_triplet_transform();
  const Matrix rho = t4.adjoint() * rho_electron * t4;
  Matrix yy = Matrix::Zero(4, 4);
  yy(0, 3) = -1.0; yy(1, 2) = 1.0; yy(2, 1) = 1.0; yy(3, 0) = -1.0;
  const Matrix rho_tilde = yy * rho.conjugate() * yy;
  Eigen::ComplexEigenSolver<Matrix> es(rho * rho_tilde);
  Eigen::Vector4d lam;
  for (int i = 0; i < 4; ++i)
    lam(i) = std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  std::sort(lam.data(), lam.data() + 4, std::greater<double>());
  return std::max(0.0, lam(0) - lam(1) - lam(2) - lam(3));
}

double entanglement_lifetime(const BetweenGenerator& between, const Matrix& rho0,
                             const HilbertLayout& layout, double t_max, double tol) {
  UnitaryPropagator prop(between.hamiltonian);
  auto entanglement = [&](double t) {
    Matrix u = prop.u(t);
    Matrix el = electron_state(u * rho0 * u.adjoint(), layout);
    double tr = el.trace().real();
    if (tr <= kZeroTraceTol) return 0.0;
    return concurrence(el / tr);
  };
  if (entanglement(t_max) > 0.0) return t_max;
  // Bracket the last positive point on a coarse grid, then bisect.
  const int n_scan = 256;
  double lo = -1.0, hi = t_max;
  for (int i = n_scan; i >= 0; --i) {
    double t = t_max * i / n_scan;
    if (entanglement(t) > 0.0) {
      lo = t;
      hi = t_max * (i + 1) / n_scan;
      break;
    }
  }
  if (lo < 0.0) return 0.0;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (entanglement(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace rpsim
