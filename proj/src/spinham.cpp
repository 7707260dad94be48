#include "rpsim/spinham.hpp"

#include <cmath>

#include "rpsim/integrate.hpp"
#include "rpsim/linalg.hpp"

namespace rpsim {

bool Nucleus::isotropic(double tol) const {
  return (tensor - tensor(0, 0) * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <=
         tol;
}

int Nucleus::multiplicity() const {
  double m = 2.0 * spin + 1.0;
  int mi = static_cast<int>(std::lround(m));
  if (mi < 2 || std::abs(m - mi) > 1e-12)
    throw DomainError("nuclear spin must be a positive half-integer");
  return mi;
}

HilbertLayout SpinSystemSpec::make_layout(bool st0_only) const {
  std::vector<int> dims;
  for (const auto& per_radical : nuclei)
    for (const auto& nuc : per_radical) dims.push_back(nuc.multiplicity());
  return HilbertLayout(dims, st0_only);
}

std::array<Matrix, 3> spin_matrices(int multiplicity) {
  if (multiplicity < 2) throw DomainError("spin_matrices: multiplicity must be >= 2");
  const int n = multiplicity;
  const double j = 0.5 * (n - 1);
  Matrix sz = Matrix::Zero(n, n), sp = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double m = j - k;
    sz(k, k) = m;
    if (k > 0) sp(k - 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  Matrix sm = sp.adjoint();
  return {0.5 * (sp + sm), -0.5 * kI * (sp - sm), sz};
}

Matrix singlet_triplet_transform() {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix t = Matrix::Zero(4, 4);
  t(0, 1) = s;  t(0, 2) = -s;  // S
  t(1, 1) = s;  t(1, 2) = s;   // T0
  t(2, 0) = 1.0;               // T+
  t(3, 3) = 1.0;               // T-
  return t;
}

BetweenGenerator build_hamiltonian(const SpinSystemSpec& spec,
                                   const HilbertLayout& layout) {
  if (!(spec.make_layout(layout.st0_only()) == layout))
    throw DimensionError("build_hamiltonian: spec inconsistent with layout");

  const int n_nuc = layout.nuclear_dim();
  const auto& dims = layout.nuclear_dims();
  const int n_spins = static_cast<int>(dims.size());

  // Electron operators in the product basis.
  const auto half = spin_matrices(2);
  const Matrix id2 = Matrix::Identity(2, 2);
  std::array<std::array<Matrix, 3>, 2> s_el;
  for (int a = 0; a < 3; ++a) {
    s_el[0][a] = spec.g_factors[0] * kron(half[a], id2);
    s_el[1][a] = spec.g_factors[1] * kron(id2, half[a]);
  }

  // Nuclear spin component b of the spin at slot `pos` within the nuclear
  // register.
  auto nuclear_op = [&](int pos, int b) {
    Matrix op = Matrix::Identity(1, 1);
    for (int k = 0; k < n_spins; ++k) {
      if (k == pos)
        op = kron(op, spin_matrices(dims[k])[b]);
      else
        op = kron(op, Matrix::Identity(dims[k], dims[k]));
    }
    return op;
  };

  const Matrix id_nuc = Matrix::Identity(n_nuc, n_nuc);
  Matrix h_prod = Matrix::Zero(4 * n_nuc, 4 * n_nuc);
  int slot = 0;
  for (int m = 0; m < 2; ++m) {
    for (int a = 0; a < 3; ++a)
      if (spec.field_b[a] != 0.0) h_prod += spec.field_b[a] * kron(s_el[m][a], id_nuc);
    for (const auto& nuc : spec.nuclei[m]) {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (nuc.tensor(a, b) != 0.0)
            h_prod += nuc.tensor(a, b) * kron(s_el[m][a], nuclear_op(slot, b));
      ++slot;
    }
  }
  const Matrix t4 = singlet_triplet_transform();
  Matrix h_st = kron(t4, id_nuc) * h_prod * kron(t4, id_nuc).adjoint();

  const int d = layout.total_dim();
  Matrix h = Matrix::Zero(d, d);
  const int r_dim = layout.r_dim();
  h.topLeftCorner(r_dim, r_dim) = h_st.topLeftCorner(r_dim, r_dim);
  h = hermitized(h);
  return BetweenGenerator{h, std::nullopt};
}

DensityMatrix initial_state(const HilbertLayout& layout) {
  const int n = layout.nuclear_dim();
  const int d = layout.total_dim();
  Matrix rho = Matrix::Zero(d, d);
  rho.topLeftCorner(n, n) = Matrix::Identity(n, n) / double(n);
  return DensityMatrix{rho, true};
}

Matrix propagate_between(const Matrix& rho, const BetweenGenerator& gen, double dt) {
  if (dt < 0.0) throw DomainError("propagate_between: dt must be >= 0");
  if (dt == 0.0) return rho;
  if (!gen.dissipator) {
    Matrix u = expm_hermitian(gen.hamiltonian, -kI * dt);
    return u * rho * u.adjoint();
  }
  auto rhs = [&](double, const Matrix& r) {
    return (-kI * (gen.hamiltonian * r - r * gen.hamiltonian) + gen.dissipator->apply(r))
        .eval();
  };
  double hnorm = operator_norm(gen.hamiltonian) + superop_norm(*gen.dissipator);
  return rk4(rhs, rho, 0.0, dt, default_step(hnorm, 0.0));
}

UnitaryPropagator::UnitaryPropagator(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  evecs_ = es.eigenvectors();
  evals_ = es.eigenvalues();
}

Matrix UnitaryPropagator::u(double t) const {
  Vector phases = (-kI * t * evals_.cast<Complex>().array()).exp();
  return evecs_ * phases.asDiagonal() * evecs_.adjoint();
}

Matrix UnitaryPropagator::advance(const Matrix& rho, double dt) const {
  Matrix ut = u(dt);
  return ut * rho * ut.adjoint();
}

}  // namespace rpsim
