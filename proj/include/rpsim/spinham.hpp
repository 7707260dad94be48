#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rpsim/density.hpp"
#include "rpsim/layout.hpp"
#include "rpsim/superop.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// One nuclear spin: magnitude I and the 3x3 hyperfine tensor coupling it to
// its radical's electron (angular-frequency units, mu_B g/2 absorbed).
struct Nucleus {
  double spin = 0.5;
  Eigen::Matrix3d tensor = Eigen::Matrix3d::Identity();

  bool isotropic(double tol = 1e-14) const;
  int multiplicity() const;
};

// Zeeman + hyperfine system: field in angular-frequency units, per-radical g
// deviations as scalar multipliers on the electron spin operators.
struct SpinSystemSpec {
  Eigen::Vector3d field_b = Eigen::Vector3d::Zero();
  std::array<double, 2> g_factors{1.0, 1.0};
  std::array<std::vector<Nucleus>, 2> nuclei;

  HilbertLayout make_layout(bool st0_only = false) const;
};

// Standard angular-momentum matrices (Sx, Sy, Sz) with hbar = 1, basis
// ordered m = +j ... -j.  multiplicity = 2j+1 >= 2.
std::array<Matrix, 3> spin_matrices(int multiplicity);

// Fixed 4x4 unitary from the two-electron product basis (uu, ud, du, dd) to
// the (S, T0, T+, T-) ordering; rows are the singlet/triplet states.
Matrix singlet_triplet_transform();

// Generator of the evolution between encounters: commutator with a
// Hamiltonian that vanishes on the P block, plus an optional dissipator
// (absent by default).
struct BetweenGenerator {
  Matrix hamiltonian;
  std::optional<SuperOp> dissipator;
};

// H = sum_m S_m . (B + sum_k gamma_mk . I_mk) on the R block, zero on P.
BetweenGenerator build_hamiltonian(const SpinSystemSpec& spec,
                                   const HilbertLayout& layout);

// |S><S| (x) 1_nuc / Tr(1_nuc); normalized, zero on the P block.
DensityMatrix initial_state(const HilbertLayout& layout);

// rho -> U rho U^dag with U = exp(-i H dt); with a dissipator present, RK4
// integration of the full generator.
Matrix propagate_between(const Matrix& rho, const BetweenGenerator& gen, double dt);

// Cached Hermitian eigendecomposition of H for repeated propagation.
class UnitaryPropagator {
 public:
  explicit UnitaryPropagator(const Matrix& h);
  Matrix u(double t) const;
  Matrix advance(const Matrix& rho, double dt) const;
  const RealVector& eigenvalues() const { return evals_; }

 private:
  Matrix evecs_;
  RealVector evals_;
};

}  // namespace rpsim
