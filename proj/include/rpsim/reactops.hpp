#pragma once

#include <array>

#include "rpsim/subspace.hpp"
#include "rpsim/superop.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Per-channel decay and dephasing rates (1/time), r_j = 2t|pi_j|^2,
// d_j = 2t|delta_j|^2.
struct ReactionRates {
  std::array<double, 4> r{};  // indexed by Channel
  std::array<double, 4> d{};
  SymmetryMode mode = SymmetryMode::General;

  void validate(const HilbertLayout& layout) const;
  double max_rate() const;
};

// The collapsed singlet/triplet rate quartet of the simplified equations.
// d_s and d_t are interchangeable on states without R-P coherence; only
// their sum enters the closed forms.
struct CollapsedRates {
  double r_s = 0, r_t = 0, d_s = 0, d_t = 0;

  double r_mean() const { return 0.5 * (r_s + r_t); }
  double d_mean() const { return 0.5 * (d_s + d_t); }
  double eta() const { return r_mean() + d_mean(); }
  double gamma_s() const { return r_s + d_s; }
  double gamma_t() const { return r_t + d_t; }
  double p_s() const { return gamma_s() > 0 ? d_s / gamma_s() : 0.0; }
  double p_t() const { return gamma_t() > 0 ? d_t / gamma_t() : 0.0; }
  double eta_s() const { return eta() > 0 ? r_s / eta() : 0.0; }
  double eta_t() const { return eta() > 0 ? r_t / eta() : 0.0; }
};

CollapsedRates collapse(const ReactionRates& rates);

// eta_jk = (r_j + r_k + d_j + d_k)/2 plus the collapsed coefficients.
struct DerivedCoeffs {
  std::array<std::array<double, 4>, 4> eta_jk{};
  CollapsedRates collapsed;
};

DerivedCoeffs derive_coeffs(const ReactionRates& rates);

// Full-space master-equation generator sum_j [r_j L(L_j) + d_j L(Q_j)];
// trace-preserving.  Triplet decay always uses per-level jump operators.
SuperOp generator_full(const ReactionRates& rates, const SubspaceOps& ops);

// Collapsed singlet/triplet generator: per-level recombination transfers
// plus block dephasing on Q_S and Q_T.
SuperOp generator_simplified(const CollapsedRates& rates, const SubspaceOps& ops);

// Trace-reducing R-subspace generator sum_j [-(r_j/2){Q_j,.} + d_j L(Q_j)].
SuperOp generator_r_subspace(const ReactionRates& rates, const SubspaceOps& ops);

// Collapsed R-subspace generator with block projectors.
SuperOp generator_r_simplified(const CollapsedRates& rates, const SubspaceOps& ops);

// Exact solutions.  rho0 must have no R-P coherence.
Matrix closed_form_full(const Matrix& rho0, const ReactionRates& rates,
                        const SubspaceOps& ops, double t);
Matrix closed_form_triplet_symmetric(const Matrix& rho0, const ReactionRates& rates,
                                     const SubspaceOps& ops, double t);
Matrix closed_form_simplified(const Matrix& rho0, const CollapsedRates& rates,
                              const SubspaceOps& ops, double t);
Matrix closed_form_r_subspace(const Matrix& rho0r, const CollapsedRates& rates,
                              const SubspaceOps& ops, double t);

// Pure-decay effective propagator U_eff = e^{-r_S t/2} Q_S + e^{-r_T t/2} Q_T.
Matrix u_eff_pure_decay(const CollapsedRates& rates, const SubspaceOps& ops, double t);

// Non-Hermitian pure-state propagation |psi(t)> = exp(-i H_eff t)|psi0> with
// H_eff = H - (i/2) sum_j r_j Q_j; requires pure decay (all d_j = 0).
// Returns the unnormalized state and its squared norm, the no-jump survival
// probability.
std::pair<Vector, double> nonhermitian_propagate(const Vector& psi0,
                                                 const ReactionRates& rates,
                                                 const Matrix& hamiltonian,
                                                 const SubspaceOps& ops, double t);

// Kominis reaction operator, kept nonlinear as proposed; evaluated for
// side-by-side comparison only.
class KominisGenerator {
 public:
  struct Result {
    Matrix rhs;
    double p_coh;
    bool p_coh_flagged;  // 0/0 resolved to p_coh = 0
  };

  KominisGenerator(double k_s, double k_t, const SubspaceOps& ops);
  Result eval(const Matrix& rho_r) const;
  double p_coh(const Matrix& rho_r, bool* flagged = nullptr) const;

 private:
  double k_s_, k_t_;
  Matrix q_s_, q_t_;
};

inline KominisGenerator kominis_generator(double k_s, double k_t,
                                          const SubspaceOps& ops) {
  return KominisGenerator(k_s, k_t, ops);
}

// Trace-preserving nonlinear equation for the unrecombined RP:
// d rho/dt = -i[H, rho] + (L - <L>) rho with <L> = -sum_j r_j <Q_j>.
class ConditionalREquation {
 public:
  ConditionalREquation(const ReactionRates& rates, const Matrix& hamiltonian,
                       const SubspaceOps& ops);
  Matrix rhs(const Matrix& rho_r) const;
  Matrix integrate(const Matrix& rho0, double t, double dt) const;

 private:
  SuperOp reaction_;
  Matrix h_, q_s_, q_t_;
  double r_s_, r_t_;
};

inline ConditionalREquation conditional_r_equation(const ReactionRates& rates,
                                                   const Matrix& hamiltonian,
                                                   const SubspaceOps& ops) {
  return ConditionalREquation(rates, hamiltonian, ops);
}

}  // namespace rpsim
