#pragma once

#include "rpsim/density.hpp"
#include "rpsim/encounter.hpp"
#include "rpsim/superop.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Generator of a conditional (jumpless) evolution built from the no-click
// map A_0 activated at rate r: L = r(A_0 - 1) + extra.  The nonlinear
// trace-preserving equation d rho/dt = (L - <L>) rho is solved by
// normalizing the linear solution.
class ConditionalGenerator {
 public:
  ConditionalGenerator(const SuperOp& a0, double rate, const SuperOp* extra = nullptr);

  const SuperOp& linear() const { return linear_; }
  Matrix rhs_nonlinear(const Matrix& rho) const;

  // exp(L t) rho0 via the dense representation.
  Matrix solve_linear(const Matrix& rho0, double t) const;

  // (normalized state, probability p(t) = Tr rho_N).
  std::pair<Matrix, double> solve_conditional(const Matrix& rho0, double t) const;

  // Direct RK4 integration of the nonlinear equation (cross-check route).
  Matrix integrate_nonlinear(const Matrix& rho0, double t, double dt) const;

 private:
  SuperOp linear_;
  Matrix dense_;
};

ConditionalGenerator conditional_generator(const SuperOp& a0, double rate,
                                           const SuperOp* extra = nullptr);

// Closed-form dark evolution (no evolution between encounters, triplet
// symmetry without triplet dephasing).
struct DarkSolution {
  Matrix rho_n;      // improper state of the chemical system
  double trace_n;    // p(D): no fluorescence up to t
  double p_rd;       // p(R,D): trace of the R block of rho_n
  double trace_r;    // p(R|D) = p(R,D)/p(D)
};

DarkSolution dark_closed_form(const Matrix& rho0, const EncounterMapParams& params,
                              const DetectionEfficiencies& eff, double rate,
                              const SubspaceOps& ops, double t);

// Convenience overload for population-only initial states (q_s, q_t, q_p);
// the triplet population is spread evenly over the triplet levels.
DarkSolution dark_closed_form(double q_s0, double q_t0, double q_p0,
                              const EncounterMapParams& params,
                              const DetectionEfficiencies& eff, double rate,
                              const SubspaceOps& ops, double t);

// r t_max = (1/R) ln[(2 - eta_d) q_R0 / (1 - eta_d q_R0)] and the
// small-error approximation (1/R) ln[1/(eps_R + eps_D)].
struct DarkSurvival {
  double exact;
  double approx;
};

DarkSurvival dark_survival_time(double big_r, double eta_d, double q_r0);

// State update when one effect A is known to have occurred somewhere in a
// cloud of n systems: rho -> [(n-1)/n + (1/n) A/<A>] rho.
Matrix cloud_single_effect(const Matrix& rho, const SuperOp& a, long n);

// State update M_l given l fluorescence clicks from a cloud of n systems in
// one step of click probability p; b is the click map, a the no-click map,
// a + b trace-preserving.
class EnsembleClickMap {
 public:
  EnsembleClickMap(long n, long l, double p, const SuperOp& a, const SuperOp& b);

  Matrix apply(const Matrix& rho) const;
  // p(l) = binomial(l; n, p <B>).
  double probability(const Matrix& rho) const;

 private:
  long n_, l_;
  double p_;
  const SuperOp* a_;
  const SuperOp* b_;
};

inline EnsembleClickMap ensemble_click_map(long n, long l, double p, const SuperOp& a,
                                           const SuperOp& b) {
  return EnsembleClickMap(n, l, p, a, b);
}

// Euler step of the ensemble-fluorescence stochastic master equation
// d rho/dt = r[(A_CPT - 1) + z(B - <B>)] rho; enforces r dt <= 0.01.
Matrix stochastic_me_step(const Matrix& rho, double z, double rate,
                          const SuperOp& a_cpt, const SuperOp& b, double dt);

// Fluorescence fluctuation signal z = (xdot - r<B>)/(r<B>) from the click
// count l of one step.
double clicks_to_z(long l, long n, double dt, double rate, double mean_b);

}  // namespace rpsim
