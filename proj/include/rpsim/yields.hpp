#pragma once

#include <functional>

#include "rpsim/ratemodel.hpp"
#include "rpsim/spinham.hpp"
#include "rpsim/subspace.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// p_S(t) = int_0^t r e^{-r tau} <Q_S(tau)> d tau under unitary evolution
// (exponential recombination model).  Adaptive Simpson, relative tolerance
// 1e-8.
double singlet_probability(const BetweenGenerator& between, const Matrix& rho0,
                           const SubspaceOps& ops, double rate, double t);

enum class YieldFunctional { SingletFidelity, Concurrence, Custom };

struct YieldSpec {
  YieldFunctional functional = YieldFunctional::SingletFidelity;
  double rate = 1.0;          // exponential recombination-time distribution
  Matrix custom_op;           // Hermitian observable for Custom
  double t_infinity = -1.0;   // < 0: default 40 / rate
};

// Phi = int_0^infinity p(t) f(t) dt with p(t) = r e^{-rt}.
double yield_integral(const YieldSpec& spec, const BetweenGenerator& between,
                      const Matrix& rho0, const SubspaceOps& ops,
                      const HilbertLayout& layout);

struct Sensitivity {
  double value;  // Richardson-refined central difference
  double error;  // two-scale discrepancy
};

// d Phi / dB by central differences at delta_b and delta_b/2.
Sensitivity magnetic_sensitivity(
    const YieldSpec& spec, const std::function<BetweenGenerator(double)>& family,
    const Matrix& rho0, const SubspaceOps& ops, const HilbertLayout& layout, double b,
    double delta_b);

// Reduced two-electron state: R block transformed to the electron factor
// with the nuclei traced out.  Rows ordered (S, T0, T+, T-); trace equals
// <Q_R>.  Full layout only.
Matrix electron_state(const Matrix& rho, const HilbertLayout& layout);

// Wootters concurrence of a 4x4 two-qubit state given in the (S, T0, T+, T-)
// ordering.
double concurrence(const Matrix& rho_electron);

// EXPERIMENTAL: yield functional averaged over the first-encounter density
// of a declining rate model, p(t) = r(t) exp(-Lambda(t)), integrated up to
// the model's cutoff.  The density can integrate to less than 1 (pairs that
// never meet); this extension makes no fidelity claim beyond the exponential
// model it generalizes.
double yield_integral_first_encounter(const YieldSpec& spec,
                                      const BetweenGenerator& between,
                                      const Matrix& rho0, const SubspaceOps& ops,
                                      const HilbertLayout& layout,
                                      const RateModel& model);

// T_E = max{t | E(t) > 0} located by bisection on [0, t_max]; returns 0 when
// the state is never entangled, t_max when entanglement survives throughout.
double entanglement_lifetime(const BetweenGenerator& between, const Matrix& rho0,
                             const HilbertLayout& layout, double t_max,
                             double tol = 1e-6);

}  // namespace rpsim
