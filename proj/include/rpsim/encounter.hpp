#pragma once

#include <array>
#include <vector>

#include "rpsim/reactops.hpp"
#include "rpsim/subspace.hpp"
#include "rpsim/superop.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Outcome labels of a single measured encounter.  Symmetric modes emit the
// collapsed T label; the general mode resolves the triplet levels.
enum class ClickLabel : int { S = 0, T = 1, T0 = 2, Tp = 3, Tm = 4, None = 5 };

const char* to_string(ClickLabel label);

// Coupling of one encounter to the model environment: strength kappa and the
// per-channel decay/dephasing amplitudes pi_j, delta_j.
struct EncounterCoupling {
  double kappa = 0.0;
  std::array<Complex, 4> pi{};
  std::array<Complex, 4> delta{};
  SymmetryMode mode = SymmetryMode::General;

  void validate(const HilbertLayout& layout) const;
};

// Coefficients of the induced measurement maps:
//   phi_j   = kappa sqrt(|pi_j|^2 + |delta_j|^2)
//   r~_j    = kappa^2 |pi_j|^2 sinc^2(phi_j)
//   d~_j    = sin^2(phi_j) - r~_j
//   c_jk    = cos(phi_j) cos(phi_k)
//   eta~    = 1 - cos(phi_S) cos(phi_T)    (collapsed S/T)
//   eta~_j  = r~_j / eta~
struct EncounterMapParams {
  std::array<double, 4> phi{};
  std::array<double, 4> r_tilde{};
  std::array<double, 4> d_tilde{};
  std::array<std::array<double, 4>, 4> c_jk{};
  double eta_tilde = 0.0;
  std::array<double, 2> eta_tilde_st{};  // eta~_S, eta~_T
  SymmetryMode mode = SymmetryMode::General;
  bool averaged = false;  // phi/c_jk not meaningful for averaged coefficients
};

EncounterMapParams derive_map_params(const EncounterCoupling& coupling);

struct DetectionEfficiencies {
  std::array<double, 4> eta{1.0, 1.0, 1.0, 1.0};

  void validate() const;
  double for_label(ClickLabel label) const;
};

// The measurement maps {A_j}, A_0 and their CPT sum of one encounter, all
// completely positive by construction (Kraus form).  Complete positivity is
// re-checked through the Choi matrix at build time.
struct EncounterMaps {
  struct Labeled {
    ClickLabel label;
    SuperOp op;
  };
  std::vector<Labeled> a;
  SuperOp a0;
  SuperOp a_cpt;
  EncounterMapParams params;
  Eigen::Index dim = 0;
};

EncounterMaps build_maps(const EncounterMapParams& params, const SubspaceOps& ops);

// A_j -> eta_j^D A_j, A_0 -> A_0 + sum (1 - eta_j^D) A_j.  Missed clicks,
// no dark counts.
EncounterMaps with_detection(const EncounterMaps& maps,
                             const DetectionEfficiencies& eff);

struct WeakLimitDiagnostic {
  double rel_truncation_bound = 0.0;  // max_j (1 - sinc^2 phi_j), O(kappa^2)
  bool weak_regime = true;
};

// Master-equation rates under the identification 2t = kappa^2 r:
// r_j = rate kappa^2 |pi_j|^2, d_j = rate kappa^2 |delta_j|^2.
ReactionRates weak_limit(const EncounterCoupling& coupling, double rate,
                         WeakLimitDiagnostic* diag = nullptr);

enum class EncounterClass {
  BrightVonNeumann,
  DarkPureDephasing,
  DarkIdentity,
  DarkGrover,
  Generic,
};

const char* to_string(EncounterClass c);

// Parameter-space classification with tolerance 1e-10 on the phases.
EncounterClass classify(const EncounterMapParams& params);

// Classical mixture of encounter types: averaged coefficients
// r-bar_j = sum p_l r~_j^(l), eta-bar = sum p_l eta~^(l), maps as the
// weighted Kraus union.  Weights must be nonnegative and sum to 1.
EncounterMaps average_maps(const std::vector<std::pair<double, EncounterCoupling>>& mix,
                           const SubspaceOps& ops);

// Environment dimension used by the encounter unitary: |0>, one |pi_j> per
// channel, and |delta_j> states (all channels in general/triplet-symmetric
// mode, only delta_S without triplet dephasing).
int environment_dim(const HilbertLayout& layout, SymmetryMode mode);

// U = exp(-i kappa H_I) on system (x) environment, by Hermitian
// eigendecomposition; unitary to working precision.
Matrix encounter_unitary(const EncounterCoupling& coupling, const HilbertLayout& layout,
                         const SubspaceOps& ops);

// Closed-form action of U on the |0> environment sector: a
// (dim*env_dim) x dim block of columns U(|i> (x) |0>).
Matrix encounter_u0_closed_form(const EncounterCoupling& coupling,
                                const HilbertLayout& layout, const SubspaceOps& ops);

// Measurement maps computed by tracing the environment against the POVM
// projectors, using the full unitary.  Oracle route for tests.
EncounterMaps maps_from_environment(const EncounterCoupling& coupling,
                                    const HilbertLayout& layout,
                                    const SubspaceOps& ops);

// Effective fluorescence POVM on the R-subspace (triplet-symmetric modes):
// nu_j = min(eta~_j, 1), mu_j = max(eta~_j, 1) - 1.  For eta~_j > 1 the
// no-click element acquires a negative weight and the set is no longer a
// POVM (unbalanced dephasing rather than a projection); is_povm reports
// this.
struct EffectiveRPovm {
  Matrix pi_s;
  Matrix pi_t;
  Matrix pi_0;
  std::array<double, 2> nu{};
  std::array<double, 2> mu{};
  bool is_povm = true;
};

EffectiveRPovm effective_r_povm(const EncounterMapParams& params,
                                const SubspaceOps& ops);

}  // namespace rpsim
