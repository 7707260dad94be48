#include "rpsim/encounter.hpp"

#include <cmath>
#include <cstdio>

#include "rpsim/linalg.hpp"

namespace rpsim {

namespace {

constexpr double kClassifyTol = 1e-10;

double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

void check_cp(const SuperOp& op, const char* what) {
  double lam = min_eigenvalue(choi_matrix(op));
  if (lam < kPsdTol)
    throw InvariantViolationError(std::string(what) +
                                  ": Choi matrix not PSD, min eigenvalue " +
                                  std::to_string(lam));
}

void check_cpt(const EncounterMaps& maps) {
  const Eigen::Index d = maps.dim;
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& [a, b] : maps.a_cpt.pairs()) sum += b * a;
  if (max_abs(sum - Matrix::Identity(d, d)) > 1e-12)
    throw InvariantViolationError("encounter maps: CPT sum rule violated");
}

// Shared Kraus assembly: A_j from sqrt(r~_j) L_j, A_0 from
// M = Q_P + sum_j cos(phi_j) Q_j plus the dephasing terms sqrt(d~_j) Q_j.
EncounterMaps assemble(const EncounterMapParams& params,
                       const std::array<double, 4>& cos_phi, const SubspaceOps& ops) {
  const auto& layout = ops.layout;
  const Eigen::Index d = layout.total_dim();
  const bool collapsed = params.mode != SymmetryMode::General;

  EncounterMaps maps;
  maps.params = params;
  maps.dim = d;

  if (collapsed) {
    double rs = params.r_tilde[0];
    double rt = params.r_tilde[1];
    std::vector<SuperOp::Pair> s_terms{{std::sqrt(rs) * ops.l(Channel::S),
                                        std::sqrt(rs) * ops.l(Channel::S).adjoint()}};
    maps.a.push_back({ClickLabel::S, SuperOp::from_pairs(std::move(s_terms))});
    std::vector<SuperOp::Pair> t_terms;
    for (Channel c : layout.triplet_channels())
      t_terms.emplace_back(std::sqrt(rt) * ops.l(c), std::sqrt(rt) * ops.l(c).adjoint());
    maps.a.push_back({ClickLabel::T, SuperOp::from_pairs(std::move(t_terms))});
  } else {
    static constexpr std::array<ClickLabel, 4> labels{ClickLabel::S, ClickLabel::T0,
                                                      ClickLabel::Tp, ClickLabel::Tm};
    for (Channel c : layout.channels()) {
      int j = static_cast<int>(c);
      double rj = params.r_tilde[j];
      std::vector<SuperOp::Pair> terms{
          {std::sqrt(rj) * ops.l(c), std::sqrt(rj) * ops.l(c).adjoint()}};
      maps.a.push_back({labels[j], SuperOp::from_pairs(std::move(terms))});
    }
  }

  Matrix m = ops.q_p;
  for (Channel c : layout.channels()) m += cos_phi[static_cast<int>(c)] * ops.q(c);
  std::vector<SuperOp::Pair> a0_terms{{m, m.adjoint()}};
  for (Channel c : layout.channels()) {
    int j = static_cast<int>(c);
    if (params.d_tilde[j] > 0.0)
      a0_terms.emplace_back(std::sqrt(params.d_tilde[j]) * ops.q(c),
                            std::sqrt(params.d_tilde[j]) * ops.q(c));
  }
  maps.a0 = SuperOp::from_pairs(std::move(a0_terms));

  maps.a_cpt = maps.a0;
  for (const auto& labeled : maps.a) maps.a_cpt += labeled.op;

  for (const auto& labeled : maps.a) check_cp(labeled.op, "A_j");
  check_cp(maps.a0, "A_0");
  check_cpt(maps);
  return maps;
}

}  // namespace

const char* to_string(ClickLabel label) {
  switch (label) {
    case ClickLabel::S: return "S";
    case ClickLabel::T: return "T";
    case ClickLabel::T0: return "T0";
    case ClickLabel::Tp: return "T+";
    case ClickLabel::Tm: return "T-";
    case ClickLabel::None: return "none";
  }
  return "?";
}

void EncounterCoupling::validate(const HilbertLayout& layout) const {
  if (kappa < 0.0) throw DomainError("EncounterCoupling: kappa must be >= 0");
  if (mode != SymmetryMode::General) {
    double pi_ref = std::abs(pi[static_cast<int>(Channel::T0)]);
    double de_ref = std::abs(delta[static_cast<int>(Channel::T0)]);
    for (Channel c : layout.triplet_channels()) {
      if (std::abs(std::abs(pi[static_cast<int>(c)]) - pi_ref) > 1e-14 ||
          std::abs(std::abs(delta[static_cast<int>(c)]) - de_ref) > 1e-14)
        throw ValidationError("triplet-symmetric coupling requires equal |pi_T|, |delta_T|");
    }
  }
  if (mode == SymmetryMode::TripletSymmetricNoTDephasing) {
    for (Channel c : layout.triplet_channels())
      if (std::abs(delta[static_cast<int>(c)]) != 0.0)
        throw ValidationError("no_t_dephasing coupling requires delta_T = 0");
  }
}

EncounterMapParams derive_map_params(const EncounterCoupling& coupling) {
  EncounterMapParams p;
  p.mode = coupling.mode;
  std::array<double, 4> cos_phi{};
  for (int j = 0; j < 4; ++j) {
    double c = std::norm(coupling.pi[j]) + std::norm(coupling.delta[j]);
    p.phi[j] = coupling.kappa * std::sqrt(c);
    double s = sinc(p.phi[j]);
    p.r_tilde[j] = coupling.kappa * coupling.kappa * std::norm(coupling.pi[j]) * s * s;
    double sin2 = std::sin(p.phi[j]) * std::sin(p.phi[j]);
    p.d_tilde[j] = sin2 - p.r_tilde[j];
    if (p.d_tilde[j] < 0.0) p.d_tilde[j] = 0.0;  // rounding
    cos_phi[j] = std::cos(p.phi[j]);
  }
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) p.c_jk[j][k] = cos_phi[j] * cos_phi[k];

  p.eta_tilde = 1.0 - cos_phi[0] * cos_phi[1];
  if (p.eta_tilde > kClassifyTol) {
    p.eta_tilde_st = {p.r_tilde[0] / p.eta_tilde, p.r_tilde[1] / p.eta_tilde};
  } else {
    p.eta_tilde_st = {0.0, 0.0};
  }

  for (int j = 0; j < 4; ++j) {
    if (p.r_tilde[j] < -1e-12 || p.r_tilde[j] > 1.0 + 1e-12)
      throw InvariantViolationError("r~_j outside [0, 1]");
  }
  if (p.eta_tilde < -1e-12 || p.eta_tilde > 2.0 + 1e-12)
    throw InvariantViolationError("eta~ outside [0, 2]");
  // The eta~_j in [0,2] ranges rest on the paper's numerical analysis; a
  // counterexample is logged rather than assumed impossible.
  for (double ej : p.eta_tilde_st) {
    if (ej < -1e-9 || ej > 2.0 + 1e-9)
      std::fprintf(stderr, "rpsim: eta~_j = %.17g outside [0, 2]\n", ej);
  }
  return p;
}

void DetectionEfficiencies::validate() const {
  for (double e : eta)
    if (e < 0.0 || e > 1.0) throw DomainError("detection efficiency out of [0, 1]");
}

double DetectionEfficiencies::for_label(ClickLabel label) const {
  switch (label) {
    case ClickLabel::S: return eta[0];
    case ClickLabel::T: return eta[1];
    case ClickLabel::T0: return eta[1];
    case ClickLabel::Tp: return eta[2];
    case ClickLabel::Tm: return eta[3];
    case ClickLabel::None: break;
  }
  throw DomainError("no efficiency for label 'none'");
}

EncounterMaps build_maps(const EncounterMapParams& params, const SubspaceOps& ops) {
  if (params.averaged)
    throw ValidationError("build_maps: averaged params; use average_maps");
  std::array<double, 4> cos_phi{};
  for (int j = 0; j < 4; ++j) cos_phi[j] = std::cos(params.phi[j]);
  return assemble(params, cos_phi, ops);
}

EncounterMaps with_detection(const EncounterMaps& maps,
                             const DetectionEfficiencies& eff) {
  eff.validate();
  EncounterMaps out;
  out.params = maps.params;
  out.dim = maps.dim;
  out.a0 = maps.a0;
  for (const auto& [label, op] : maps.a) {
    if (label == ClickLabel::T && (eff.eta[1] != eff.eta[2] || eff.eta[1] != eff.eta[3]))
      throw ValidationError("collapsed triplet detection requires equal eta_T");
    double e = eff.for_label(label);
    out.a.push_back({label, e * op});
    if (e < 1.0) out.a0 += (1.0 - e) * op;
  }
  out.a_cpt = out.a0;
  for (const auto& labeled : out.a) out.a_cpt += labeled.op;
  return out;
}

ReactionRates weak_limit(const EncounterCoupling& coupling, double rate,
                         WeakLimitDiagnostic* diag) {
  if (rate <= 0.0) throw DomainError("weak_limit: rate must be > 0");
  ReactionRates rates;
  rates.mode = coupling.mode;
  const double k2 = coupling.kappa * coupling.kappa;
  for (int j = 0; j < 4; ++j) {
    rates.r[j] = rate * k2 * std::norm(coupling.pi[j]);
    rates.d[j] = rate * k2 * std::norm(coupling.delta[j]);
  }
  if (diag) {
    diag->rel_truncation_bound = 0.0;
    for (int j = 0; j < 4; ++j) {
      double c = std::norm(coupling.pi[j]) + std::norm(coupling.delta[j]);
      double phi = coupling.kappa * std::sqrt(c);
      if (phi > 0.0) {
        double s = sinc(phi);
        diag->rel_truncation_bound =
            std::max(diag->rel_truncation_bound, std::abs(1.0 - s * s));
      }
    }
    diag->weak_regime = diag->rel_truncation_bound < 1e-2;
  }
  return rates;
}

const char* to_string(EncounterClass c) {
  switch (c) {
    case EncounterClass::BrightVonNeumann: return "Bright/VonNeumann";
    case EncounterClass::DarkPureDephasing: return "Dark/PureDephasing";
    case EncounterClass::DarkIdentity: return "Dark/Identity";
    case EncounterClass::DarkGrover: return "Dark/Grover";
    case EncounterClass::Generic: return "Generic";
  }
  return "?";
}

EncounterClass classify(const EncounterMapParams& params) {
  const double tol = kClassifyTol;
  const int nch = params.mode == SymmetryMode::General ? 4 : 2;

  bool all_bright = true, all_dark = true;
  for (int j = 0; j < nch; ++j) {
    if (std::abs(params.r_tilde[j] - 1.0) > tol) all_bright = false;
    if (params.r_tilde[j] > tol) all_dark = false;
  }
  if (all_bright) return EncounterClass::BrightVonNeumann;
  if (all_dark) {
    // Unitary dark cases need a uniform triplet phase pattern.
    bool uniform = true;
    if (params.mode == SymmetryMode::General && !params.averaged) {
      for (int j = 2; j < 4; ++j)
        if (std::abs(std::cos(params.phi[j]) - std::cos(params.phi[1])) > tol)
          uniform = false;
    }
    if (uniform && params.eta_tilde < tol) return EncounterClass::DarkIdentity;
    if (uniform && std::abs(params.eta_tilde - 2.0) < tol)
      return EncounterClass::DarkGrover;
    return EncounterClass::DarkPureDephasing;
  }
  return EncounterClass::Generic;
}

EncounterMaps average_maps(const std::vector<std::pair<double, EncounterCoupling>>& mix,
                           const SubspaceOps& ops) {
  if (mix.empty()) throw ValidationError("average_maps: empty mixture");
  double wsum = 0.0;
  for (const auto& [w, coupling] : mix) {
    if (w < 0.0) throw ValidationError("average_maps: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw ValidationError("average_maps: weights must sum to 1");

  const SymmetryMode mode = mix.front().second.mode;
  EncounterMapParams avg;
  avg.mode = mode;
  avg.averaged = mix.size() > 1;

  EncounterMaps out;
  bool first = true;
  for (const auto& [w, coupling] : mix) {
    if (coupling.mode != mode)
      throw ValidationError("average_maps: mixed symmetry modes");
    coupling.validate(ops.layout);
    EncounterMapParams p = derive_map_params(coupling);
    EncounterMaps maps = build_maps(p, ops);
    for (int j = 0; j < 4; ++j) {
      avg.r_tilde[j] += w * p.r_tilde[j];
      avg.d_tilde[j] += w * p.d_tilde[j];
      for (int k = 0; k < 4; ++k) avg.c_jk[j][k] += w * p.c_jk[j][k];
    }
    avg.eta_tilde += w * p.eta_tilde;
    if (mix.size() == 1) avg.phi = p.phi;

    if (first) {
      out.dim = maps.dim;
      out.a0 = SuperOp(maps.dim);
      out.a_cpt = SuperOp(maps.dim);
      for (const auto& [label, op] : maps.a) out.a.push_back({label, SuperOp(maps.dim)});
      first = false;
    }
    for (size_t i = 0; i < maps.a.size(); ++i) out.a[i].op += w * maps.a[i].op;
    out.a0 += w * maps.a0;
    out.a_cpt += w * maps.a_cpt;
  }
  if (avg.eta_tilde > kClassifyTol)
    avg.eta_tilde_st = {avg.r_tilde[0] / avg.eta_tilde, avg.r_tilde[1] / avg.eta_tilde};
  out.params = avg;
  for (const auto& labeled : out.a) check_cp(labeled.op, "averaged A_j");
  check_cp(out.a0, "averaged A_0");
  check_cpt(out);
  return out;
}

int environment_dim(const HilbertLayout& layout, SymmetryMode mode) {
  const int nch = layout.r_levels();
  return mode == SymmetryMode::TripletSymmetricNoTDephasing ? 1 + nch + 1
                                                            : 1 + 2 * nch;
}

namespace {

// Environment index of |pi_j> / |delta_j>.
int pi_index(int j) { return 1 + j; }

int delta_index(const HilbertLayout& layout, SymmetryMode mode, int j) {
  const int nch = layout.r_levels();
  if (mode == SymmetryMode::TripletSymmetricNoTDephasing) {
    if (j != 0) return -1;  // no triplet dephasing states
    return 1 + nch;
  }
  return 1 + nch + j;
}

}  // namespace

Matrix encounter_unitary(const EncounterCoupling& coupling, const HilbertLayout& layout,
                         const SubspaceOps& ops) {
  coupling.validate(layout);
  const int d = layout.total_dim();
  const int e = environment_dim(layout, coupling.mode);
  Matrix h = Matrix::Zero(d * e, d * e);

  auto env_ket_bra = [&](int a, int b) {
    Matrix m = Matrix::Zero(e, e);
    m(a, b) = 1.0;
    return m;
  };

  for (Channel c : layout.channels()) {
    int j = static_cast<int>(c);
    Matrix term = coupling.pi[j] * kron(ops.l(c), env_ket_bra(pi_index(j), 0));
    int di = delta_index(layout, coupling.mode, j);
    if (di >= 0)
      term += coupling.delta[j] * kron(ops.q(c), env_ket_bra(di, 0));
    h += term + term.adjoint();
  }
  return expm_hermitian(h, -kI * coupling.kappa);
}

Matrix encounter_u0_closed_form(const EncounterCoupling& coupling,
                                const HilbertLayout& layout, const SubspaceOps& ops) {
  coupling.validate(layout);
  const int d = layout.total_dim();
  const int e = environment_dim(layout, coupling.mode);
  const EncounterMapParams p = derive_map_params(coupling);

  Matrix u0 = Matrix::Zero(d * e, d);
  auto add_block = [&](int env, const Matrix& sys) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) u0(i * e + env, j) += sys(i, j);
  };

  Matrix m = ops.q_p;
  for (Channel c : layout.channels())
    m += std::cos(p.phi[static_cast<int>(c)]) * ops.q(c);
  add_block(0, m);

  for (Channel c : layout.channels()) {
    int j = static_cast<int>(c);
    Complex amp = -kI * coupling.kappa * sinc(p.phi[j]);
    add_block(pi_index(j), amp * coupling.pi[j] * ops.l(c));
    int di = delta_index(layout, coupling.mode, j);
    if (di >= 0) add_block(di, amp * coupling.delta[j] * ops.q(c));
  }
  return u0;
}

EncounterMaps maps_from_environment(const EncounterCoupling& coupling,
                                    const HilbertLayout& layout,
                                    const SubspaceOps& ops) {
  const int d = layout.total_dim();
  const int e = environment_dim(layout, coupling.mode);
  const Matrix u = encounter_unitary(coupling, layout, ops);

  auto block = [&](int env) {
    Matrix k(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) k(i, j) = u(i * e + env, j * e + 0);
    return k;
  };

  EncounterMaps maps;
  maps.params = derive_map_params(coupling);
  maps.dim = d;

  const bool collapsed = coupling.mode != SymmetryMode::General;
  if (collapsed) {
    maps.a.push_back(
        {ClickLabel::S, SuperOp::from_pairs({{block(pi_index(0)),
                                              block(pi_index(0)).adjoint()}})});
    std::vector<SuperOp::Pair> t_terms;
    for (Channel c : layout.triplet_channels()) {
      Matrix k = block(pi_index(static_cast<int>(c)));
      t_terms.emplace_back(k, k.adjoint());
    }
    maps.a.push_back({ClickLabel::T, SuperOp::from_pairs(std::move(t_terms))});
  } else {
    static constexpr std::array<ClickLabel, 4> labels{ClickLabel::S, ClickLabel::T0,
                                                      ClickLabel::Tp, ClickLabel::Tm};
    for (Channel c : layout.channels()) {
      int j = static_cast<int>(c);
      Matrix k = block(pi_index(j));
      maps.a.push_back({labels[j], SuperOp::from_pairs({{k, k.adjoint()}})});
    }
  }

  std::vector<SuperOp::Pair> a0_terms{{block(0), block(0).adjoint()}};
  for (Channel c : layout.channels()) {
    int di = delta_index(layout, coupling.mode, static_cast<int>(c));
    if (di >= 0) {
      Matrix k = block(di);
      a0_terms.emplace_back(k, k.adjoint());
    }
  }
  maps.a0 = SuperOp::from_pairs(std::move(a0_terms));
  maps.a_cpt = maps.a0;
  for (const auto& labeled : maps.a) maps.a_cpt += labeled.op;
  return maps;
}

EffectiveRPovm effective_r_povm(const EncounterMapParams& params,
                                const SubspaceOps& ops) {
  if (params.mode == SymmetryMode::General)
    throw ValidationError("effective_r_povm: triplet-symmetric mode required");
  if (params.eta_tilde <= 0.0)
    throw DomainError("effective_r_povm: eta~ = 0, no effective measurement");

  EffectiveRPovm povm;
  for (int j = 0; j < 2; ++j) {
    povm.nu[j] = std::min(params.eta_tilde_st[j], 1.0);
    povm.mu[j] = std::max(params.eta_tilde_st[j], 1.0) - 1.0;
  }
  const Matrix& qs = ops.q(Channel::S);
  const Matrix& qt = ops.q_t;
  povm.pi_s = povm.nu[0] * qs + povm.mu[1] * qt;
  povm.pi_t = povm.nu[1] * qt + povm.mu[0] * qs;
  povm.pi_0 = (1.0 - params.eta_tilde_st[0]) * qs + (1.0 - params.eta_tilde_st[1]) * qt;
  povm.is_povm = params.eta_tilde_st[0] <= 1.0 + kClassifyTol &&
                 params.eta_tilde_st[1] <= 1.0 + kClassifyTol;
  return povm;
}

}  // namespace rpsim
