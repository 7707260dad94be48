#include "rpsim/reactops.hpp"

#include <cmath>

#include "rpsim/density.hpp"
#include "rpsim/integrate.hpp"
#include "rpsim/linalg.hpp"

namespace rpsim {

namespace {

void check_nonnegative(const std::array<double, 4>& v, const char* what) {
  for (double x : v)
    if (x < 0.0) throw DomainError(std::string(what) + ": negative rate");
}

bool triplets_equal(const std::array<double, 4>& v, const HilbertLayout& layout) {
  double ref = v[static_cast<int>(Channel::T0)];
  for (Channel c : layout.triplet_channels())
    if (v[static_cast<int>(c)] != ref) return false;
  return true;
}

}  // namespace

void ReactionRates::validate(const HilbertLayout& layout) const {
  check_nonnegative(r, "ReactionRates.r");
  check_nonnegative(d, "ReactionRates.d");
  if (mode != SymmetryMode::General) {
    if (!triplets_equal(r, layout) || !triplets_equal(d, layout))
      throw ValidationError("triplet-symmetric mode requires equal triplet rates");
  }
  if (mode == SymmetryMode::TripletSymmetricNoTDephasing) {
    for (Channel c : layout.triplet_channels())
      if (d[static_cast<int>(c)] != 0.0)
        throw ValidationError("no_t_dephasing mode requires d_T = 0");
  }
}

double ReactionRates::max_rate() const {
  double m = 0.0;
  for (double x : r) m = std::max(m, x);
  for (double x : d) m = std::max(m, x);
  return m;
}

CollapsedRates collapse(const ReactionRates& rates) {
  if (rates.mode == SymmetryMode::General)
    throw ValidationError("collapse: requires a triplet-symmetric mode");
  return CollapsedRates{rates.r[0], rates.r[1], rates.d[0], rates.d[1]};
}

DerivedCoeffs derive_coeffs(const ReactionRates& rates) {
  DerivedCoeffs c;
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k)
      c.eta_jk[j][k] = 0.5 * (rates.r[j] + rates.r[k] + rates.d[j] + rates.d[k]);
  if (rates.mode != SymmetryMode::General) c.collapsed = collapse(rates);
  return c;
}

SuperOp generator_full(const ReactionRates& rates, const SubspaceOps& ops) {
  rates.validate(ops.layout);
  SuperOp gen(ops.layout.total_dim());
  for (Channel c : ops.layout.channels()) {
    int j = static_cast<int>(c);
    if (rates.r[j] != 0.0) gen += rates.r[j] * lindblad_dissipator(ops.l(c));
    if (rates.d[j] != 0.0) gen += rates.d[j] * lindblad_dissipator(ops.q(c));
  }
  return gen;
}

SuperOp generator_simplified(const CollapsedRates& rates, const SubspaceOps& ops) {
  const auto& layout = ops.layout;
  SuperOp gen(layout.total_dim());
  std::vector<Channel> triplets(layout.triplet_channels().begin(),
                                layout.triplet_channels().end());
  // r_j (<Q_j> Q_P - 1/2 {Q_j, .}) realized with per-level jumps.
  if (rates.r_s != 0.0) gen += rates.r_s * lindblad_dissipator(ops.l(Channel::S));
  for (Channel c : triplets)
    if (rates.r_t != 0.0) gen += rates.r_t * lindblad_dissipator(ops.l(c));
  // Block dephasing keeps intra-triplet coherences untouched.
  if (rates.d_s != 0.0) gen += rates.d_s * lindblad_dissipator(ops.q(Channel::S));
  if (rates.d_t != 0.0) gen += rates.d_t * lindblad_dissipator(ops.q_t);
  return gen;
}

SuperOp generator_r_subspace(const ReactionRates& rates, const SubspaceOps& ops) {
  rates.validate(ops.layout);
  const Eigen::Index d = ops.layout.total_dim();
  SuperOp gen(d);
  const Matrix id = Matrix::Identity(d, d);
  std::vector<SuperOp::Pair> terms;
  for (Channel c : ops.layout.channels()) {
    int j = static_cast<int>(c);
    if (rates.r[j] != 0.0) {
      terms.emplace_back(-0.5 * rates.r[j] * ops.q(c), id);
      terms.emplace_back(id, -0.5 * rates.r[j] * ops.q(c));
    }
    if (rates.d[j] != 0.0) gen += rates.d[j] * lindblad_dissipator(ops.q(c));
  }
  if (!terms.empty()) gen += SuperOp::from_pairs(std::move(terms));
  return gen;
}

SuperOp generator_r_simplified(const CollapsedRates& rates, const SubspaceOps& ops) {
  const Eigen::Index d = ops.layout.total_dim();
  SuperOp gen(d);
  const Matrix id = Matrix::Identity(d, d);
  std::vector<SuperOp::Pair> terms;
  terms.emplace_back(-0.5 * rates.r_s * ops.q(Channel::S), id);
  terms.emplace_back(id, -0.5 * rates.r_s * ops.q(Channel::S));
  terms.emplace_back(-0.5 * rates.r_t * ops.q_t, id);
  terms.emplace_back(id, -0.5 * rates.r_t * ops.q_t);
  gen += SuperOp::from_pairs(std::move(terms));
  if (rates.d_s != 0.0) gen += rates.d_s * lindblad_dissipator(ops.q(Channel::S));
  if (rates.d_t != 0.0) gen += rates.d_t * lindblad_dissipator(ops.q_t);
  return gen;
}

Matrix closed_form_full(const Matrix& rho0, const ReactionRates& rates,
                        const SubspaceOps& ops, double t) {
  rates.validate(ops.layout);
  if (!validate_inicon(rho0, ops))
    throw InvariantViolationError("closed_form_full: rho0 has R-P coherence");
  const auto coeffs = derive_coeffs(rates);
  Matrix out = project(ops.q_p, rho0);
  for (Channel cj : ops.layout.channels()) {
    int j = static_cast<int>(cj);
    out += std::exp(-rates.r[j] * t) * project(ops.q(cj), rho0);
    out += (1.0 - std::exp(-rates.r[j] * t)) * ops.l(cj) * rho0 * ops.l(cj).adjoint();
    for (Channel ck : ops.layout.channels()) {
      int k = static_cast<int>(ck);
      if (j == k) continue;
      out += std::exp(-coeffs.eta_jk[j][k] * t) * ops.q(cj) * rho0 * ops.q(ck);
    }
  }
  return out;
}

Matrix closed_form_triplet_symmetric(const Matrix& rho0, const ReactionRates& rates,
                                     const SubspaceOps& ops, double t) {
  if (rates.mode == SymmetryMode::General)
    throw ValidationError("closed_form_triplet_symmetric: symmetric mode required");
  rates.validate(ops.layout);
  if (!validate_inicon(rho0, ops))
    throw InvariantViolationError("closed_form_triplet_symmetric: R-P coherence");
  const CollapsedRates c = collapse(rates);
  const double eta = c.eta();
  Matrix out = project(ops.q_p, rho0) + std::exp(-eta * t) * project(ops.q_r, rho0);

  const std::array<std::pair<const Matrix*, double>, 2> sectors{
      {{&ops.q(Channel::S), c.r_s}, {&ops.q_t, c.r_t}}};
  for (const auto& [q, rj] : sectors)
    out += (std::exp(-rj * t) - std::exp(-eta * t)) * project(*q, rho0);

  // Recombination transfer, nuclear register carried along.
  out += (1.0 - std::exp(-c.r_s * t)) * ops.l(Channel::S) * rho0 *
         ops.l(Channel::S).adjoint();
  Matrix t_feed = Matrix::Zero(rho0.rows(), rho0.cols());
  for (Channel ch : ops.layout.triplet_channels())
    t_feed += ops.l(ch) * rho0 * ops.l(ch).adjoint();
  out += (1.0 - std::exp(-c.r_t * t)) * t_feed;

  out += (std::exp(-c.r_t * t) - std::exp(-(c.r_t + c.d_t) * t)) *
         triplet_coherence_remover(ops, rho0);
  return out;
}

Matrix closed_form_simplified(const Matrix& rho0, const CollapsedRates& rates,
                              const SubspaceOps& ops, double t) {
  if (!validate_inicon(rho0, ops))
    throw InvariantViolationError("closed_form_simplified: R-P coherence");
  const double eta = rates.eta();
  Matrix out = project(ops.q_p, rho0) + std::exp(-eta * t) * project(ops.q_r, rho0);

  out += (std::exp(-rates.r_s * t) - std::exp(-eta * t)) *
         project(ops.q(Channel::S), rho0);
  out += (std::exp(-rates.r_t * t) - std::exp(-eta * t)) * project(ops.q_t, rho0);

  out += (1.0 - std::exp(-rates.r_s * t)) * ops.l(Channel::S) * rho0 *
         ops.l(Channel::S).adjoint();
  Matrix t_feed = Matrix::Zero(rho0.rows(), rho0.cols());
  for (Channel ch : ops.layout.triplet_channels())
    t_feed += ops.l(ch) * rho0 * ops.l(ch).adjoint();
  out += (1.0 - std::exp(-rates.r_t * t)) * t_feed;
  return out;
}

Matrix closed_form_r_subspace(const Matrix& rho0r, const CollapsedRates& rates,
                              const SubspaceOps& ops, double t) {
  const double eta = rates.eta();
  Matrix rho0_proj = project(ops.q_r, rho0r);
  Matrix out = std::exp(-eta * t) * rho0_proj;
  out += (std::exp(-rates.r_s * t) - std::exp(-eta * t)) *
         project(ops.q(Channel::S), rho0_proj);
  out += (std::exp(-rates.r_t * t) - std::exp(-eta * t)) * project(ops.q_t, rho0_proj);
  return out;
}

Matrix u_eff_pure_decay(const CollapsedRates& rates, const SubspaceOps& ops, double t) {
  return std::exp(-0.5 * rates.r_s * t) * ops.q(Channel::S) +
         std::exp(-0.5 * rates.r_t * t) * ops.q_t;
}

std::pair<Vector, double> nonhermitian_propagate(const Vector& psi0,
                                                 const ReactionRates& rates,
                                                 const Matrix& hamiltonian,
                                                 const SubspaceOps& ops, double t) {
  for (Channel c : ops.layout.channels())
    if (rates.d[static_cast<int>(c)] != 0.0)
      throw DomainError("nonhermitian_propagate: purity requires pure decay (d_j = 0)");
  Matrix h_eff = hamiltonian;
  for (Channel c : ops.layout.channels())
    h_eff -= 0.5 * kI * rates.r[static_cast<int>(c)] * ops.q(c);
  Vector psi = expm(-kI * t * h_eff) * psi0;
  return {psi, psi.squaredNorm()};
}

KominisGenerator::KominisGenerator(double k_s, double k_t, const SubspaceOps& ops)
    : k_s_(k_s), k_t_(k_t), q_s_(ops.q(Channel::S)), q_t_(ops.q_t) {
  if (k_s < 0.0 || k_t < 0.0) throw DomainError("kominis_generator: negative rate");
}

double KominisGenerator::p_coh(const Matrix& rho_r, bool* flagged) const {
  const Matrix qs_rho = q_s_ * rho_r;
  const Matrix qt_rho = q_t_ * rho_r;
  const double denom = qs_rho.trace().real() * qt_rho.trace().real();
  if (flagged) *flagged = false;
  if (std::abs(denom) <= kZeroTraceTol) {
    // 0/0 on population-free states; the coherent term's prefactor vanishes
    // there anyway.
    if (flagged) *flagged = true;
    return 0.0;
  }
  return (qs_rho * qt_rho).trace().real() / denom;
}

KominisGenerator::Result KominisGenerator::eval(const Matrix& rho_r) const {
  const double tr = rho_r.trace().real();
  // The rho-tilde normalization makes the comparator ill-conditioned for
  // vanishing R-trace; runs are truncated rather than extrapolated.
  if (tr < 1e-8)
    throw ZeroTraceError("kominis eval: Tr rho_R < 1e-8, comparator truncated");
  Result res;
  res.p_coh = p_coh(rho_r, &res.p_coh_flagged);

  // L_dep(k_j): the shared dephasing Lindbladian.
  Matrix rhs = k_s_ * (q_s_ * rho_r * q_s_ -
                       0.5 * (q_s_ * rho_r + rho_r * q_s_)) +
               k_t_ * (q_t_ * rho_r * q_t_ -
                       0.5 * (q_t_ * rho_r + rho_r * q_t_));
  // (1 - p_coh) L_inc.
  rhs -= (1.0 - res.p_coh) *
         (k_s_ * q_s_ * rho_r * q_s_ + k_t_ * q_t_ * rho_r * q_t_);
  // p_coh L_coh with expectations under the normalized state.
  const double qs_n = (q_s_ * rho_r).trace().real() / tr;
  const double qt_n = (q_t_ * rho_r).trace().real() / tr;
  rhs -= res.p_coh * (k_s_ * qs_n + k_t_ * qt_n) * rho_r;
  res.rhs = rhs;
  return res;
}

ConditionalREquation::ConditionalREquation(const ReactionRates& rates,
                                           const Matrix& hamiltonian,
                                           const SubspaceOps& ops)
    : h_(hamiltonian), q_s_(ops.q(Channel::S)), q_t_(ops.q_t) {
  if (rates.mode != SymmetryMode::TripletSymmetricNoTDephasing)
    throw ValidationError("conditional_r_equation: no_t_dephasing mode required");
  rates.validate(ops.layout);
  const CollapsedRates c = collapse(rates);
  r_s_ = c.r_s;
  r_t_ = c.r_t;
  reaction_ = generator_r_simplified(c, ops);
}

Matrix ConditionalREquation::rhs(const Matrix& rho_r) const {
  Matrix out = -kI * (h_ * rho_r - rho_r * h_) + reaction_.apply(rho_r);
  const double mean_l = -(r_s_ * (q_s_ * rho_r).trace().real() +
                          r_t_ * (q_t_ * rho_r).trace().real());
  out -= mean_l * rho_r;
  return out;
}

Matrix ConditionalREquation::integrate(const Matrix& rho0, double t, double dt) const {
  return rk4([this](double, const Matrix& r) { return rhs(r); }, rho0, 0.0, t, dt);
}

}  // namespace rpsim
