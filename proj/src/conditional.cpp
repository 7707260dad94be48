#include "rpsim/conditional.hpp"

#include <cmath>
#include <limits>

#include "rpsim/integrate.hpp"
#include "rpsim/linalg.hpp"
#include "rpsim/ratemodel.hpp"

namespace rpsim {

ConditionalGenerator::ConditionalGenerator(const SuperOp& a0, double rate,
                                           const SuperOp* extra) {
  if (rate < 0.0) throw DomainError("conditional_generator: rate must be >= 0");
  // A_0 must be the no-click branch of an instrument: completely positive
  // and trace-non-increasing.  This rejects 1 - P(.)P style constructions,
  // whose equation rho_N' = -r P rho_N P is the unphysical one; the
  // sanctioned complement is A_CPT - P(.)P.
  if (min_eigenvalue(choi_matrix(a0)) < kPsdTol)
    throw InvariantViolationError(
        "conditional_generator: A_0 is not completely positive");
  Matrix norm_op = Matrix::Zero(a0.dim(), a0.dim());
  for (const auto& [a, b] : a0.pairs()) norm_op += b * a;
  if (min_eigenvalue(Matrix::Identity(a0.dim(), a0.dim()) - norm_op) < kPsdTol)
    throw InvariantViolationError("conditional_generator: A_0 increases the trace");

  linear_ = rate * a0 + (-rate) * SuperOp::identity(a0.dim());
  if (extra) linear_ += *extra;
  dense_ = linear_.to_dense();
}

Matrix ConditionalGenerator::rhs_nonlinear(const Matrix& rho) const {
  Matrix lr = linear_.apply(rho);
  return lr - lr.trace() * rho;
}

Matrix ConditionalGenerator::solve_linear(const Matrix& rho0, double t) const {
  const Eigen::Index d = rho0.rows();
  Matrix propagated = expm(t * dense_) *
                      Eigen::Map<const Vector>(rho0.data(), rho0.size());
  return Eigen::Map<const Matrix>(propagated.data(), d, d);
}

std::pair<Matrix, double> ConditionalGenerator::solve_conditional(const Matrix& rho0,
                                                                  double t) const {
  Matrix rho_n = solve_linear(rho0, t);
  auto [state, prob] = normalize(DensityMatrix{hermitized(rho_n), false});
  return {state.rho, prob};
}

Matrix ConditionalGenerator::integrate_nonlinear(const Matrix& rho0, double t,
                                                 double dt) const {
  return rk4([this](double, const Matrix& r) { return rhs_nonlinear(r); }, rho0, 0.0,
             t, dt);
}

ConditionalGenerator conditional_generator(const SuperOp& a0, double rate,
                                           const SuperOp* extra) {
  return ConditionalGenerator(a0, rate, extra);
}

namespace {

// Per-channel recombination transfer with the nuclear register carried along.
Matrix transfer_s(const SubspaceOps& ops, const Matrix& rho) {
  return ops.l(Channel::S) * rho * ops.l(Channel::S).adjoint();
}

Matrix transfer_t(const SubspaceOps& ops, const Matrix& rho) {
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (Channel c : ops.layout.triplet_channels())
    out += ops.l(c) * rho * ops.l(c).adjoint();
  return out;
}

}  // namespace

DarkSolution dark_closed_form(const Matrix& rho0, const EncounterMapParams& params,
                              const DetectionEfficiencies& eff, double rate,
                              const SubspaceOps& ops, double t) {
  if (params.mode != SymmetryMode::TripletSymmetricNoTDephasing)
    throw ValidationError("dark_closed_form: no_t_dephasing mode required");
  eff.validate();
  if (!validate_inicon(rho0, ops))
    throw InvariantViolationError("dark_closed_form: rho0 has R-P coherence");

  const double r_tilde = params.eta_tilde * rate;  // effective encounter rate
  const double rs = params.r_tilde[0] * rate;      // r~_S r
  const double rt = params.r_tilde[1] * rate;      // r~_T r
  const double eta_s = eff.eta[0];
  const double eta_t = eff.eta[1];

  const Matrix qs_rho = project(ops.q(Channel::S), rho0);
  const Matrix qt_rho = project(ops.q_t, rho0);
  const double q_s0 = qs_rho.trace().real();
  const double q_t0 = qt_rho.trace().real();

  DarkSolution sol;
  // R block: S-T coherences decay at r~ = eta~ r, populations at r~_j r.
  Matrix r_block = std::exp(-r_tilde * t) *
                   (project(ops.q_r, rho0) - qs_rho - qt_rho);
  r_block += std::exp(-rs * t) * qs_rho + std::exp(-rt * t) * qt_rho;
  // P block: undetected recombinations feed the product state.
  Matrix p_block = project(ops.q_p, rho0);
  p_block += (1.0 - eta_s) * (1.0 - std::exp(-rs * t)) * transfer_s(ops, rho0);
  p_block += (1.0 - eta_t) * (1.0 - std::exp(-rt * t)) * transfer_t(ops, rho0);

  sol.rho_n = r_block + p_block;
  sol.p_rd = r_block.trace().real();
  // Cancellation-stable form of 1 - sum_j eta_j (1 - e^{-r~_j r t}) <Q_j>_0.
  const double q_p0 = project(ops.q_p, rho0).trace().real();
  sol.trace_n = q_p0 + q_s0 * (1.0 - eta_s + eta_s * std::exp(-rs * t)) +
                q_t0 * (1.0 - eta_t + eta_t * std::exp(-rt * t));
  sol.trace_r = sol.trace_n > 0.0 ? sol.p_rd / sol.trace_n : 0.0;
  return sol;
}

DarkSolution dark_closed_form(double q_s0, double q_t0, double q_p0,
                              const EncounterMapParams& params,
                              const DetectionEfficiencies& eff, double rate,
                              const SubspaceOps& ops, double t) {
  if (q_s0 < 0.0 || q_t0 < 0.0 || q_p0 < 0.0 || q_s0 + q_t0 + q_p0 > 1.0 + 1e-12)
    throw DomainError("dark_closed_form: population sum > 1");
  const auto& layout = ops.layout;
  const int n = layout.nuclear_dim();
  const int d = layout.total_dim();
  Matrix rho0 = Matrix::Zero(d, d);
  auto fill = [&](int block, double weight) {
    int off = layout.block_offset(block);
    rho0.block(off, off, n, n) = (weight / n) * Matrix::Identity(n, n);
  };
  fill(layout.block_index(Channel::S), q_s0);
  const auto triplets = layout.triplet_channels();
  for (Channel c : triplets)
    fill(layout.block_index(c), q_t0 / static_cast<double>(triplets.size()));
  fill(layout.product_block(), q_p0);
  return dark_closed_form(rho0, params, eff, rate, ops, t);
}

DarkSurvival dark_survival_time(double big_r, double eta_d, double q_r0) {
  if (big_r <= 0.0) throw DomainError("dark_survival_time: R must be > 0");
  if (eta_d * q_r0 >= 1.0)
    throw DomainError("dark_survival_time: requires eta_d q_R0 < 1");
  const double arg = (2.0 - eta_d) * q_r0 / (1.0 - eta_d * q_r0);
  if (arg <= 0.0) throw DomainError("dark_survival_time: argument of log <= 0");
  DarkSurvival out;
  out.exact = std::log(arg) / big_r;
  const double eps = (1.0 - q_r0) + (1.0 - eta_d);
  out.approx = eps > 0.0 ? std::log(1.0 / eps) / big_r :
                           std::numeric_limits<double>::infinity();
  return out;
}

Matrix cloud_single_effect(const Matrix& rho, const SuperOp& a, long n) {
  if (n < 1) throw DomainError("cloud_single_effect: n must be >= 1");
  Matrix a_rho = a.apply(rho);
  double mean = a_rho.trace().real();
  if (mean <= kZeroTraceTol)
    throw ZeroTraceError("cloud_single_effect: <A> vanished");
  return (double(n - 1) / double(n)) * rho + (1.0 / double(n)) * a_rho / mean;
}

EnsembleClickMap::EnsembleClickMap(long n, long l, double p, const SuperOp& a,
                                   const SuperOp& b)
    : n_(n), l_(l), p_(p), a_(&a), b_(&b) {
  if (n < 1 || l < 0 || l > n) throw DomainError("ensemble_click_map: need 0 <= l <= n");
  if (p < 0.0 || p > 1.0) throw DomainError("ensemble_click_map: p outside [0, 1]");
}

Matrix EnsembleClickMap::apply(const Matrix& rho) const {
  const double mean_b = std::max(0.0, b_->apply(rho).trace().real());
  const double pb = p_ * mean_b;
  const double x = double(l_) / double(n_);
  if (pb <= 0.0 && l_ > 0)
    throw ImpossibleRecordError("ensemble_click_map: clicks recorded but p<B> = 0");
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  if (x < 1.0)
    out += ((1.0 - x) / (1.0 - pb)) * ((1.0 - p_) * rho + p_ * a_->apply(rho));
  if (l_ > 0) out += (x / pb) * (p_ * b_->apply(rho));
  return out;
}

double EnsembleClickMap::probability(const Matrix& rho) const {
  const double mean_b = std::max(0.0, b_->apply(rho).trace().real());
  return binomial_pmf(static_cast<int>(l_), static_cast<int>(n_), p_ * mean_b);
}

Matrix stochastic_me_step(const Matrix& rho, double z, double rate,
                          const SuperOp& a_cpt, const SuperOp& b, double dt) {
  if (rate * dt > 0.01 + 1e-15)
    throw DomainError("stochastic_me_step: requires r dt <= 0.01");
  Matrix drift = a_cpt.apply(rho) - rho;
  Matrix fluct = b.apply(rho) - b.apply(rho).trace().real() * rho;
  return hermitized(rho + dt * rate * (drift + z * fluct));
}

double clicks_to_z(long l, long n, double dt, double rate, double mean_b) {
  const double rb = rate * mean_b;
  if (rb <= 0.0) {
    if (l == 0) return 0.0;
    throw ImpossibleRecordError("clicks_to_z: clicks with r<B> = 0");
  }
  const double xdot = double(l) / (double(n) * dt);
  return (xdot - rb) / rb;
}

}  // namespace rpsim
