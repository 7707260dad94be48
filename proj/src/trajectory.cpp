#include "rpsim/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "rpsim/density.hpp"
#include "rpsim/linalg.hpp"

namespace rpsim {

TrajectoryResult run_trajectory(const Matrix& rho0, const BetweenGenerator& between,
                                const EncounterMaps& maps, const RateModel& model,
                                std::span<const double> grid, SplitMix64& rng,
                                ConditionPolicy policy, bool heisenberg_frame) {
  if (between.dissipator)
    throw ValidationError("run_trajectory: dissipator not supported between encounters");
  const UnitaryPropagator prop(between.hamiltonian);
  return run_trajectory(rho0, prop, maps, model, grid, rng, policy, heisenberg_frame);
}

namespace {

// N_i = sum B A over the factor pairs of A_i, so that <A_i> = Tr(N_i rho).
Matrix weight_operator(const SuperOp& op) {
  Matrix n = Matrix::Zero(op.dim(), op.dim());
  for (const auto& [a, b] : op.pairs()) n += b * a;
  return n;
}

double trace_dot(const Matrix& n, const Matrix& rho) {
  return (n.transpose().cwiseProduct(rho)).sum().real();
}

}  // namespace

TrajectoryResult run_trajectory(const Matrix& rho0, const UnitaryPropagator& prop,
                                const EncounterMaps& maps, const RateModel& model,
                                std::span<const double> grid, SplitMix64& rng,
                                ConditionPolicy policy, bool heisenberg_frame) {
  if (grid.empty()) throw DomainError("run_trajectory: empty grid");
  if (rho0.rows() != maps.dim)
    throw DimensionError("run_trajectory: state/maps dimension mismatch");

  const double t_end = grid.back();
  std::vector<double> events = sample_encounters(model, t_end, rng);

  std::vector<Matrix> weight_ops;
  weight_ops.reserve(maps.a.size() + 1);
  for (const auto& labeled : maps.a) weight_ops.push_back(weight_operator(labeled.op));
  weight_ops.push_back(weight_operator(maps.a0));

  TrajectoryResult result;
  result.states.reserve(grid.size());

  Matrix rho = rho0;
  double t = 0.0;
  size_t gi = 0, ei = 0;
  bool dark_done = false;  // conditioned away; keep evolving unconditionally

  auto to_schroedinger = [&](const Matrix& r, double at) -> Matrix {
    if (!heisenberg_frame) return r;
    Matrix u = prop.u(at);
    return u * r * u.adjoint();
  };
  auto advance = [&](const Matrix& r, double dt) -> Matrix {
    if (heisenberg_frame || dt == 0.0) return r;
    return prop.advance(r, dt);
  };

  std::vector<double> weights(weight_ops.size());
  while (gi < grid.size()) {
    const bool have_event = ei < events.size() && events[ei] <= grid[gi];
    const double t_next = have_event ? events[ei] : grid[gi];
    rho = advance(rho, t_next - t);
    t = t_next;

    if (have_event) {
      ++ei;
      // Outcome probabilities from the weight operators, then a single
      // application of the sampled map.
      Matrix u;
      Matrix rho_s = rho;
      if (heisenberg_frame) {
        u = prop.u(t);
        rho_s = u * rho * u.adjoint();
      }
      for (size_t i = 0; i < weight_ops.size(); ++i)
        weights[i] = std::max(0.0, trace_dot(weight_ops[i], rho_s));
      size_t pick = rng.discrete(weights);
      if (weights[pick] <= kZeroTraceTol)
        throw ZeroTraceError("run_trajectory: all outcome probabilities vanished");
      const SuperOp& chosen =
          pick < maps.a.size() ? maps.a[pick].op : maps.a0;
      Matrix next = chosen.apply(rho_s);
      if (heisenberg_frame) next = u.adjoint() * next * u;
      rho = hermitized(next / next.trace().real());

      ClickLabel label =
          pick < maps.a.size() ? maps.a[pick].label : ClickLabel::None;
      result.clicks.events.push_back({t, label});
      if (label != ClickLabel::None && policy != ConditionPolicy::Unconditional &&
          !dark_done) {
        if (policy == ConditionPolicy::DarkAbort)
          throw ZeroTraceError("run_trajectory: conditioned-away branch (click in dark mode)");
        result.conditioned_away = true;
        dark_done = true;
      }
      continue;
    }

    result.states.push_back(to_schroedinger(rho, t));
    ++gi;
  }
  return result;
}

namespace {

// Compensated (Kahan) accumulator for the cross-chunk reductions.
struct KahanMatrix {
  Matrix sum, comp;
  explicit KahanMatrix(Eigen::Index d)
      : sum(Matrix::Zero(d, d)), comp(Matrix::Zero(d, d)) {}
  void add(const Matrix& x) {
    Matrix y = x - comp;
    Matrix t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct KahanScalar {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct ChunkAccumulator {
  std::vector<Matrix> state_sum;
  std::vector<std::array<double, 3>> q_sum;
  std::vector<std::array<double, 3>> q_sumsq;
  std::vector<long> clicks_per_bin;
  std::array<long, 6> histogram{};
  long used = 0;
  long discarded = 0;

  ChunkAccumulator(size_t n_grid, Eigen::Index d)
      : state_sum(n_grid, Matrix::Zero(d, d)),
        q_sum(n_grid, {0, 0, 0}),
        q_sumsq(n_grid, {0, 0, 0}),
        clicks_per_bin(n_grid, 0) {}
};

}  // namespace

EnsembleResult ensemble_average(long n_traj, const Matrix& rho0,
                                const BetweenGenerator& between,
                                const EncounterMaps& maps, const SubspaceOps& ops,
                                const RateModel& model, std::span<const double> grid,
                                uint64_t seed, ConditionPolicy policy, int threads,
                                bool heisenberg_frame) {
  if (n_traj < 1) throw DomainError("ensemble_average: n_traj must be >= 1");
  if (policy == ConditionPolicy::DarkAbort)
    throw DomainError("ensemble_average: use DarkDiscard for conditioned ensembles");
  if (between.dissipator)
    throw ValidationError("ensemble_average: dissipator not supported between encounters");
  const UnitaryPropagator prop(between.hamiltonian);

  const size_t n_grid = grid.size();
  const Eigen::Index d = rho0.rows();
  constexpr long kChunk = 64;  // fixed chunk size keeps reductions order-stable
  const long n_chunks = (n_traj + kChunk - 1) / kChunk;

  std::vector<ChunkAccumulator> chunks(n_chunks, ChunkAccumulator(n_grid, d));

  auto run_chunk = [&](long ci) {
    ChunkAccumulator& acc = chunks[ci];
    const long begin = ci * kChunk;
    const long end = std::min(n_traj, begin + kChunk);
    for (long idx = begin; idx < end; ++idx) {
      SplitMix64 rng = stream_for(seed, static_cast<uint64_t>(idx));
      TrajectoryResult traj = run_trajectory(rho0, prop, maps, model, grid, rng,
                                             policy, heisenberg_frame);
      for (const auto& ev : traj.clicks.events) {
        acc.histogram[static_cast<int>(ev.label)] += 1;
        if (ev.label != ClickLabel::None) {
          auto bin = std::upper_bound(grid.begin(), grid.end(), ev.time) - grid.begin();
          if (bin < static_cast<long>(n_grid)) acc.clicks_per_bin[bin] += 1;
          else acc.clicks_per_bin[n_grid - 1] += 1;
        }
      }
      if (traj.conditioned_away) {
        acc.discarded += 1;
        continue;
      }
      acc.used += 1;
      for (size_t g = 0; g < n_grid; ++g) {
        const Matrix& st = traj.states[g];
        acc.state_sum[g] += st;
        std::array<double, 3> q{expectation(st, ops.q(Channel::S)),
                                expectation(st, ops.q_t), expectation(st, ops.q_p)};
        for (int k = 0; k < 3; ++k) {
          acc.q_sum[g][k] += q[k];
          acc.q_sumsq[g][k] += q[k] * q[k];
        }
      }
    }
  };

  if (threads <= 1) {
    for (long ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    const int n_workers = std::min<long>(threads, n_chunks);
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        for (long ci = next.fetch_add(1); ci < n_chunks; ci = next.fetch_add(1))
          run_chunk(ci);
      });
    for (auto& th : pool) th.join();
  }

  // Final reduction in chunk order, compensated.
  EnsembleResult out;
  out.grid.assign(grid.begin(), grid.end());
  out.n_requested = n_traj;
  out.clicks_per_bin.assign(n_grid, 0);

  std::vector<KahanMatrix> state_acc(n_grid, KahanMatrix(d));
  std::vector<std::array<KahanScalar, 3>> q_acc(n_grid), q2_acc(n_grid);
  for (const auto& chunk : chunks) {
    out.n_used += chunk.used;
    out.n_discarded += chunk.discarded;
    for (int k = 0; k < 6; ++k) out.click_histogram[k] += chunk.histogram[k];
    for (size_t g = 0; g < n_grid; ++g) {
      state_acc[g].add(chunk.state_sum[g]);
      out.clicks_per_bin[g] += chunk.clicks_per_bin[g];
      for (int k = 0; k < 3; ++k) {
        q_acc[g][k].add(chunk.q_sum[g][k]);
        q2_acc[g][k].add(chunk.q_sumsq[g][k]);
      }
    }
  }
  if (out.n_used == 0)
    throw ZeroTraceError("ensemble_average: every trajectory was conditioned away");

  const double n = static_cast<double>(out.n_used);
  out.mean.reserve(n_grid);
  out.q_mean.resize(n_grid);
  out.q_se.resize(n_grid);
  for (size_t g = 0; g < n_grid; ++g) {
    out.mean.push_back(state_acc[g].sum / n);
    for (int k = 0; k < 3; ++k) {
      double m = q_acc[g][k].sum / n;
      out.q_mean[g][k] = m;
      double var = std::max(0.0, q2_acc[g][k].sum / n - m * m);
      out.q_se[g][k] = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    }
  }
  return out;
}

}  // namespace rpsim
