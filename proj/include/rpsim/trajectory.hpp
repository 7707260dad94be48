#pragma once

#include <array>
#include <span>
#include <vector>

#include "rpsim/encounter.hpp"
#include "rpsim/ratemodel.hpp"
#include "rpsim/rng.hpp"
#include "rpsim/spinham.hpp"

namespace rpsim {

struct ClickEvent {
  double time;
  ClickLabel label;
};

struct ClickRecord {
  std::vector<ClickEvent> events;  // strictly increasing times
};

// What to do with a trajectory whose measurement record contradicts the
// conditioning (a click in dark mode).
enum class ConditionPolicy { Unconditional, DarkDiscard, DarkAbort };

struct TrajectoryResult {
  std::vector<Matrix> states;  // at the grid times
  ClickRecord clicks;
  bool conditioned_away = false;  // dark mode: a click occurred
};

// Unitary propagation between sampled encounter times; at each encounter the
// outcome i is drawn with probability <A_i^(D)> and the state updated to
// A_i^(D) rho / <A_i^(D)>.  Detection efficiencies must already be folded
// into `maps` (see with_detection).
TrajectoryResult run_trajectory(const Matrix& rho0, const BetweenGenerator& between,
                                const EncounterMaps& maps, const RateModel& model,
                                std::span<const double> grid, SplitMix64& rng,
                                ConditionPolicy policy = ConditionPolicy::Unconditional,
                                bool heisenberg_frame = false);

// Same, with the Hamiltonian eigendecomposition precomputed; the ensemble
// driver shares one propagator across all trajectories.
TrajectoryResult run_trajectory(const Matrix& rho0, const UnitaryPropagator& prop,
                                const EncounterMaps& maps, const RateModel& model,
                                std::span<const double> grid, SplitMix64& rng,
                                ConditionPolicy policy = ConditionPolicy::Unconditional,
                                bool heisenberg_frame = false);

struct EnsembleResult {
  std::vector<double> grid;
  std::vector<Matrix> mean;                  // averaged state per grid time
  std::vector<std::array<double, 3>> q_mean; // <Q_S>, <Q_T>, <Q_P>
  std::vector<std::array<double, 3>> q_se;   // standard errors
  std::vector<long> clicks_per_bin;          // clicks in (t_{g-1}, t_g]
  std::array<long, 6> click_histogram{};     // by ClickLabel
  long n_requested = 0;
  long n_used = 0;      // trajectories contributing (dark mode discards)
  long n_discarded = 0;
};

// Averages n_traj independent trajectories.  Per-trajectory RNG streams are
// keyed by (seed, index); the reduction runs over fixed-size chunks in index
// order with compensated summation, so results are independent of the worker
// count.
EnsembleResult ensemble_average(long n_traj, const Matrix& rho0,
                                const BetweenGenerator& between,
                                const EncounterMaps& maps, const SubspaceOps& ops,
                                const RateModel& model, std::span<const double> grid,
                                uint64_t seed,
                                ConditionPolicy policy = ConditionPolicy::Unconditional,
                                int threads = 1, bool heisenberg_frame = false);

}  // namespace rpsim
