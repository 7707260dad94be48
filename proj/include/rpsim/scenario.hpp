#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rpsim/encounter.hpp"
#include "rpsim/ratemodel.hpp"
#include "rpsim/reactops.hpp"
#include "rpsim/spinham.hpp"

namespace rpsim {

enum class RunMode { Me, Dark, Traj, Ensemble, Yield, Classify, Oracle };

const char* to_string(RunMode mode);

struct RunSpec {
  RunMode mode = RunMode::Me;
  double t_max = 10.0;
  int n_grid = 101;
  long n_traj = 1000;
  long n_cloud = 0;   // sME record size; 0 = n_traj
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  int sweep_angles = 0;   // yield mode: field-direction sweep points
  double delta_b = 1e-4;  // sensitivity finite-difference step
  std::string out;
};

// Initial state: the standard singlet with maximally mixed nuclei, or given
// block populations spread uniformly (no coherences).
struct InitialStateSpec {
  bool use_populations = false;
  double q_s = 1.0, q_t = 0.0, q_p = 0.0;
};

// One fully resolved run configuration.  Exactly one of `rates` (master
// equation model) and `coupling` (encounter model) is present.
struct Scenario {
  SpinSystemSpec system;
  bool st0_only = false;
  InitialStateSpec init;
  std::optional<ReactionRates> rates;
  std::optional<EncounterCoupling> coupling;
  std::vector<std::pair<double, EncounterCoupling>> mix;  // averaged encounters
  DetectionEfficiencies detection;
  RateModel rate_model;
  RunSpec run;

  HilbertLayout layout() const { return system.make_layout(st0_only); }
};

// Parses the sectioned key-value dialect ([system], [reaction], [detection],
// [rate], [run]; a [meta] section is accepted and ignored so that run
// sidecars stay replayable).  Unknown keys are hard errors with line
// numbers; semantic violations name the field.
Scenario parse_scenario(const std::string& text);

// Canonical text form; parse(render(s)) reproduces s.
std::string render_scenario(const Scenario& scenario);

Scenario load_scenario_file(const std::string& path);

}  // namespace rpsim
