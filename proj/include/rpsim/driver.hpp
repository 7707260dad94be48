#pragma once

#include <string>
#include <vector>

#include "rpsim/scenario.hpp"

namespace rpsim {

struct RunOutput {
  std::vector<std::string> files;
  std::string classification;  // classify mode
  bool oracle_ok = true;       // oracle mode
  std::vector<std::pair<std::string, std::string>> meta;  // extra sidecar keys
};

// Executes the scenario's run mode, writing CSV data and a replayable
// metadata sidecar into out_dir (falls back to the scenario's own `out`,
// then ".").  CSV output is byte-identical for identical scenario + seed.
RunOutput run_scenario(const Scenario& scenario, const std::string& out_dir = "");

// Initial state selected by the scenario (standard singlet or populations).
DensityMatrix build_initial_state(const Scenario& scenario,
                                  const HilbertLayout& layout);

// Encounter maps for scenarios using the coupling model (single or mixed).
EncounterMaps scenario_maps(const Scenario& scenario, const SubspaceOps& ops);

}  // namespace rpsim
