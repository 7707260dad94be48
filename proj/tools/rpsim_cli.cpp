// Scenario-driven front end: one subcommand per model family, deterministic
// seeded runs, CSV + metadata output.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "rpsim/driver.hpp"
#include "rpsim/version.hpp"

namespace {

struct Options {
  std::string scenario_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

int run(rpsim::RunMode mode, const Options& opt) {
  using namespace rpsim;
  Scenario sc;
  try {
    sc = load_scenario_file(opt.scenario_path);
    sc.run.mode = mode;
    if (opt.seed_given) {
      sc.run.seed = opt.seed;
      sc.run.seed_set = true;
    }
    if (opt.threads > 0) sc.run.threads = opt.threads;
    if ((mode == RunMode::Traj || mode == RunMode::Ensemble) && !sc.run.seed_set)
      throw ValidationError("seed is mandatory for stochastic modes");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rpsim: %s\n", e.what());
    return 2;
  }

  try {
    RunOutput out = run_scenario(sc, opt.out_dir);
    for (const auto& f : out.files) std::printf("wrote %s\n", f.c_str());
    return 0;
  } catch (const InvariantViolationError& e) {
    std::fprintf(stderr, "rpsim: numerical invariant violated: %s\n", e.what());
    return 3;
  } catch (const ZeroTraceError& e) {
    std::fprintf(stderr, "rpsim: numerical invariant violated: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rpsim: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radical-pair reaction simulator"};
  app.set_version_flag("--version", rpsim::kVersion);
  app.require_subcommand(1);

  Options opt;
  static const std::pair<const char*, rpsim::RunMode> modes[] = {
      {"me", rpsim::RunMode::Me},           {"dark", rpsim::RunMode::Dark},
      {"traj", rpsim::RunMode::Traj},       {"ensemble", rpsim::RunMode::Ensemble},
      {"yield", rpsim::RunMode::Yield},     {"classify", rpsim::RunMode::Classify},
      {"oracle", rpsim::RunMode::Oracle}};

  rpsim::RunMode selected = rpsim::RunMode::Me;
  for (const auto& [name, mode] : modes) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--scenario", opt.scenario_path, "scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "seed override")
        ->each([&](const std::string&) { opt.seed_given = true; });
    sub->add_option("--threads", opt.threads, "worker threads (speed only)");
    sub->callback([&selected, mode] { selected = mode; });
  }

  CLI11_PARSE(app, argc, argv);
  return run(selected, opt);
}
