#include "rpsim/driver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rpsim/conditional.hpp"
#include "rpsim/density.hpp"
#include "rpsim/integrate.hpp"
#include "rpsim/linalg.hpp"
#include "rpsim/trajectory.hpp"
#include "rpsim/version.hpp"
#include "rpsim/yields.hpp"

namespace rpsim {

namespace {

std::vector<double> make_grid(double t_max, int n_grid) {
  std::vector<double> grid(n_grid);
  for (int i = 0; i < n_grid; ++i) grid[i] = t_max * i / (n_grid - 1);
  return grid;
}

// Fixed CSV dialect: %.12e floats, plain integers, comma separated.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw ValidationError("cannot open output file: " + path);
  }

  void header(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i)
      out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }

  CsvWriter& field(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    sep();
    out_ << buf;
    return *this;
  }

  CsvWriter& field(long v) {
    sep();
    out_ << v;
    return *this;
  }

  CsvWriter& field(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }

  void endrow() {
    out_ << "\n";
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

// Reduced electron coherence <S|rho_el|T0>, nuclear register traced out.
Complex st0_coherence(const Matrix& rho, const HilbertLayout& layout) {
  const int n = layout.nuclear_dim();
  return rho.block(layout.block_offset(0), layout.block_offset(1), n, n).trace();
}

struct Observables {
  double qs, qt, qp;
  Complex st0;
};

Observables observe(const Matrix& rho, const SubspaceOps& ops) {
  return {expectation(rho, ops.q(Channel::S)), expectation(rho, ops.q_t),
          expectation(rho, ops.q_p), st0_coherence(rho, ops.layout)};
}

void run_me(const Scenario& sc, const std::filesystem::path& dir, RunOutput& out) {
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  const BetweenGenerator between = build_hamiltonian(sc.system, layout);
  const DensityMatrix rho0 = build_initial_state(sc, layout);
  const auto grid = make_grid(sc.run.t_max, sc.run.n_grid);

  SuperOp reaction(layout.total_dim());
  double rate_scale = 0.0;
  bool time_dependent = false;
  if (sc.rates) {
    reaction = generator_full(*sc.rates, ops);
    rate_scale = sc.rates->max_rate();
  } else {
    EncounterMaps maps = scenario_maps(sc, ops);
    reaction = sc.rate_model.r * maps.a_cpt +
               (-sc.rate_model.r) * SuperOp::identity(layout.total_dim());
    rate_scale = sc.rate_model.r;
    time_dependent = sc.rate_model.kind != RateModel::Kind::Constant;
  }

  const Matrix& h = between.hamiltonian;
  auto rhs = [&](double t, const Matrix& rho) {
    Matrix dr = -kI * (h * rho - rho * h);
    double scale = time_dependent ? sc.rate_model.rate(t) / sc.rate_model.r : 1.0;
    dr += scale * reaction.apply(rho);
    return dr;
  };
  const double dt = default_step(rate_scale, operator_norm(h));

  CsvWriter csv((dir / "me.csv").string());
  csv.header({"t", "q_s", "q_t", "q_p", "re_st0", "im_st0", "trace", "purity"});
  Matrix rho = rho0.rho;
  double t = 0.0;
  for (double tg : grid) {
    rho = rk4(rhs, rho, t, tg, dt);
    t = tg;
    Observables ob = observe(rho, ops);
    csv.field(tg).field(ob.qs).field(ob.qt).field(ob.qp).field(ob.st0.real())
        .field(ob.st0.imag()).field(rho.trace().real()).field(purity(rho));
    csv.endrow();
  }
  out.files.push_back((dir / "me.csv").string());
}

void run_dark(const Scenario& sc, const std::filesystem::path& dir, RunOutput& out) {
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  const BetweenGenerator between = build_hamiltonian(sc.system, layout);
  if (operator_norm(between.hamiltonian) > 1e-14)
    throw ValidationError("dark mode: closed form requires zero Hamiltonian");
  if (sc.rate_model.kind != RateModel::Kind::Constant)
    throw ValidationError("dark mode: constant encounter rate required");
  if (!sc.coupling && sc.mix.empty())
    throw ValidationError("dark mode: encounter coupling model required");

  const EncounterMaps maps = scenario_maps(sc, ops);
  const DensityMatrix rho0 = build_initial_state(sc, layout);
  const auto grid = make_grid(sc.run.t_max, sc.run.n_grid);
  const double r = sc.rate_model.r;

  CsvWriter csv((dir / "dark.csv").string());
  csv.header({"rt", "p_d", "p_rd", "p_r_given_d"});
  for (double t : grid) {
    DarkSolution sol = dark_closed_form(rho0.rho, maps.params, sc.detection, r, ops, t);
    csv.field(r * t).field(sol.trace_n).field(sol.p_rd).field(sol.trace_r);
    csv.endrow();
  }
  out.files.push_back((dir / "dark.csv").string());
}

void run_traj(const Scenario& sc, const std::filesystem::path& dir, RunOutput& out) {
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  const BetweenGenerator between = build_hamiltonian(sc.system, layout);
  const DensityMatrix rho0 = build_initial_state(sc, layout);
  const auto grid = make_grid(sc.run.t_max, sc.run.n_grid);
  const EncounterMaps maps = with_detection(scenario_maps(sc, ops), sc.detection);

  SplitMix64 rng = stream_for(sc.run.seed, 0);
  TrajectoryResult traj =
      run_trajectory(rho0.rho, between, maps, sc.rate_model, grid, rng);

  CsvWriter states((dir / "traj_states.csv").string());
  states.header({"t", "q_s", "q_t", "q_p", "re_st0", "im_st0"});
  for (size_t g = 0; g < grid.size(); ++g) {
    Observables ob = observe(traj.states[g], ops);
    states.field(grid[g]).field(ob.qs).field(ob.qt).field(ob.qp)
        .field(ob.st0.real()).field(ob.st0.imag());
    states.endrow();
  }
  CsvWriter clicks((dir / "traj_clicks.csv").string());
  clicks.header({"t", "label"});
  for (const auto& ev : traj.clicks.events) {
    clicks.field(ev.time).field(std::string(to_string(ev.label)));
    clicks.endrow();
  }
  out.files.push_back((dir / "traj_states.csv").string());
  out.files.push_back((dir / "traj_clicks.csv").string());
}

void run_ensemble(const Scenario& sc, const std::filesystem::path& dir,
                  RunOutput& out) {
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  const BetweenGenerator between = build_hamiltonian(sc.system, layout);
  const DensityMatrix rho0 = build_initial_state(sc, layout);
  const auto grid = make_grid(sc.run.t_max, sc.run.n_grid);
  const EncounterMaps maps = with_detection(scenario_maps(sc, ops), sc.detection);

  EnsembleResult res =
      ensemble_average(sc.run.n_traj, rho0.rho, between, maps, ops, sc.rate_model,
                       grid, sc.run.seed, ConditionPolicy::Unconditional,
                       sc.run.threads);

  // Click map B = sum_j A_j^(D) for the fluorescence record columns.
  SuperOp click_map(maps.dim);
  for (const auto& labeled : maps.a) click_map += labeled.op;

  const long n_cloud = sc.run.n_cloud > 0 ? sc.run.n_cloud : sc.run.n_traj;
  const double dt = grid.size() > 1 ? grid[1] - grid[0] : 1.0;

  CsvWriter csv((dir / "ensemble.csv").string());
  csv.header({"t", "q_s", "q_t", "q_p", "se_qs", "se_qt", "se_qp", "re_st0", "im_st0",
              "l", "x", "z"});
  double z_abs_max = 0.0, z_abs_sum = 0.0;
  long z_count = 0;
  for (size_t g = 0; g < grid.size(); ++g) {
    Observables ob = observe(res.mean[g], ops);
    long l = res.clicks_per_bin[g];
    double x = double(l) / double(n_cloud);
    double mean_b = std::max(0.0, click_map.apply(res.mean[g]).trace().real());
    double z = 0.0;
    if (g > 0 && sc.rate_model.r * mean_b > 0.0) {
      z = clicks_to_z(l, n_cloud, dt, sc.rate_model.rate(grid[g]), mean_b);
      z_abs_max = std::max(z_abs_max, std::abs(z));
      z_abs_sum += std::abs(z);
      ++z_count;
    }
    csv.field(grid[g]).field(ob.qs).field(ob.qt).field(ob.qp)
        .field(res.q_se[g][0]).field(res.q_se[g][1]).field(res.q_se[g][2])
        .field(ob.st0.real()).field(ob.st0.imag()).field(l).field(x).field(z);
    csv.endrow();
  }
  out.files.push_back((dir / "ensemble.csv").string());

  // Fluctuation-size summary so the first-order-in-p regime can be judged.
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", z_abs_max);
  out.meta.emplace_back("z_abs_max", buf);
  std::snprintf(buf, sizeof buf, "%.6e", z_count > 0 ? z_abs_sum / z_count : 0.0);
  out.meta.emplace_back("z_abs_mean", buf);
  out.meta.emplace_back("clicks_s",
                        std::to_string(res.click_histogram[int(ClickLabel::S)]));
  out.meta.emplace_back(
      "clicks_t", std::to_string(res.click_histogram[int(ClickLabel::T)] +
                                 res.click_histogram[int(ClickLabel::T0)] +
                                 res.click_histogram[int(ClickLabel::Tp)] +
                                 res.click_histogram[int(ClickLabel::Tm)]));
  out.meta.emplace_back("clicks_none",
                        std::to_string(res.click_histogram[int(ClickLabel::None)]));
}

void run_yield(const Scenario& sc, const std::filesystem::path& dir, RunOutput& out) {
  if (sc.st0_only)
    throw ValidationError("yield mode: full (S,T0,T+,T-) layout required");
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  const DensityMatrix rho0 = build_initial_state(sc, layout);
  const double rate = sc.rate_model.r;
  const double b_mag = sc.system.field_b.norm();

  YieldSpec singlet{YieldFunctional::SingletFidelity, rate, {}, -1.0};
  YieldSpec entangle{YieldFunctional::Concurrence, rate, {}, -1.0};

  const int n_pts = sc.run.sweep_angles > 0 ? sc.run.sweep_angles : 1;
  CsvWriter csv((dir / "yield.csv").string());
  csv.header({"b_mag", "angle", "phi_s", "lambda", "phi_e", "t_e"});
  for (int i = 0; i < n_pts; ++i) {
    double angle;
    Eigen::Vector3d dir_b;
    if (sc.run.sweep_angles > 0) {
      angle = n_pts > 1 ? M_PI * i / (n_pts - 1) : 0.0;
      dir_b = Eigen::Vector3d(std::sin(angle), 0.0, std::cos(angle));
    } else {
      angle = std::atan2(sc.system.field_b[0], sc.system.field_b[2]);
      dir_b = b_mag > 0 ? sc.system.field_b.normalized()
                        : Eigen::Vector3d(0, 0, 1);
    }
    auto family = [&](double b) {
      SpinSystemSpec spec = sc.system;
      spec.field_b = b * dir_b;
      return build_hamiltonian(spec, layout);
    };
    BetweenGenerator between = family(b_mag);
    double phi_s = yield_integral(singlet, between, rho0.rho, ops, layout);
    Sensitivity lambda = magnetic_sensitivity(singlet, family, rho0.rho, ops, layout,
                                              b_mag, sc.run.delta_b);
    double phi_e = yield_integral(entangle, between, rho0.rho, ops, layout);
    double t_e = entanglement_lifetime(between, rho0.rho, layout, 40.0 / rate);
    csv.field(b_mag).field(angle).field(phi_s).field(lambda.value).field(phi_e)
        .field(t_e);
    csv.endrow();
  }
  out.files.push_back((dir / "yield.csv").string());
}

void run_classify(const Scenario& sc, const std::filesystem::path& dir,
                  RunOutput& out) {
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  const EncounterMaps maps = scenario_maps(sc, ops);
  EncounterClass cls = classify(maps.params);
  out.classification = to_string(cls);
  std::printf("classification = %s\n", out.classification.c_str());

  std::ofstream txt(dir / "classify.txt");
  txt << "classification = " << out.classification << "\n";
  txt << "eta_tilde = " << maps.params.eta_tilde << "\n";
  txt << "r_tilde_s = " << maps.params.r_tilde[0] << "\n";
  txt << "r_tilde_t = " << maps.params.r_tilde[1] << "\n";
  out.files.push_back((dir / "classify.txt").string());
}

// Deterministic pseudo-random inicon-valid states for the oracle runs.
Matrix random_inicon_state(const SubspaceOps& ops, SplitMix64& rng) {
  const HilbertLayout& layout = ops.layout;
  const int d = layout.total_dim();
  const int rd = layout.r_dim();
  Matrix g = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      g(i, j) = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);
  Matrix rho = Matrix::Zero(d, d);
  rho.topLeftCorner(rd, rd) = g.topLeftCorner(rd, rd) * g.topLeftCorner(rd, rd).adjoint();
  int n = d - rd;
  rho.bottomRightCorner(n, n) =
      0.25 * g.bottomRightCorner(n, n) * g.bottomRightCorner(n, n).adjoint();
  return rho / rho.trace().real();
}

void run_oracle(const Scenario& sc, const std::filesystem::path& dir, RunOutput& out) {
  const HilbertLayout layout = sc.layout();
  const SubspaceOps ops = build_subspace_ops(layout);
  SplitMix64 rng = stream_for(sc.run.seed_set ? sc.run.seed : 7, 0);

  ReactionRates rates;
  if (sc.rates) rates = *sc.rates;
  else rates = weak_limit(sc.coupling ? *sc.coupling : sc.mix.front().second,
                          sc.rate_model.r);

  const double scale = std::max(rates.max_rate(), 1e-9);
  const std::vector<double> times{0.1 / scale, 1.0 / scale, 5.0 / scale};
  const double dt = default_step(rates.max_rate(), 0.0);

  CsvWriter csv((dir / "oracle.csv").string());
  csv.header({"check", "max_deviation", "tolerance", "status"});
  bool all_ok = true;
  auto report = [&](const std::string& name, double dev, double tol) {
    bool ok = dev <= tol;
    all_ok = all_ok && ok;
    csv.field(name).field(dev).field(tol).field(std::string(ok ? "pass" : "FAIL"));
    csv.endrow();
    std::printf("oracle %-28s max deviation %.3e (tol %.1e) %s\n", name.c_str(), dev,
                tol, ok ? "pass" : "FAIL");
  };

  {
    SuperOp gen = generator_full(rates, ops);
    double dev = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      Matrix rho0 = random_inicon_state(ops, rng);
      for (double t : times) {
        Matrix exact = closed_form_full(rho0, rates, ops, t);
        Matrix numeric = rk4_superop(gen, rho0, t, dt);
        dev = std::max(dev, max_abs(exact - numeric));
      }
    }
    report("gensol_full_vs_rk4", dev, 1e-8);
  }
  if (rates.mode != SymmetryMode::General) {
    const CollapsedRates cr = collapse(rates);
    double dev2 = 0.0, dev3 = 0.0, dev4 = 0.0;
    SuperOp gen_simpl = generator_simplified(cr, ops);
    SuperOp gen_r = generator_r_simplified(cr, ops);
    for (int rep = 0; rep < 5; ++rep) {
      Matrix rho0 = random_inicon_state(ops, rng);
      Matrix rho0r = project(ops.q_r, rho0);
      for (double t : times) {
        dev2 = std::max(dev2, max_abs(closed_form_triplet_symmetric(rho0, rates, ops, t) -
                                      rk4_superop(generator_full(rates, ops), rho0, t, dt)));
        dev3 = std::max(dev3, max_abs(closed_form_simplified(rho0, cr, ops, t) -
                                      rk4_superop(gen_simpl, rho0, t, dt)));
        dev4 = std::max(dev4, max_abs(closed_form_r_subspace(rho0r, cr, ops, t) -
                                      rk4_superop(gen_r, rho0r, t, dt)));
      }
    }
    report("gensol_symmetric_vs_rk4", dev2, 1e-8);
    report("gensol_simplified_vs_rk4", dev3, 1e-8);
    report("gensol_r_vs_rk4", dev4, 1e-8);
  }
  {
    // Dense and factor-pair representations agree.
    SuperOp gen = generator_full(rates, ops);
    SuperOp dense = SuperOp::from_dense(gen.to_dense());
    double dev = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      Matrix rho = random_inicon_state(ops, rng);
      dev = std::max(dev, max_abs(gen.apply(rho) - dense.apply(rho)));
    }
    report("superop_rep_agreement", dev, 1e-12);
  }
  if (sc.coupling &&
      sc.coupling->mode == SymmetryMode::TripletSymmetricNoTDephasing) {
    // Closed-form dark solution against the nonlinear master equation.
    const EncounterMaps maps = scenario_maps(sc, ops);
    const EncounterMaps detected = with_detection(maps, sc.detection);
    ConditionalGenerator cg =
        conditional_generator(detected.a0, sc.rate_model.r);
    DensityMatrix rho0 = build_initial_state(sc, layout);
    double dev = 0.0;
    for (double t : {0.5 / sc.rate_model.r, 2.0 / sc.rate_model.r}) {
      DarkSolution sol =
          dark_closed_form(rho0.rho, maps.params, sc.detection, sc.rate_model.r, ops, t);
      Matrix numeric = cg.integrate_nonlinear(
          rho0.rho, t, default_step(sc.rate_model.r, 0.0));
      auto [closed, prob] = normalize(DensityMatrix{sol.rho_n, false});
      dev = std::max(dev, trace_distance(closed.rho, numeric));
    }
    report("dark_closed_vs_nonlinear", dev, 1e-8);
  }
  out.oracle_ok = all_ok;
  out.files.push_back((dir / "oracle.csv").string());
  if (!all_ok)
    throw InvariantViolationError("oracle run found deviations beyond tolerance");
}

void write_metadata(const Scenario& sc, const std::filesystem::path& dir,
                    double wall_seconds, RunOutput& out) {
  std::ofstream meta(dir / "run_meta.scn");
  meta << "[meta]\n";
  meta << "version = " << kVersion << "\n";
  meta << "mode = " << to_string(sc.run.mode) << "\n";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", wall_seconds);
  meta << "wall_seconds = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.12g", sc.rate_model.cutoff());
  meta << "effective_t_inf = " << buf << "\n";
  for (const auto& [key, value] : out.meta) meta << key << " = " << value << "\n";
  meta << "\n" << render_scenario(sc);
  out.files.push_back((dir / "run_meta.scn").string());
}

}  // namespace

DensityMatrix build_initial_state(const Scenario& sc, const HilbertLayout& layout) {
  if (!sc.init.use_populations) return initial_state(layout);
  const int n = layout.nuclear_dim();
  const int d = layout.total_dim();
  Matrix rho = Matrix::Zero(d, d);
  auto fill = [&](int block, double weight) {
    int off = layout.block_offset(block);
    rho.block(off, off, n, n) = (weight / n) * Matrix::Identity(n, n);
  };
  fill(layout.block_index(Channel::S), sc.init.q_s);
  const auto triplets = layout.triplet_channels();
  for (Channel c : triplets)
    fill(layout.block_index(c), sc.init.q_t / double(triplets.size()));
  fill(layout.product_block(), sc.init.q_p);
  double residual = 1.0 - sc.init.q_s - sc.init.q_t - sc.init.q_p;
  if (std::abs(residual) > 1e-12)
    throw ValidationError("initial populations must sum to 1");
  return DensityMatrix{rho, true};
}

EncounterMaps scenario_maps(const Scenario& sc, const SubspaceOps& ops) {
  if (sc.coupling) {
    sc.coupling->validate(ops.layout);
    return build_maps(derive_map_params(*sc.coupling), ops);
  }
  if (!sc.mix.empty()) return average_maps(sc.mix, ops);
  throw ValidationError("scenario does not define an encounter coupling");
}

RunOutput run_scenario(const Scenario& sc, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::path dir = !out_dir.empty() ? out_dir
                              : !sc.run.out.empty() ? sc.run.out
                                                    : std::string(".");
  std::filesystem::create_directories(dir);

  RunOutput out;
  switch (sc.run.mode) {
    case RunMode::Me: run_me(sc, dir, out); break;
    case RunMode::Dark: run_dark(sc, dir, out); break;
    case RunMode::Traj: run_traj(sc, dir, out); break;
    case RunMode::Ensemble: run_ensemble(sc, dir, out); break;
    case RunMode::Yield: run_yield(sc, dir, out); break;
    case RunMode::Classify: run_classify(sc, dir, out); break;
    case RunMode::Oracle: run_oracle(sc, dir, out); break;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_metadata(sc, dir, wall, out);
  return out;
}

}  // namespace rpsim
