#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rpsim/density.hpp"
#include "rpsim/integrate.hpp"
#include "rpsim/linalg.hpp"
#include "rpsim/trajectory.hpp"
#include "test_support.hpp"

using namespace rpsim;

namespace {

EncounterMaps von_neumann_maps(const SubspaceOps& ops) {
  EncounterCoupling c;
  c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
  c.kappa = 1.0;
  for (int j = 0; j < 4; ++j) c.pi[j] = M_PI / 2.0;
  return build_maps(derive_map_params(c), ops);
}

}  // namespace

TEST_CASE("binomial pmf") {
  CHECK(binomial_pmf(0, 10, 0.3) == doctest::Approx(std::pow(0.7, 10)).epsilon(1e-13));
  CHECK(binomial_pmf(10, 10, 0.3) == doctest::Approx(std::pow(0.3, 10)).epsilon(1e-13));
  double sum = 0.0;
  for (int k = 0; k <= 50; ++k) sum += binomial_pmf(k, 50, 0.3);
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK_THROWS_AS(binomial_pmf(-1, 5, 0.5), DomainError);
  CHECK_THROWS_AS(binomial_pmf(6, 5, 0.5), DomainError);
  CHECK_THROWS_AS(binomial_pmf(1, 5, 1.5), DomainError);
}

TEST_CASE("encounter sampling") {
  SUBCASE("zero rate: always empty") {
    RateModel model;
    model.r = 0.0;
    SplitMix64 rng(1);
    for (int i = 0; i < 10; ++i) CHECK(sample_encounters(model, 100.0, rng).empty());
  }

  SUBCASE("counts are Poisson at rt = 0.1") {
    RateModel model;
    model.r = 1.0;
    const double t_end = 0.1;
    const int n = 200000;
    std::array<long, 4> hist{};  // 0, 1, 2, >2
    SplitMix64 rng = stream_for(42, 0);
    for (int i = 0; i < n; ++i) {
      size_t k = sample_encounters(model, t_end, rng).size();
      hist[std::min<size_t>(k, 3)] += 1;
    }
    const double p0 = std::exp(-0.1), p1 = 0.1 * p0, p2 = 0.005 * p0;
    const double p3 = 1.0 - p0 - p1 - p2;
    const std::array<double, 4> expect{p0, p1, p2, p3};
    for (int k = 0; k < 4; ++k) {
      double frac = double(hist[k]) / n;
      double sigma = std::sqrt(expect[k] * (1.0 - expect[k]) / n);
      CHECK(std::abs(frac - expect[k]) < 4.0 * sigma + 1e-9);
    }
  }

  SUBCASE("exponentially declining rate with a = r gives mean count 1") {
    RateModel model;
    model.kind = RateModel::Kind::Exponential;
    model.r = 1.0;
    model.a = 1.0;
    model.t_inf = 40.0;
    const int n = 100000;
    SplitMix64 rng = stream_for(7, 3);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      total += double(sample_encounters(model, 40.0, rng).size());
    double mean = total / n;
    // Analytic oracle: integral of r e^{-at} over (0, inf) = r/a = 1.
    CHECK(std::abs(mean - 1.0) < 4.0 / std::sqrt(double(n)));
  }

  SUBCASE("waiting time to first encounter is exponential (KS test)") {
    RateModel model;
    model.r = 0.7;
    model.t_inf = 200.0;  // P(no encounter by then) ~ e^{-140}
    const int n = 100000;
    std::vector<double> first;
    first.reserve(n);
    SplitMix64 rng = stream_for(11, 0);
    for (int i = 0; i < n; ++i) {
      auto times = sample_encounters(model, 200.0, rng);
      REQUIRE(!times.empty());
      first.push_back(times.front());
    }
    std::sort(first.begin(), first.end());
    double d_stat = 0.0;
    for (int i = 0; i < n; ++i) {
      double cdf = 1.0 - std::exp(-model.r * first[i]);
      d_stat = std::max(d_stat, std::abs(cdf - double(i + 1) / n));
      d_stat = std::max(d_stat, std::abs(cdf - double(i) / n));
    }
    CHECK(d_stat < 1.628 / std::sqrt(double(n)));  // 1% critical value
  }

  SUBCASE("algebraic decline is monotone and respects the cutoff") {
    RateModel model;
    model.kind = RateModel::Kind::Algebraic;
    model.r = 2.0;
    model.a = 0.5;
    CHECK(model.rate(0.0) == doctest::Approx(2.0));
    CHECK(model.rate(1.0) < model.rate(0.5));
    CHECK(model.cutoff() == doctest::Approx(10.0));  // default 20 / r
    SplitMix64 rng(3);
    for (double t : sample_encounters(model, 1e9, rng)) CHECK(t <= model.cutoff());
  }
}

TEST_CASE("single trajectories") {
  HilbertLayout layout;
  SubspaceOps ops = build_subspace_ops(layout);
  Matrix singlet = Matrix::Zero(5, 5);
  singlet(0, 0) = 1.0;
  BetweenGenerator free{Matrix::Zero(5, 5), std::nullopt};
  const std::vector<double> grid{0.0, 1.0, 2.0, 3.0};
  RateModel model;
  model.r = 1.0;
  model.t_inf = 1e9;

  SUBCASE("von Neumann + singlet: first encounter clicks S and lands in P") {
    EncounterMaps maps = von_neumann_maps(ops);
    for (uint64_t seed = 0; seed < 20; ++seed) {
      SplitMix64 rng = stream_for(99, seed);
      TrajectoryResult traj = run_trajectory(singlet, free, maps, model, grid, rng);
      if (traj.clicks.events.empty()) continue;
      CHECK(traj.clicks.events.front().label == ClickLabel::S);
      Matrix final_state = traj.states.back();
      CHECK(expectation(final_state, ops.q_p) == doctest::Approx(1.0));
    }
  }

  SUBCASE("zero rate: pure unitary evolution") {
    std::mt19937_64 rnd(5);
    Matrix g = test::random_matrix(5, rnd);
    Matrix h = hermitized(g);
    h.row(4).setZero();
    h.col(4).setZero();
    BetweenGenerator gen{h, std::nullopt};
    RateModel quiet;
    quiet.r = 0.0;
    EncounterMaps maps = von_neumann_maps(ops);
    SplitMix64 rng = stream_for(1, 0);
    TrajectoryResult traj = run_trajectory(singlet, gen, maps, quiet, grid, rng);
    CHECK(traj.clicks.events.empty());
    UnitaryPropagator prop(h);
    for (size_t gidx = 0; gidx < grid.size(); ++gidx) {
      Matrix u = prop.u(grid[gidx]);
      CHECK(max_abs(traj.states[gidx] - u * singlet * u.adjoint()) < 1e-12);
    }
  }

  SUBCASE("trivial encounters do not disturb the unitary evolution") {
    EncounterCoupling c;
    c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
    c.kappa = 0.0;
    EncounterMaps maps = build_maps(derive_map_params(c), ops);
    std::mt19937_64 rnd(6);
    Matrix g = test::random_matrix(5, rnd);
    Matrix h = hermitized(g);
    h.row(4).setZero();
    h.col(4).setZero();
    BetweenGenerator gen{h, std::nullopt};
    RateModel busy;
    busy.r = 5.0;
    busy.t_inf = 1e9;
    SplitMix64 rng = stream_for(2, 0);
    TrajectoryResult traj = run_trajectory(singlet, gen, maps, busy, grid, rng);
    CHECK(!traj.clicks.events.empty());
    for (const auto& ev : traj.clicks.events) CHECK(ev.label == ClickLabel::None);
    UnitaryPropagator prop(h);
    for (size_t gidx = 0; gidx < grid.size(); ++gidx) {
      Matrix u = prop.u(grid[gidx]);
      CHECK(max_abs(traj.states[gidx] - u * singlet * u.adjoint()) < 1e-10);
    }
  }

  SUBCASE("bit-exact reproducibility for a fixed seed") {
    EncounterMaps maps = von_neumann_maps(ops);
    SplitMix64 rng1 = stream_for(123, 5);
    SplitMix64 rng2 = stream_for(123, 5);
    TrajectoryResult a = run_trajectory(singlet, free, maps, model, grid, rng1);
    TrajectoryResult b = run_trajectory(singlet, free, maps, model, grid, rng2);
    REQUIRE(a.clicks.events.size() == b.clicks.events.size());
    for (size_t i = 0; i < a.clicks.events.size(); ++i) {
      CHECK(a.clicks.events[i].time == b.clicks.events[i].time);
      CHECK(a.clicks.events[i].label == b.clicks.events[i].label);
    }
    for (size_t gidx = 0; gidx < grid.size(); ++gidx)
      CHECK(max_abs(a.states[gidx] - b.states[gidx]) == 0.0);
  }

  SUBCASE("dark policies") {
    EncounterMaps maps = von_neumann_maps(ops);
    SplitMix64 rng = stream_for(7, 1);
    TrajectoryResult traj = run_trajectory(singlet, free, maps, model, grid, rng,
                                           ConditionPolicy::DarkDiscard);
    if (!traj.clicks.events.empty()) CHECK(traj.conditioned_away);

    bool threw = false;
    for (uint64_t idx = 0; idx < 10 && !threw; ++idx) {
      SplitMix64 r2 = stream_for(7, idx);
      try {
        run_trajectory(singlet, free, maps, model, grid, r2,
                       ConditionPolicy::DarkAbort);
      } catch (const ZeroTraceError&) {
        threw = true;
      }
    }
    CHECK(threw);
  }
}

TEST_CASE("ensemble averaging") {
  SpinSystemSpec spec;
  spec.field_b = Eigen::Vector3d(0, 0, 0.5);
  HilbertLayout layout = spec.make_layout();
  SubspaceOps ops = build_subspace_ops(layout);
  BetweenGenerator between = build_hamiltonian(spec, layout);
  Matrix singlet = initial_state(layout).rho;
  RateModel model;
  model.r = 1.0;
  model.t_inf = 1e9;
  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};

  SUBCASE("von Neumann ensemble reproduces 1 - e^{-rt} recombination") {
    EncounterMaps maps = von_neumann_maps(ops);
    BetweenGenerator free{Matrix::Zero(5, 5), std::nullopt};
    EnsembleResult res =
        ensemble_average(4000, singlet, free, maps, ops, model, grid, 2024);
    for (size_t g = 1; g < grid.size(); ++g) {
      double expected = 1.0 - std::exp(-model.r * grid[g]);
      CHECK(std::abs(res.q_mean[g][2] - expected) < 3.0 * res.q_se[g][2] + 5e-3);
    }
  }

  SUBCASE("mean state converges to the unconditional master equation") {
    EncounterCoupling c;
    c.mode = SymmetryMode::TripletSymmetric;
    c.kappa = 0.8;
    c.pi[0] = 1.0;
    c.delta[0] = 0.4;
    for (int j = 1; j < 4; ++j) {
      c.pi[j] = 0.6;
      c.delta[j] = 0.3;
    }
    EncounterMaps maps = build_maps(derive_map_params(c), ops);
    EnsembleResult res =
        ensemble_average(4000, singlet, between, maps, ops, model, grid, 77);

    SuperOp enc = model.r * maps.a_cpt + (-model.r) * SuperOp::identity(5);
    const Matrix& h = between.hamiltonian;
    auto rhs = [&](double, const Matrix& rho) {
      return (-kI * (h * rho - rho * h) + enc.apply(rho)).eval();
    };
    Matrix rho = singlet;
    double t = 0.0;
    const double dt = default_step(model.r, operator_norm(h));
    for (size_t g = 0; g < grid.size(); ++g) {
      rho = rk4(rhs, rho, t, grid[g], dt);
      t = grid[g];
      CHECK(trace_distance(res.mean[g], rho) < 0.05);
    }
  }

  SUBCASE("results are independent of the worker count") {
    EncounterMaps maps = von_neumann_maps(ops);
    EnsembleResult a = ensemble_average(500, singlet, between, maps, ops, model,
                                        grid, 31, ConditionPolicy::Unconditional, 1);
    EnsembleResult b = ensemble_average(500, singlet, between, maps, ops, model,
                                        grid, 31, ConditionPolicy::Unconditional, 4);
    for (size_t g = 0; g < grid.size(); ++g) {
      CHECK(max_abs(a.mean[g] - b.mean[g]) == 0.0);
      for (int k = 0; k < 3; ++k) CHECK(a.q_se[g][k] == b.q_se[g][k]);
    }
    CHECK(a.click_histogram == b.click_histogram);
  }

  SUBCASE("Heisenberg-frame simulation equals the direct one") {
    EncounterCoupling c;
    c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
    c.kappa = 0.9;
    c.pi[0] = 1.0;
    for (int j = 1; j < 4; ++j) c.pi[j] = 0.7;
    EncounterMaps maps = build_maps(derive_map_params(c), ops);
    EnsembleResult direct =
        ensemble_average(400, singlet, between, maps, ops, model, grid, 55,
                         ConditionPolicy::Unconditional, 1, false);
    EnsembleResult heis =
        ensemble_average(400, singlet, between, maps, ops, model, grid, 55,
                         ConditionPolicy::Unconditional, 1, true);
    for (size_t g = 0; g < grid.size(); ++g)
      CHECK(trace_distance(direct.mean[g], heis.mean[g]) < 1e-3);
  }

  SUBCASE("dark-discard ensembles report the discards") {
    EncounterMaps maps = von_neumann_maps(ops);
    BetweenGenerator free{Matrix::Zero(5, 5), std::nullopt};
    EnsembleResult res = ensemble_average(2000, singlet, free, maps, ops, model,
                                          grid, 13, ConditionPolicy::DarkDiscard);
    CHECK(res.n_discarded > 0);
    CHECK(res.n_used + res.n_discarded == 2000);
    // Survivors never recombined: every kept state stays in R.
    CHECK(res.q_mean.back()[2] == doctest::Approx(0.0));
  }
}
