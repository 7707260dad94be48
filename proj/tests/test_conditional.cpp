#include <doctest.h>

#include <cmath>
#include <random>

#include "rpsim/conditional.hpp"
#include "rpsim/integrate.hpp"
#include "rpsim/linalg.hpp"
#include "rpsim/ratemodel.hpp"
#include "rpsim/trajectory.hpp"
#include "test_support.hpp"

using namespace rpsim;

namespace {

// Two-level micromaser fixture: K_A diagonal, K_B off-diagonal, together a
// valid instrument (K_A^dag K_A + K_B^dag K_B = 1).
struct Micromaser {
  SuperOp a, b;

  Micromaser(double alpha, double beta) {
    Matrix ka = Matrix::Zero(2, 2), kb = Matrix::Zero(2, 2);
    ka(0, 0) = std::cos(alpha);
    ka(1, 1) = std::cos(beta);
    kb(1, 0) = std::sin(alpha);
    kb(0, 1) = std::sin(beta);
    a = SuperOp::from_pairs({{ka, ka.adjoint()}});
    b = SuperOp::from_pairs({{kb, kb.adjoint()}});
  }

  SuperOp no_click(double p_a, double p_b) const {
    return (1.0 - p_a) * a + (1.0 - p_b) * b;
  }
};

EncounterMaps von_neumann_maps(const SubspaceOps& ops) {
  EncounterCoupling c;
  c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
  c.kappa = 1.0;
  for (int j = 0; j < 4; ++j) c.pi[j] = M_PI / 2.0;
  return build_maps(derive_map_params(c), ops);
}

EncounterMapParams fig3_params() {
  EncounterCoupling c;
  c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
  c.kappa = 1.0;
  for (int j = 0; j < 4; ++j) c.pi[j] = M_PI / 2.0;  // r~_j = 1
  return derive_map_params(c);
}

}  // namespace

TEST_CASE("conditional generator") {
  Micromaser mm(0.6, 0.3);
  std::mt19937_64 rnd(3);
  Matrix rho0 = test::random_density(2, rnd);

  SUBCASE("trace-preserving A_0 removes the nonlinearity") {
    ConditionalGenerator cg = conditional_generator(mm.no_click(0.0, 0.0), 1.3);
    Matrix lin = cg.linear().apply(rho0);
    CHECK(std::abs(lin.trace()) < 1e-13);
    CHECK(max_abs(cg.rhs_nonlinear(rho0) - lin) < 1e-13);
  }

  SUBCASE("perfect detectors freeze the no-click state") {
    ConditionalGenerator cg = conditional_generator(mm.no_click(1.0, 1.0), 1.3);
    CHECK(max_abs(cg.rhs_nonlinear(rho0)) < 1e-13);
  }

  SUBCASE("nonlinear solution equals the normalized linear one") {
    ConditionalGenerator cg = conditional_generator(mm.no_click(0.7, 0.2), 0.9);
    for (double t : {0.5, 2.0}) {
      auto [cond, p] = cg.solve_conditional(rho0, t);
      Matrix direct = cg.integrate_nonlinear(rho0, t, 1e-3);
      CHECK(trace_distance(cond, direct) < 1e-8);
      CHECK(p <= 1.0 + 1e-12);
    }
  }

  SUBCASE("<L> equals the logarithmic derivative of p(t)") {
    ConditionalGenerator cg = conditional_generator(mm.no_click(0.8, 0.5), 1.1);
    const double t = 0.7, h = 1e-5;
    double p_minus = cg.solve_linear(rho0, t - h).trace().real();
    double p_plus = cg.solve_linear(rho0, t + h).trace().real();
    double dlnp = (std::log(p_plus) - std::log(p_minus)) / (2.0 * h);
    auto [state, p] = cg.solve_conditional(rho0, t);
    double mean_l = cg.linear().apply(state).trace().real();
    CHECK(mean_l == doctest::Approx(dlnp).epsilon(1e-6));
  }

  SUBCASE("occasional projections: G(t,0) = e^{-rt}(1 - P) + P") {
    Matrix p = Matrix::Zero(3, 3);
    p(0, 0) = p(1, 1) = 1.0;
    SuperOp proj = SuperOp::from_pairs({{p, p}});
    const double r = 1.7;
    ConditionalGenerator cg = conditional_generator(proj, r);
    Matrix rho = test::random_density(3, rnd);
    for (double t : {0.3, 1.1, 6.0}) {
      Matrix expected = std::exp(-r * t) * (rho - p * rho * p) + p * rho * p;
      CHECK(max_abs(cg.solve_linear(rho, t) - expected) < 1e-10);
    }
    // Asymptotically the state is projected and renormalized.
    auto [late, prob] = cg.solve_conditional(rho, 50.0 / r);
    Matrix target = p * rho * p / (p * rho * p).trace().real();
    CHECK(trace_distance(late, target) < 1e-9);
    CHECK(prob == doctest::Approx((p * rho * p).trace().real()).epsilon(1e-8));
  }

  SUBCASE("the unphysical complementary projection is refused") {
    Matrix p = Matrix::Zero(3, 3);
    p(0, 0) = p(1, 1) = 1.0;
    // 1 - P(.)P is not completely positive.
    SuperOp bad = SuperOp::identity(3) + (-1.0) * SuperOp::from_pairs({{p, p}});
    CHECK_THROWS_AS(conditional_generator(bad, 1.0), InvariantViolationError);

    // The sanctioned complement Q(.)Q works and gives the Lindblad-remnant
    // equation rho' = r(P rho P - {P, rho}).
    Matrix q = Matrix::Identity(3, 3) - p;
    SuperOp good = SuperOp::from_pairs({{q, q}});
    ConditionalGenerator cg = conditional_generator(good, 1.0);
    Matrix rho = test::random_density(3, rnd);
    Matrix expected = p * rho * p - (p * rho + rho * p);
    CHECK(max_abs(cg.linear().apply(rho) - expected) < 1e-13);
  }
}

TEST_CASE("dark closed form") {
  HilbertLayout layout;
  SubspaceOps ops = build_subspace_ops(layout);
  const EncounterMapParams params = fig3_params();
  const double eps = 1e-10;

  SUBCASE("near-perfect dark evolution collapses at rt = ln((1+eps)/eps)") {
    DetectionEfficiencies eff;
    eff.eta = {1.0, 0.0, 0.0, 0.0};
    const double rt_half = std::log((1.0 + eps) / eps);  // about 23.026

    auto p_r_given_d = [&](double rt) {
      return dark_closed_form(1.0 - eps, eps, 0.0, params, eff, 1.0, ops, rt)
          .trace_r;
    };
    CHECK(p_r_given_d(rt_half) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rt_half == doctest::Approx(23.0259).epsilon(1e-4));
    // Abrupt collapse around the dark survival time.
    CHECK(p_r_given_d(rt_half - 3.0) > 0.9);
    CHECK(p_r_given_d(rt_half + 3.0) < 0.1);
  }

  SUBCASE("imperfect detection stays qualitatively unconditional") {
    // At eta_S = 0.9 the conditional survival decays smoothly on the same
    // O(1) scale as the unconditional one (half-crossing rt = ln 11), in
    // contrast to the abrupt ln(1/eps) collapse of the near-perfect case.
    DetectionEfficiencies eff;
    eff.eta = {0.9, 0.0, 0.0, 0.0};
    double prev_pd = 2.0, prev_prd = 2.0;
    for (double rt = 0.0; rt <= 5.0; rt += 0.25) {
      DarkSolution sol =
          dark_closed_form(1.0 - eps, eps, 0.0, params, eff, 1.0, ops, rt);
      CHECK(sol.trace_n <= prev_pd + 1e-15);  // p(D) non-increasing
      CHECK(sol.p_rd <= prev_prd + 1e-15);
      prev_pd = sol.trace_n;
      prev_prd = sol.p_rd;
      CHECK(sol.p_rd <= sol.trace_n + 1e-15);    // p(R,D) <= p(D)
      CHECK(sol.trace_r >= sol.p_rd - 1e-15);    // p(R|D) >= p(R,D)
    }
    auto trace_r = [&](double rt) {
      return dark_closed_form(1.0 - eps, eps, 0.0, params, eff, 1.0, ops, rt)
          .trace_r;
    };
    const double rt_half = std::log(11.0);  // analytic half-crossing
    CHECK(trace_r(rt_half) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rt_half < 5.0);
    // Asymptotic no-click probability 1 - sum eta_j <Q_j>_0.
    DarkSolution late =
        dark_closed_form(1.0 - eps, eps, 0.0, params, eff, 1.0, ops, 300.0);
    CHECK(late.trace_n == doctest::Approx(0.1 + 0.9 * eps).epsilon(1e-12));
  }

  SUBCASE("perfect dark evolution keeps p(R|D) = 1") {
    DetectionEfficiencies eff;
    eff.eta = {1.0, 1.0, 1.0, 1.0};
    EncounterCoupling c;
    c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
    c.kappa = 0.7;
    c.pi[0] = 1.1;
    for (int j = 1; j < 4; ++j) c.pi[j] = 0.8;
    EncounterMapParams p = derive_map_params(c);
    for (double rt : {0.5, 2.0, 8.0}) {
      DarkSolution sol = dark_closed_form(0.7, 0.3, 0.0, p, eff, 1.0, ops, rt);
      CHECK(sol.trace_r == doctest::Approx(1.0).epsilon(1e-12));
      double expected_n = 0.7 * std::exp(-p.r_tilde[0] * rt) +
                          0.3 * std::exp(-p.r_tilde[1] * rt);
      CHECK(sol.trace_n == doctest::Approx(expected_n).epsilon(1e-12));
    }
  }

  SUBCASE("blind detectors never learn anything") {
    DetectionEfficiencies eff;
    eff.eta = {0.0, 0.0, 0.0, 0.0};
    for (double rt : {0.5, 4.0})
      CHECK(dark_closed_form(0.6, 0.4, 0.0, params, eff, 1.0, ops, rt).trace_n ==
            doctest::Approx(1.0));
  }

  SUBCASE("matches the nonlinear master equation") {
    EncounterCoupling c;
    c.mode = SymmetryMode::TripletSymmetricNoTDephasing;
    c.kappa = 0.8;
    c.pi[0] = 1.0;
    for (int j = 1; j < 4; ++j) c.pi[j] = 0.6;
    c.delta[0] = 0.5;
    DetectionEfficiencies eff;
    eff.eta = {0.8, 0.3, 0.3, 0.3};
    SubspaceOps ops5 = build_subspace_ops(layout);
    EncounterMaps maps = build_maps(derive_map_params(c), ops5);
    EncounterMaps detected = with_detection(maps, eff);
    const double rate = 1.0;
    ConditionalGenerator cg = conditional_generator(detected.a0, rate);

    Matrix rho0 = Matrix::Zero(5, 5);
    rho0(0, 0) = 0.55;
    rho0(1, 1) = 0.25;
    rho0(0, 1) = rho0(1, 0) = 0.2;  // S-T0 coherence
    rho0(2, 2) = 0.1;
    rho0(4, 4) = 0.1;
    for (double t : {0.4, 1.3, 3.0}) {
      DarkSolution sol =
          dark_closed_form(rho0, derive_map_params(c), eff, rate, ops5, t);
      auto [closed, p_closed] = normalize(DensityMatrix{sol.rho_n, false});
      Matrix direct = cg.integrate_nonlinear(rho0, t, 5e-4);
      CHECK(trace_distance(closed.rho, direct) < 1e-8);
      auto [lin, p_lin] = cg.solve_conditional(rho0, t);
      CHECK(std::abs(sol.trace_n - p_lin) < 1e-10);
    }
  }

  SUBCASE("population overflow rejected") {
    DetectionEfficiencies eff;
    CHECK_THROWS_AS(dark_closed_form(0.8, 0.3, 0.0, params, eff, 1.0, ops, 1.0),
                    DomainError);
  }
}

TEST_CASE("dark survival time") {
  SUBCASE("spot value ln(101)") {
    DarkSurvival s = dark_survival_time(1.0, 0.99, 1.0);
    CHECK(s.exact == doctest::Approx(std::log(101.0)).epsilon(1e-12));
    CHECK(s.exact == doctest::Approx(4.6151).epsilon(1e-4));
  }

  SUBCASE("approximation within 1% for eps = 1e-3") {
    DarkSurvival s = dark_survival_time(1.0, 1.0 - 1e-3, 1.0 - 1e-3);
    CHECK(std::abs(s.exact - s.approx) / s.exact < 0.01);
  }

  SUBCASE("numeric root of the closed form matches Eq. tmax") {
    HilbertLayout layout;
    SubspaceOps ops = build_subspace_ops(layout);
    std::mt19937_64 rnd(17);
    std::uniform_real_distribution<double> ue(0.9, 0.999);
    for (int rep = 0; rep < 5; ++rep) {
      const double eta_d = ue(rnd);
      const double q_r0 = ue(rnd);
      EncounterMapParams params = fig3_params();  // R = r~_j = 1
      DetectionEfficiencies eff;
      eff.eta = {eta_d, eta_d, eta_d, eta_d};
      DarkSurvival s = dark_survival_time(1.0, eta_d, q_r0);

      auto trace_r = [&](double rt) {
        return dark_closed_form(0.5 * q_r0, 0.5 * q_r0, 1.0 - q_r0, params, eff,
                                1.0, ops, rt)
            .trace_r;
      };
      double lo = 0.0, hi = 100.0;
      while (hi - lo > 1e-9) {
        double mid = 0.5 * (lo + hi);
        (trace_r(mid) > 0.5 ? lo : hi) = mid;
      }
      CHECK(0.5 * (lo + hi) == doctest::Approx(s.exact).epsilon(1e-6));
    }
  }

  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(dark_survival_time(0.0, 0.9, 1.0), DomainError);
    CHECK_THROWS_AS(dark_survival_time(1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(dark_survival_time(1.0, 0.5, 0.0), DomainError);
  }
}

TEST_CASE("cloud operations") {
  HilbertLayout layout;
  SubspaceOps ops = build_subspace_ops(layout);
  EncounterMaps maps = von_neumann_maps(ops);
  std::mt19937_64 rnd(23);

  SUBCASE("n = 1 reduces to the ordinary conditional update") {
    Matrix rho = test::random_inicon_density(layout, rnd);
    const SuperOp& a_s = maps.a[0].op;
    Matrix direct = a_s.apply(rho) / a_s.apply(rho).trace().real();
    CHECK(max_abs(cloud_single_effect(rho, a_s, 1) - direct) < 1e-13);
  }

  SUBCASE("trace-preserving effect: change of state is (A rho - rho)/n") {
    Matrix rho = test::random_density(5, rnd);
    for (long n : {2L, 10L, 100L}) {
      Matrix out = cloud_single_effect(rho, maps.a_cpt, n);
      Matrix expected = (maps.a_cpt.apply(rho) - rho) / double(n);
      CHECK(max_abs(out - rho - expected) < 1e-13);
    }
  }

  SUBCASE("large cloud: element change bounded by 2/n") {
    Matrix rho = Matrix::Zero(5, 5);
    rho(0, 0) = 0.5;
    rho(1, 1) = 0.5;
    const long n = 1000000;
    Matrix out = cloud_single_effect(rho, maps.a[0].op, n);
    CHECK(max_abs(out - rho) <= 2.0 / double(n));
  }

  SUBCASE("vanishing <A> is rejected") {
    Matrix rho = Matrix::Zero(5, 5);
    rho(1, 1) = 1.0;  // no singlet population: <A_S> = 0
    CHECK_THROWS_AS(cloud_single_effect(rho, maps.a[0].op, 10), ZeroTraceError);
  }
}

TEST_CASE("ensemble click map") {
  HilbertLayout layout;
  SubspaceOps ops = build_subspace_ops(layout);
  EncounterMaps maps = von_neumann_maps(ops);
  SuperOp b(maps.dim);  // click map
  for (const auto& labeled : maps.a) b += labeled.op;
  SuperOp a = maps.a0;  // no-click map (A_CPT - B)

  Matrix rho = Matrix::Zero(5, 5);
  rho(0, 0) = 0.5;  // <B> = 0.5 under von Neumann encounters
  rho(1, 1) = 0.3;
  rho(4, 4) = 0.2;
  const double mean_b = 0.8;  // <Q_S> + <Q_T>

  SUBCASE("all systems click: M_n = B/<B>") {
    const long n = 6;
    const double p = 0.4;
    EnsembleClickMap m = ensemble_click_map(n, n, p, a, b);
    Matrix expected = b.apply(rho) / mean_b;
    CHECK(max_abs(m.apply(rho) - expected) < 1e-13);
    CHECK(m.probability(rho) ==
          doctest::Approx(std::pow(p * mean_b, n)).epsilon(1e-12));
  }

  SUBCASE("x = p<B> removes the nonlinearity") {
    const long n = 10;
    const double p = 0.25;  // p <B> = 0.2 = 2/10
    EnsembleClickMap m = ensemble_click_map(n, 2, p, a, b);
    Matrix expected = (1.0 - p) * rho + p * maps.a_cpt.apply(rho);
    CHECK(max_abs(m.apply(rho) - expected) < 1e-13);
  }

  SUBCASE("mixture identity: sum_l p(l) M_l = (1-p) + p A_CPT for n = 6") {
    const long n = 6;
    const double p = 0.3;
    Matrix total = Matrix::Zero(5, 5);
    double psum = 0.0;
    for (long l = 0; l <= n; ++l) {
      EnsembleClickMap m = ensemble_click_map(n, l, p, a, b);
      double pl = m.probability(rho);
      total += pl * m.apply(rho);
      psum += pl;
    }
    Matrix expected = (1.0 - p) * rho + p * maps.a_cpt.apply(rho);
    CHECK(std::abs(psum - 1.0) < 1e-12);
    CHECK(max_abs(total - expected) < 1e-12);
  }

  SUBCASE("M_l is trace-preserving on normalized states") {
    std::mt19937_64 rnd(27);
    for (long l : {0L, 1L, 4L, 6L}) {
      EnsembleClickMap m = ensemble_click_map(6, l, 0.35, a, b);
      Matrix r = test::random_inicon_density(layout, rnd);
      CHECK(m.apply(r).trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("impossible record rejected") {
    Matrix no_r = Matrix::Zero(5, 5);
    no_r(4, 4) = 1.0;  // <B> = 0
    EnsembleClickMap m = ensemble_click_map(4, 2, 0.5, a, b);
    CHECK_THROWS_AS(m.apply(no_r), ImpossibleRecordError);
    CHECK(m.probability(no_r) == 0.0);
  }
}

TEST_CASE("stochastic master equation") {
  HilbertLayout layout;
  SubspaceOps ops = build_subspace_ops(layout);
  EncounterMaps maps = von_neumann_maps(ops);
  SuperOp b(maps.dim);
  for (const auto& labeled : maps.a) b += labeled.op;

  Matrix rho = initial_state(layout).rho;

  SUBCASE("z = 0 is the unconditional Euler step") {
    const double rate = 1.0, dt = 0.01;
    Matrix step = stochastic_me_step(rho, 0.0, rate, maps.a_cpt, b, dt);
    Matrix expected = rho + dt * rate * (maps.a_cpt.apply(rho) - rho);
    CHECK(max_abs(step - expected) < 1e-14);
  }

  SUBCASE("step-size violation rejected") {
    CHECK_THROWS_AS(stochastic_me_step(rho, 0.0, 10.0, maps.a_cpt, b, 0.1),
                    DomainError);
  }

  SUBCASE("trace preserved for any z") {
    std::mt19937_64 rnd(3);
    Matrix r = test::random_inicon_density(layout, rnd);
    for (double z : {-2.0, 0.4, 3.0}) {
      Matrix step = stochastic_me_step(r, z, 0.5, maps.a_cpt, b, 0.02);
      CHECK(step.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("driving with a simulated record stays near the unconditional path") {
    // Record from an ensemble of independent systems under von Neumann
    // encounters, H = 0.
    const long n_cloud = 10000;
    const double rate = 1.0, dt = 0.01;
    const int n_steps = 150;
    std::vector<double> grid(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) grid[i] = i * dt;
    BetweenGenerator free{Matrix::Zero(5, 5), std::nullopt};
    RateModel model;
    model.r = rate;
    model.t_inf = 1e9;
    EnsembleResult rec = ensemble_average(n_cloud, rho, free, maps, ops, model,
                                          grid, 777);

    Matrix sme = rho;
    Matrix uncond = rho;
    for (int i = 1; i <= n_steps; ++i) {
      double mean_b = std::max(0.0, b.apply(sme).trace().real());
      double z = 0.0;
      if (rate * mean_b > 0.0)
        z = clicks_to_z(rec.clicks_per_bin[i], n_cloud, dt, rate, mean_b);
      sme = stochastic_me_step(sme, z, rate, maps.a_cpt, b, dt);
      uncond = stochastic_me_step(uncond, 0.0, rate, maps.a_cpt, b, dt);
    }
    CHECK(trace_distance(sme, uncond) < 0.05);
  }
}
