#pragma once

#include <vector>

#include "rpsim/rng.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Encounter rate r(t): constant, exponentially declining r e^{-at}, or
// algebraically declining (r^{-1/mu} + a t)^{-mu} with mu = 3/2.
struct RateModel {
  enum class Kind { Constant, Exponential, Algebraic };

  Kind kind = Kind::Constant;
  double r = 1.0;
  double a = 0.0;
  double t_inf = -1.0;  // < 0: default cutoff 20 / r(0)

  static constexpr double kMu = 1.5;

  double rate(double t) const;
  // Lambda(t) = int_0^t r(tau) d tau, in closed form per kind.
  double cumulative(double t) const;
  double cutoff() const { return t_inf < 0.0 ? 20.0 / r : t_inf; }
  void validate() const;
};

// Exact binomial pmf via log-gamma.
double binomial_pmf(int k, int n, double p);

// Encounter times on (0, min(t_end, cutoff)], strictly increasing.
// Homogeneous case: exponential inter-arrivals; declining rates: thinning
// against r(0).
std::vector<double> sample_encounters(const RateModel& model, double t_end,
                                      SplitMix64& rng);

}  // namespace rpsim
