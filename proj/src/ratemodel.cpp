#include "rpsim/ratemodel.hpp"

#include <algorithm>
#include <cmath>

namespace rpsim {

double RateModel::rate(double t) const {
  switch (kind) {
    case Kind::Constant: return r;
    case Kind::Exponential: return r * std::exp(-a * t);
    case Kind::Algebraic: return std::pow(std::pow(r, -1.0 / kMu) + a * t, -kMu);
  }
  return r;
}

double RateModel::cumulative(double t) const {
  switch (kind) {
    case Kind::Constant:
      return r * t;
    case Kind::Exponential:
      return a > 0.0 ? (r / a) * (1.0 - std::exp(-a * t)) : r * t;
    case Kind::Algebraic: {
      if (a == 0.0) return r * t;
      const double c = std::pow(r, -1.0 / kMu);
      return (2.0 / a) * (1.0 / std::sqrt(c) - 1.0 / std::sqrt(c + a * t));
    }
  }
  return r * t;
}

void RateModel::validate() const {
  if (r <= 0.0) throw DomainError("RateModel: r must be > 0");
  if (a < 0.0) throw DomainError("RateModel: a must be >= 0");
}

double binomial_pmf(int k, int n, double p) {
  if (k < 0 || n < 0 || k > n || p < 0.0 || p > 1.0)
    throw DomainError("binomial_pmf: domain violation");
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                   std::lgamma(n - k + 1.0) + k * std::log(p) +
                   (n - k) * std::log1p(-p);
  return std::exp(log_pmf);
}

std::vector<double> sample_encounters(const RateModel& model, double t_end,
                                      SplitMix64& rng) {
  std::vector<double> times;
  if (model.r == 0.0) return times;
  model.validate();
  const double horizon = std::min(t_end, model.cutoff());
  const double r0 = model.rate(0.0);
  double t = 0.0;
  while (true) {
    t += rng.exponential(r0);
    if (t > horizon) break;
    if (model.kind == RateModel::Kind::Constant ||
        rng.uniform() < model.rate(t) / r0)
      times.push_back(t);
  }
  return times;
}

std::size_t SplitMix64::discrete(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace rpsim
