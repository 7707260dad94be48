#include "rpsim/integrate.hpp"

#include <algorithm>
#include <cmath>

#include "rpsim/linalg.hpp"

namespace rpsim {

double default_step(double max_rate, double h_norm) {
  // min(0.01/max_rate, 0.01/h_norm) == 0.01/max of the two scales.
  double scale = std::max(max_rate, h_norm);
  return scale > 0.0 ? 0.01 / scale : 0.01;
}

Matrix rk4(const std::function<Matrix(double, const Matrix&)>& f, Matrix rho,
           double t0, double t1, double dt) {
  if (t1 < t0) throw DomainError("rk4: t1 < t0");
  if (t1 == t0) return rho;
  const long n = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / dt)));
  const double h = (t1 - t0) / double(n);
  double t = t0;
  for (long i = 0; i < n; ++i) {
    Matrix k1 = f(t, rho);
    Matrix k2 = f(t + 0.5 * h, rho + 0.5 * h * k1);
    Matrix k3 = f(t + 0.5 * h, rho + 0.5 * h * k2);
    Matrix k4 = f(t + h, rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // Suppress floating-point Hermiticity drift over long runs.
    rho = hermitized(rho);
    t += h;
  }
  return rho;
}

Matrix rk4_superop(const SuperOp& gen, const Matrix& rho0, double t, double dt) {
  return rk4([&](double, const Matrix& r) { return gen.apply(r); }, rho0, 0.0, t, dt);
}

Rk4Result rk4_with_error(const std::function<Matrix(double, const Matrix&)>& f,
                         const Matrix& rho0, double t0, double t1, double dt) {
  Matrix full = rk4(f, rho0, t0, t1, dt);
  Matrix half = rk4(f, rho0, t0, t1, 0.5 * dt);
  return {half, max_abs(full - half) / 15.0};
}

}  // namespace rpsim
