#pragma once

#include <functional>

#include "rpsim/superop.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Fixed integrator step: min(0.01/max_rate, 0.01/h_norm), guarded against
// zero scales.
double default_step(double max_rate, double h_norm);

// Classic fixed-step RK4 for rho' = f(t, rho).  The step actually used is
// t_span divided into an integer number of intervals no longer than dt.
Matrix rk4(const std::function<Matrix(double, const Matrix&)>& f, Matrix rho,
           double t0, double t1, double dt);

// rho' = gen(rho) with a constant generator.
Matrix rk4_superop(const SuperOp& gen, const Matrix& rho0, double t, double dt);

// Optional half-step Richardson error estimate alongside the RK4 result.
struct Rk4Result {
  Matrix rho;
  double error_estimate;
};
Rk4Result rk4_with_error(const std::function<Matrix(double, const Matrix&)>& f,
                         const Matrix& rho0, double t0, double t1, double dt);

}  // namespace rpsim
