#pragma once

#include <functional>

#include "rpsim/types.hpp"

namespace rpsim {

// Kronecker product, row index of a slowest.
Matrix kron(const Matrix& a, const Matrix& b);

inline Matrix hermitized(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

double max_abs(const Matrix& a);

bool is_hermitian(const Matrix& a, double tol = kHermTol);

// Smallest eigenvalue of a Hermitian matrix.
double min_eigenvalue(const Matrix& a);

// Half the trace norm of the difference of two Hermitian matrices.
double trace_distance(const Matrix& a, const Matrix& b);

inline double purity(const Matrix& rho) { return (rho * rho).trace().real(); }

// exp(factor * h) for Hermitian h, by eigendecomposition.
Matrix expm_hermitian(const Matrix& h, Complex factor);

// exp(a) for a general square complex matrix.
Matrix expm(const Matrix& a);

// Largest singular value of a (the operator 2-norm).
double operator_norm(const Matrix& a);

// Adaptive Simpson quadrature of f over [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-8, int max_depth = 40);

}  // namespace rpsim
