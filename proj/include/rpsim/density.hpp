#pragma once

#include <string>
#include <utility>

#include "rpsim/subspace.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Density matrix of the chemical system.  normalized == false marks an
// improper state (trace <= 1), as produced by trace-reducing evolutions.
struct DensityMatrix {
  Matrix rho;
  bool normalized = true;
};

// Hermiticity to 1e-12, smallest eigenvalue >= -1e-10, trace in
// [-1e-12, 1+1e-12] (or within 1e-12 of 1 when flagged normalized).
bool is_valid_density(const DensityMatrix& dm, std::string* why = nullptr);

// rho_N / Tr(rho_N) together with the probability Tr(rho_N).
// Throws ZeroTraceError when the trace is <= 1e-14 (a conditioned-away
// branch).
std::pair<DensityMatrix, double> normalize(const DensityMatrix& dm);

// Tr(rho q) for Hermitian q.
double expectation(const Matrix& rho, const Matrix& q);

// True iff there is no coherence between the R and P subspaces:
// max |Q_R rho Q_P| element < 1e-10.
bool validate_inicon(const Matrix& rho, const SubspaceOps& ops);

}  // namespace rpsim
