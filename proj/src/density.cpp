#include "rpsim/density.hpp"

#include <cmath>

#include "rpsim/linalg.hpp"

namespace rpsim {

bool is_valid_density(const DensityMatrix& dm, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (dm.rho.rows() != dm.rho.cols()) return fail("not square");
  if (!is_hermitian(dm.rho, kHermTol)) return fail("not Hermitian to 1e-12");
  double tr = dm.rho.trace().real();
  if (dm.normalized) {
    if (std::abs(tr - 1.0) > kTraceTol) return fail("trace != 1 for normalized state");
  } else {
    if (tr < -kTraceTol || tr > 1.0 + kTraceTol) return fail("trace outside [0, 1]");
  }
  if (min_eigenvalue(dm.rho) < kPsdTol) return fail("negative eigenvalue below -1e-10");
  return true;
}

std::pair<DensityMatrix, double> normalize(const DensityMatrix& dm) {
  double tr = dm.rho.trace().real();
  if (tr <= kZeroTraceTol)
    throw ZeroTraceError("cannot normalize: trace " + std::to_string(tr) +
                         " (conditioned-away branch)");
  return {DensityMatrix{dm.rho / tr, true}, tr};
}

double expectation(const Matrix& rho, const Matrix& q) {
  if (rho.rows() != q.rows() || rho.cols() != q.cols())
    throw DimensionError("expectation: dimension mismatch");
  return (rho * q).trace().real();
}

bool validate_inicon(const Matrix& rho, const SubspaceOps& ops) {
  return max_abs(ops.q_r * rho * ops.q_p) < kIniconTol;
}

}  // namespace rpsim
