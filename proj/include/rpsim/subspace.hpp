#pragma once

#include <array>

#include "rpsim/layout.hpp"
#include "rpsim/types.hpp"

namespace rpsim {

// Projectors and jump operators on the chemical-system space.  All operators
// act as electron/product-block matrices tensored with the nuclear identity;
// the nuclear spins are never touched.  Entries are exact integers.
struct SubspaceOps {
  HilbertLayout layout;
  std::array<Matrix, 4> q_ch;  // Q_S, Q_T0, Q_T+, Q_T- (channels present)
  std::array<Matrix, 4> l_ch;  // L_j = |P><j| (x) 1_nuc
  Matrix q_t;                  // sum of triplet projectors
  Matrix q_r;                  // Q_S + Q_T
  Matrix q_p;                  // product projector

  const Matrix& q(Channel c) const { return q_ch[static_cast<int>(c)]; }
  const Matrix& l(Channel c) const { return l_ch[static_cast<int>(c)]; }
};

SubspaceOps build_subspace_ops(const HilbertLayout& layout);

// Q rho Q, the projective map written Q_j(.) in block arithmetic.
inline Matrix project(const Matrix& q, const Matrix& rho) { return q * rho * q; }

// Removes the intra-triplet coherences: sum_i Q_Ti rho Q_Ti - Q_T rho Q_T.
Matrix triplet_coherence_remover(const SubspaceOps& ops, const Matrix& rho);

}  // namespace rpsim
