#include "rpsim/subspace.hpp"

namespace rpsim {

SubspaceOps build_subspace_ops(const HilbertLayout& layout) {
  const int n = layout.nuclear_dim();
  const int d = layout.total_dim();
  const int p_off = layout.block_offset(layout.product_block());

  SubspaceOps ops{layout, {}, {}, Matrix::Zero(d, d), Matrix::Zero(d, d),
                  Matrix::Zero(d, d)};

  for (Channel c : layout.channels()) {
    const int off = layout.block_offset(layout.block_index(c));
    Matrix q = Matrix::Zero(d, d);
    q.block(off, off, n, n) = Matrix::Identity(n, n);
    Matrix l = Matrix::Zero(d, d);
    l.block(p_off, off, n, n) = Matrix::Identity(n, n);
    ops.q_ch[static_cast<int>(c)] = q;
    ops.l_ch[static_cast<int>(c)] = l;
    ops.q_r += q;
    if (c != Channel::S) ops.q_t += q;
  }
  ops.q_p.block(p_off, p_off, n, n) = Matrix::Identity(n, n);
  return ops;
}

Matrix triplet_coherence_remover(const SubspaceOps& ops, const Matrix& rho) {
  Matrix out = -project(ops.q_t, rho);
  for (Channel c : ops.layout.triplet_channels()) out += project(ops.q(c), rho);
  return out;
}

}  // namespace rpsim
