#pragma once

#include <utility>
#include <vector>

#include "rpsim/types.hpp"

namespace rpsim {

// Linear map on density matrices, stored as a factor-pair list
// rho -> sum_i A_i rho B_i, or as a dense matrix acting on the column-major
// vectorized state.  The two representations are interconvertible.
class SuperOp {
 public:
  using Pair = std::pair<Matrix, Matrix>;

  SuperOp() = default;
  explicit SuperOp(Eigen::Index dim) : dim_(dim) {}  // zero map

  static SuperOp identity(Eigen::Index dim);
  static SuperOp from_pairs(std::vector<Pair> terms);
  static SuperOp from_dense(Matrix dense);

  Matrix apply(const Matrix& rho) const;
  Matrix operator()(const Matrix& rho) const { return apply(rho); }

  // Dense matrix on vec(rho); vec(A rho B) = (B^T (x) A) vec(rho).
  Matrix to_dense() const;

  // Factor pairs; extracted by SVD of the reshuffled dense matrix when the
  // map was constructed dense.
  std::vector<Pair> pairs() const;

  SuperOp& operator+=(const SuperOp& other);
  friend SuperOp operator+(SuperOp a, const SuperOp& b) { return a += b; }
  friend SuperOp operator*(Complex c, const SuperOp& op) { return op.scaled(c); }
  friend SuperOp operator*(double c, const SuperOp& op) { return op.scaled(c); }
  SuperOp scaled(Complex c) const;

  // U^dag A(U rho U^dag) U for each term: the map conjugated into the frame
  // of the unitary u.
  SuperOp conjugated(const Matrix& u) const;

  Eigen::Index dim() const { return dim_; }
  bool empty() const { return terms_.empty() && dense_.size() == 0; }

 private:
  Eigen::Index dim_ = 0;
  std::vector<Pair> terms_;
  Matrix dense_;  // used when constructed from a dense representation
};

// L(c) rho = c rho c^dag - 1/2 {c^dag c, rho}; trace-free for every rho.
SuperOp lindblad_dissipator(const Matrix& c);

// Unnormalized Choi matrix sum_ij E_ij (x) Phi(E_ij); PSD iff Phi is CP.
Matrix choi_matrix(const SuperOp& op);

// Operator 2-norm of the dense representation.
double superop_norm(const SuperOp& op);

}  // namespace rpsim
