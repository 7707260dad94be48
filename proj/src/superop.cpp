#include "rpsim/superop.hpp"

#include "rpsim/linalg.hpp"

namespace rpsim {

namespace {

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, Eigen::Index d) {
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

}  // namespace

SuperOp SuperOp::identity(Eigen::Index dim) {
  SuperOp op(dim);
  op.terms_.emplace_back(Matrix::Identity(dim, dim), Matrix::Identity(dim, dim));
  return op;
}

SuperOp SuperOp::from_pairs(std::vector<Pair> terms) {
  SuperOp op;
  if (terms.empty()) throw DimensionError("SuperOp::from_pairs: no terms");
  op.dim_ = terms.front().first.rows();
  for (const auto& [a, b] : terms)
    if (a.rows() != op.dim_ || a.cols() != op.dim_ || b.rows() != op.dim_ ||
        b.cols() != op.dim_)
      throw DimensionError("SuperOp::from_pairs: inconsistent dimensions");
  op.terms_ = std::move(terms);
  return op;
}

SuperOp SuperOp::from_dense(Matrix dense) {
  SuperOp op;
  Eigen::Index d2 = dense.rows();
  Eigen::Index d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(d2))));
  if (d * d != d2 || dense.cols() != d2)
    throw DimensionError("SuperOp::from_dense: not a d^2 x d^2 matrix");
  op.dim_ = d;
  op.dense_ = std::move(dense);
  return op;
}

Matrix SuperOp::apply(const Matrix& rho) const {
  if (rho.rows() != dim_ || rho.cols() != dim_)
    throw DimensionError("SuperOp::apply: dimension mismatch");
  Matrix out = Matrix::Zero(dim_, dim_);
  for (const auto& [a, b] : terms_) out += a * rho * b;
  if (dense_.size() != 0) out += unvec(dense_ * vec(rho), dim_);
  return out;
}

Matrix SuperOp::to_dense() const {
  Matrix out = Matrix::Zero(dim_ * dim_, dim_ * dim_);
  for (const auto& [a, b] : terms_) out += kron(b.transpose(), a);
  if (dense_.size() != 0) out += dense_;
  return out;
}

std::vector<SuperOp::Pair> SuperOp::pairs() const {
  if (dense_.size() == 0) return terms_;
  // Reshuffle so that rank factors of the dense matrix become (A, B) pairs:
  // R[(a + d i), (b + d j)] = D[(a + d b), (i + d j)].
  const Eigen::Index d = dim_;
  Matrix dense = to_dense();
  Matrix r(d * d, d * d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
          r(a + d * i, b + d * j) = dense(a + d * b, i + d * j);
  Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::vector<Pair> out;
  const auto& sv = svd.singularValues();
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) < 1e-14 * sv(0)) break;
    Matrix a = sv(k) * unvec(svd.matrixU().col(k), d);
    Matrix b = unvec(svd.matrixV().col(k).conjugate(), d).transpose();
    out.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

SuperOp& SuperOp::operator+=(const SuperOp& other) {
  if (dim_ == 0) dim_ = other.dim_;
  if (other.dim_ != dim_) throw DimensionError("SuperOp +=: dimension mismatch");
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  if (other.dense_.size() != 0) {
    if (dense_.size() == 0) dense_ = other.dense_;
    else dense_ += other.dense_;
  }
  return *this;
}

SuperOp SuperOp::scaled(Complex c) const {
  SuperOp out(dim_);
  out.terms_.reserve(terms_.size());
  for (const auto& [a, b] : terms_) out.terms_.emplace_back(c * a, b);
  if (dense_.size() != 0) out.dense_ = c * dense_;
  return out;
}

SuperOp SuperOp::conjugated(const Matrix& u) const {
  SuperOp out(dim_);
  Matrix ud = u.adjoint();
  for (const auto& [a, b] : terms_) out.terms_.emplace_back(ud * a * u, ud * b * u);
  if (dense_.size() != 0) {
    for (const auto& [a, b] : SuperOp::from_dense(dense_).pairs())
      out.terms_.emplace_back(ud * a * u, ud * b * u);
  }
  return out;
}

SuperOp lindblad_dissipator(const Matrix& c) {
  if (c.rows() != c.cols()) throw DimensionError("lindblad_dissipator: non-square");
  Eigen::Index d = c.rows();
  Matrix cc = c.adjoint() * c;
  return SuperOp::from_pairs({{c, c.adjoint()},
                              {-0.5 * cc, Matrix::Identity(d, d)},
                              {Matrix::Identity(d, d), -0.5 * cc}});
}

Matrix choi_matrix(const SuperOp& op) {
  const Eigen::Index d = op.dim();
  Matrix choi = Matrix::Zero(d * d, d * d);
  Matrix e = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      e(i, j) = 1.0;
      choi.block(i * d, j * d, d, d) += op.apply(e);
      e(i, j) = 0.0;
    }
  return choi;
}

double superop_norm(const SuperOp& op) { return operator_norm(op.to_dense()); }

}  // namespace rpsim
