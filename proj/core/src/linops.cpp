#include "slim/linops.hpp"

#include <string>

namespace slim {

RowBlockOperator::RowBlockOperator(std::size_t n_rows, std::size_t n_cols,
                                   std::size_t block_rows, AccessMode mode)
    : n_rows_(n_rows), n_cols_(n_cols), block_rows_(block_rows), n_blocks_(0), mode_(mode) {
  require(n_rows > 0 && n_cols > 0, "operator must have at least one row and one column");
  require(block_rows > 0, "block size must be positive");
  if (n_rows % block_rows != 0) {
    throw InvalidArgument("row count " + std::to_string(n_rows) +
                          " is not divisible by block size " + std::to_string(block_rows));
  }
  n_blocks_ = n_rows / block_rows;
}

SampleBlock RowBlockOperator::fetch_block(std::size_t i) const {
  if (i >= n_blocks_) {
    throw InvalidArgument("block index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(n_blocks_) + ")");
  }
  return do_fetch(i);
}

void RowBlockOperator::require_random_access(const char* what) const {
  if (mode_ != AccessMode::random_access) {
    throw StreamError(std::string(what) + " requires a random-access operator");
  }
}

Vector RowBlockOperator::apply(const Vector& x) const {
  require_random_access("apply");
  require(static_cast<std::size_t>(x.size()) == n_cols_, "apply: dimension mismatch");
  return do_apply(x);
}

Vector RowBlockOperator::apply_adjoint(const Vector& y) const {
  require_random_access("apply_adjoint");
  require(static_cast<std::size_t>(y.size()) == n_rows_, "apply_adjoint: dimension mismatch");
  return do_apply_adjoint(y);
}

Vector RowBlockOperator::do_apply(const Vector& x) const {
  Vector y(static_cast<Eigen::Index>(n_rows_));
  const auto l = static_cast<Eigen::Index>(block_rows_);
  for (std::size_t i = 0; i < n_blocks_; ++i) {
    y.segment(static_cast<Eigen::Index>(i) * l, l) = do_fetch(i).times(x);
  }
  return y;
}

Vector RowBlockOperator::do_apply_adjoint(const Vector& y) const {
  Vector x = Vector::Zero(static_cast<Eigen::Index>(n_cols_));
  const auto l = static_cast<Eigen::Index>(block_rows_);
  for (std::size_t i = 0; i < n_blocks_; ++i) {
    x += do_fetch(i).transpose_times(y.segment(static_cast<Eigen::Index>(i) * l, l));
  }
  return x;
}

Matrix RowBlockOperator::dense_matrix() const {
  require_random_access("dense_matrix");
  Matrix a(static_cast<Eigen::Index>(n_rows_), static_cast<Eigen::Index>(n_cols_));
  const auto l = static_cast<Eigen::Index>(block_rows_);
  for (std::size_t i = 0; i < n_blocks_; ++i) {
    a.middleRows(static_cast<Eigen::Index>(i) * l, l) = do_fetch(i).dense();
  }
  return a;
}

Vector RowBlockOperator::rhs() const {
  require_random_access("rhs");
  Vector b(static_cast<Eigen::Index>(n_rows_));
  const auto l = static_cast<Eigen::Index>(block_rows_);
  for (std::size_t i = 0; i < n_blocks_; ++i) {
    b.segment(static_cast<Eigen::Index>(i) * l, l) = do_fetch(i).b;
  }
  return b;
}

std::vector<std::size_t> RowBlockOperator::block_row_indices(std::size_t i) const {
  require(i < n_blocks_, "block index out of range");
  std::vector<std::size_t> rows(block_rows_);
  for (std::size_t r = 0; r < block_rows_; ++r) rows[r] = i * block_rows_ + r;
  return rows;
}

DenseBlockOperator::DenseBlockOperator(Matrix a, Vector b, std::size_t block_rows)
    : RowBlockOperator(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()),
                       block_rows, AccessMode::random_access),
      a_(std::move(a)),
      b_(std::move(b)) {
  require(b_.size() == a_.rows(), "right-hand side length does not match row count");
}

Vector DenseBlockOperator::do_apply(const Vector& x) const { return a_ * x; }

Vector DenseBlockOperator::do_apply_adjoint(const Vector& y) const { return a_.transpose() * y; }

SampleBlock DenseBlockOperator::do_fetch(std::size_t i) const {
  const auto l = static_cast<Eigen::Index>(block_rows());
  const auto first = static_cast<Eigen::Index>(i) * l;
  return SampleBlock{i, a_.middleRows(first, l), b_.segment(first, l), {}};
}

SparseBlockOperator::SparseBlockOperator(SparseMatrix a, Vector b, std::size_t block_rows)
    : RowBlockOperator(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()),
                       block_rows, AccessMode::random_access),
      a_(std::move(a)),
      b_(std::move(b)) {
  require(b_.size() == a_.rows(), "right-hand side length does not match row count");
  a_.makeCompressed();
}

void SparseBlockOperator::set_data(Vector b) {
  require(b.size() == a_.rows(), "right-hand side length does not match row count");
  b_ = std::move(b);
}

Vector SampleBlock::times(const Vector& x) const {
  if (has_sparse()) return sparse * x;
  return a * x;
}

Vector SampleBlock::transpose_times(const Vector& y) const {
  if (has_sparse()) return sparse.transpose() * y;
  return a.transpose() * y;
}

const Matrix& SampleBlock::dense() const {
  if (has_sparse() && a.rows() != sparse.rows()) a = Matrix(sparse);
  return a;
}

Vector SparseBlockOperator::do_apply(const Vector& x) const { return a_ * x; }

Vector SparseBlockOperator::do_apply_adjoint(const Vector& y) const { return a_.transpose() * y; }

SampleBlock SparseBlockOperator::do_fetch(std::size_t i) const {
  const auto l = static_cast<Eigen::Index>(block_rows());
  const auto first = static_cast<Eigen::Index>(i) * l;
  SampleBlock blk;
  blk.index = i;
  blk.b = b_.segment(first, l);
  blk.sparse = a_.middleRows(first, l);
  return blk;
}

SinglePassView::SinglePassView(const RowBlockOperator& source)
    : RowBlockOperator(source.n_rows(), source.n_cols(), source.block_rows(),
                       AccessMode::single_pass),
      source_(source) {
  if (source.access_mode() != AccessMode::random_access) {
    throw StreamError("SinglePassView needs a random-access source");
  }
}

SampleBlock SinglePassView::do_fetch(std::size_t i) const {
  if (i != next_) {
    throw StreamError("single-pass source: requested block " + std::to_string(i) +
                      " but next unconsumed block is " + std::to_string(next_));
  }
  ++next_;
  return source_.fetch_block(i);
}

Matrix gram_block(const SampleBlock& blk) {
  require(blk.rows() == static_cast<std::size_t>(blk.b.size()), "sample block rows and rhs length disagree");
  if (blk.has_sparse()) return Matrix(blk.sparse.transpose() * blk.sparse);
  Matrix g(blk.a.cols(), blk.a.cols());
  g.setZero();
  g.selfadjointView<Eigen::Lower>().rankUpdate(blk.a.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace slim
