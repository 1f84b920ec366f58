#pragma once

#include "slim/types.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace slim {

enum class AccessMode { random_access, single_pass };

// One sampled pair (A_k, b_k). Block indices are zero-based throughout.
//
// Blocks from sparse operators carry `sparse` and leave `a` empty until
// dense() is first called; products use the sparse form when present.
struct SampleBlock {
  std::size_t index = 0;
  mutable Matrix a;
  Vector b;
  SparseMatrix sparse;

  bool has_sparse() const { return sparse.rows() > 0; }
  std::size_t rows() const { return static_cast<std::size_t>(has_sparse() ? sparse.rows() : a.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(has_sparse() ? sparse.cols() : a.cols()); }

  Vector times(const Vector& x) const;            // A_k x
  Vector transpose_times(const Vector& y) const;  // A_k^T y
  const Matrix& dense() const;
};

// Row-block view of a linear least-squares problem min ||Ax - b||.
//
// Rows are partitioned into n_blocks() contiguous blocks of block_rows()
// rows each; block i holds rows [i*l, (i+1)*l). The right-hand side b
// travels with the operator so that a fetched block is a complete sample.
//
// Random-access operators are read-only and may be shared across threads.
// Single-pass operators hand out block i only when i is the next unconsumed
// index and are single-consumer.
class RowBlockOperator {
 public:
  RowBlockOperator(std::size_t n_rows, std::size_t n_cols, std::size_t block_rows,
                   AccessMode mode);
  virtual ~RowBlockOperator() = default;

  RowBlockOperator(const RowBlockOperator&) = delete;
  RowBlockOperator& operator=(const RowBlockOperator&) = delete;

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t n_blocks() const { return n_blocks_; }
  std::size_t block_rows() const { return block_rows_; }
  AccessMode access_mode() const { return mode_; }

  // Throws InvalidArgument for i >= n_blocks() and StreamError when a
  // single-pass contract is violated.
  SampleBlock fetch_block(std::size_t i) const;

  // Exact Ax and A^T y assembled block by block. Random access only.
  Vector apply(const Vector& x) const;
  Vector apply_adjoint(const Vector& y) const;

  // Full (A, b) assembled from the blocks. Random access only.
  Matrix dense_matrix() const;
  Vector rhs() const;

  // Row indices of block i under the uniform partition.
  std::vector<std::size_t> block_row_indices(std::size_t i) const;

 protected:
  virtual SampleBlock do_fetch(std::size_t i) const = 0;
  // Blockwise by default; in-memory operators use the whole matrix.
  virtual Vector do_apply(const Vector& x) const;
  virtual Vector do_apply_adjoint(const Vector& y) const;
  void require_random_access(const char* what) const;

 private:
  std::size_t n_rows_;
  std::size_t n_cols_;
  std::size_t block_rows_;
  std::size_t n_blocks_;
  AccessMode mode_;
};

// Dense in-memory matrix.
class DenseBlockOperator final : public RowBlockOperator {
 public:
  DenseBlockOperator(Matrix a, Vector b, std::size_t block_rows);

  const Matrix& matrix() const { return a_; }
  const Vector& data() const { return b_; }

 protected:
  SampleBlock do_fetch(std::size_t i) const override;
  Vector do_apply(const Vector& x) const override;
  Vector do_apply_adjoint(const Vector& y) const override;

 private:
  Matrix a_;
  Vector b_;
};

// Row-major sparse matrix; blocks are densified on fetch.
class SparseBlockOperator final : public RowBlockOperator {
 public:
  SparseBlockOperator(SparseMatrix a, Vector b, std::size_t block_rows);

  const SparseMatrix& matrix() const { return a_; }
  const Vector& data() const { return b_; }
  void set_data(Vector b);

 protected:
  SampleBlock do_fetch(std::size_t i) const override;
  Vector do_apply(const Vector& x) const override;
  Vector do_apply_adjoint(const Vector& y) const override;

 private:
  SparseMatrix a_;
  Vector b_;
};

// Exposes any random-access operator as a single-pass stream over blocks
// 0, 1, ..., M-1. Only the most recently handed-out block index is tracked;
// no block data is retained.
class SinglePassView final : public RowBlockOperator {
 public:
  explicit SinglePassView(const RowBlockOperator& source);

  std::size_t consumed() const { return next_; }

 protected:
  SampleBlock do_fetch(std::size_t i) const override;

 private:
  const RowBlockOperator& source_;
  mutable std::size_t next_ = 0;
};

// A_k^T A_k.
Matrix gram_block(const SampleBlock& blk);

// Binary streamed-matrix container.
//
//   bytes 0..4   magic "SLIM1"
//   then         m, n, M, l as uint64 little-endian
//   then         M records: l*n block entries (row-major) followed by l
//                right-hand-side entries, all IEEE-754 binary64 little-endian
//
// The reader is a single-pass operator: blocks must be requested in order.
struct StreamHeader {
  std::uint64_t n_rows = 0;
  std::uint64_t n_cols = 0;
  std::uint64_t n_blocks = 0;
  std::uint64_t block_rows = 0;
};

inline constexpr char kStreamMagic[5] = {'S', 'L', 'I', 'M', '1'};

void write_stream_file(const std::filesystem::path& path, const RowBlockOperator& op);
StreamHeader read_stream_header(const std::filesystem::path& path);

class StreamedFileOperator final : public RowBlockOperator {
 public:
  explicit StreamedFileOperator(const std::filesystem::path& path);
  ~StreamedFileOperator() override;

  std::size_t consumed() const;

 protected:
  SampleBlock do_fetch(std::size_t i) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  StreamedFileOperator(StreamHeader header, std::unique_ptr<Impl> impl);
};

// Reads a whole streamed-matrix file into memory as a random-access operator.
std::unique_ptr<DenseBlockOperator> load_stream_file(const std::filesystem::path& path);

}  // namespace slim
