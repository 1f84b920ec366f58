#include "slim/linops.hpp"

#include "le_io.hpp"

#include <cstring>
#include <fstream>

namespace slim {
namespace {

using detail::put_f64;
using detail::put_u64;

std::uint64_t get_u64(std::istream& in) {
  return detail::get_u64(in, "streamed-matrix file: truncated header");
}

void read_f64s(std::istream& in, double* dst, std::size_t count) {
  detail::read_f64s(in, dst, count, "streamed-matrix file: truncated block record");
}

StreamHeader parse_header(std::istream& in) {
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kStreamMagic, 5) != 0) {
    throw StreamError("streamed-matrix file: bad magic bytes");
  }
  StreamHeader h;
  h.n_rows = get_u64(in);
  h.n_cols = get_u64(in);
  h.n_blocks = get_u64(in);
  h.block_rows = get_u64(in);
  if (h.n_blocks * h.block_rows != h.n_rows) {
    throw StreamError("streamed-matrix file: header has m != M * l");
  }
  return h;
}

}  // namespace

void write_stream_file(const std::filesystem::path& path, const RowBlockOperator& op) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kStreamMagic, 5);
  put_u64(out, op.n_rows());
  put_u64(out, op.n_cols());
  put_u64(out, op.n_blocks());
  put_u64(out, op.block_rows());
  for (std::size_t i = 0; i < op.n_blocks(); ++i) {
    const SampleBlock blk = op.fetch_block(i);
    const Matrix& a = blk.dense();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) put_f64(out, a(r, c));
    }
    for (Eigen::Index r = 0; r < blk.b.size(); ++r) put_f64(out, blk.b(r));
  }
  if (!out) throw Error("write failed for " + path.string());
}

StreamHeader read_stream_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return parse_header(in);
}

struct StreamedFileOperator::Impl {
  std::ifstream in;
  std::size_t next = 0;
};

StreamedFileOperator::StreamedFileOperator(const std::filesystem::path& path)
    : StreamedFileOperator(read_stream_header(path), std::make_unique<Impl>()) {
  impl_->in.open(path, std::ios::binary);
  if (!impl_->in) throw Error("cannot open " + path.string());
  parse_header(impl_->in);
}

StreamedFileOperator::StreamedFileOperator(StreamHeader header, std::unique_ptr<Impl> impl)
    : RowBlockOperator(header.n_rows, header.n_cols, header.block_rows, AccessMode::single_pass),
      impl_(std::move(impl)) {}

StreamedFileOperator::~StreamedFileOperator() = default;

std::size_t StreamedFileOperator::consumed() const { return impl_->next; }

SampleBlock StreamedFileOperator::do_fetch(std::size_t i) const {
  if (i != impl_->next) {
    throw StreamError("single-pass file: requested block " + std::to_string(i) +
                      " but next unconsumed block is " + std::to_string(impl_->next));
  }
  const auto l = static_cast<Eigen::Index>(block_rows());
  const auto n = static_cast<Eigen::Index>(n_cols());
  // Row-major on disk; Eigen default storage is column-major.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(l, n);
  read_f64s(impl_->in, rows.data(), static_cast<std::size_t>(l * n));
  SampleBlock blk{i, rows, Vector(l), {}};
  read_f64s(impl_->in, blk.b.data(), static_cast<std::size_t>(l));
  ++impl_->next;
  return blk;
}

std::unique_ptr<DenseBlockOperator> load_stream_file(const std::filesystem::path& path) {
  StreamedFileOperator stream(path);
  const auto l = static_cast<Eigen::Index>(stream.block_rows());
  Matrix a(static_cast<Eigen::Index>(stream.n_rows()), static_cast<Eigen::Index>(stream.n_cols()));
  Vector b(a.rows());
  for (std::size_t i = 0; i < stream.n_blocks(); ++i) {
    SampleBlock blk = stream.fetch_block(i);
    a.middleRows(static_cast<Eigen::Index>(i) * l, l) = blk.dense();
    b.segment(static_cast<Eigen::Index>(i) * l, l) = blk.b;
  }
  return std::make_unique<DenseBlockOperator>(std::move(a), std::move(b), stream.block_rows());
}

}  // namespace slim
