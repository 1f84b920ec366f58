#include "slim/tomo.hpp"

#include "le_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace slim {
namespace {

constexpr char kFlatMagic[5] = {'S', 'L', 'I', 'M', 'F'};

// Keeps the matrix and noise streams of one seed apart.
constexpr std::uint64_t kNoiseStream = 0x6a09e667f3bcc909ULL;

}  // namespace

Vector add_noise(const Vector& clean, double noise_level, Rng& rng) {
  require(noise_level >= 0.0 && std::isfinite(noise_level), "noise level must be >= 0");
  if (noise_level == 0.0) return clean;
  Vector e(clean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  const double clean_norm = clean.norm();
  const double e_norm = e.norm();
  require(clean_norm > 0.0, "cannot scale noise relative to zero data");
  return clean + (noise_level * clean_norm / e_norm) * e;
}

Vector simulate_data(const RowBlockOperator& op, const Vector& x_true, double noise_level,
                     std::uint64_t seed) {
  require(static_cast<std::size_t>(x_true.size()) == op.n_cols(),
          "x_true length does not match the operator");
  Rng rng(seed);
  return add_noise(op.apply(x_true), noise_level, rng);
}

TestProblem gaussian_testproblem(std::size_t m, std::size_t n, std::size_t n_blocks,
                                 std::uint64_t seed, double noise_level) {
  require(m > 0 && n > 0 && n_blocks > 0, "problem sizes must be positive");
  require(m % n_blocks == 0, "m = " + std::to_string(m) + " is not divisible by M = " +
                                 std::to_string(n_blocks));
  Rng rng(seed);
  Matrix a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  }
  Vector x_true = Vector::Ones(static_cast<Eigen::Index>(n));
  Rng noise(seed ^ kNoiseStream);
  Vector b = add_noise(a * x_true, noise_level, noise);

  TestProblem out;
  out.op = std::make_unique<DenseBlockOperator>(std::move(a), b, m / n_blocks);
  out.b = std::move(b);
  out.x_true = std::move(x_true);
  return out;
}

void write_flat(const std::filesystem::path& path, const Vector& values,
                const std::vector<std::uint64_t>& extents) {
  std::uint64_t count = 1;
  for (std::uint64_t e : extents) count *= e;
  require(count == static_cast<std::uint64_t>(values.size()),
          "flat array extents do not match the value count");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kFlatMagic, 5);
  detail::put_u64(out, extents.size());
  for (std::uint64_t e : extents) detail::put_u64(out, e);
  for (Eigen::Index i = 0; i < values.size(); ++i) detail::put_f64(out, values(i));
  if (!out) throw Error("write to " + path.string() + " failed");
}

Vector read_flat(const std::filesystem::path& path, std::vector<std::uint64_t>* extents) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kFlatMagic, 5) != 0) {
    throw StreamError(path.string() + ": not a flat array file");
  }
  const std::string truncated = path.string() + ": truncated flat array";
  const std::uint64_t rank = detail::get_u64(in, truncated);
  require(rank <= 8, path.string() + ": implausible rank");
  std::vector<std::uint64_t> ext(rank);
  std::uint64_t count = 1;
  for (auto& e : ext) {
    e = detail::get_u64(in, truncated);
    count *= e;
  }
  Vector values(static_cast<Eigen::Index>(count));
  detail::read_f64s(in, values.data(), count, truncated);
  if (extents) *extents = std::move(ext);
  return values;
}

void write_grid_csv(const std::filesystem::path& path, const Vector& values, std::size_t rows,
                    std::size_t cols) {
  require(rows * cols == static_cast<std::size_t>(values.size()),
          "grid shape does not match the value count");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.precision(17);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j) out << ',';
      out << values(static_cast<Eigen::Index>(i * cols + j));
    }
    out << '\n';
  }
}

}  // namespace slim
