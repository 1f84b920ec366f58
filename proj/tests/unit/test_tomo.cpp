#include "slim/tomo.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace slim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Length of the line o + s d inside the box [lo, hi] (slab clipping).
template <int D>
double clip_length(const std::array<double, D>& o, const std::array<double, D>& d,
                   const std::array<double, D>& lo, const std::array<double, D>& hi) {
  double s0 = -1e300, s1 = 1e300;
  for (int a = 0; a < D; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return 0.0;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    s0 = std::max(s0, t0);
    s1 = std::min(s1, t1);
  }
  return std::max(0.0, s1 - s0);
}

// Brute force: every ray against every pixel box.
Matrix brute_force_2d(const std::vector<double>& angles, std::size_t n) {
  const double half = 0.5 * static_cast<double>(n);
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(angles.size() * n),
                          static_cast<Eigen::Index>(n * n));
  for (std::size_t v = 0; v < angles.size(); ++v) {
    const double t = angles[v] * kDeg;
    for (std::size_t r = 0; r < n; ++r) {
      const double off = static_cast<double>(r) - 0.5 * (static_cast<double>(n) - 1.0);
      std::array<double, 2> o{off * std::cos(t), off * std::sin(t)};
      std::array<double, 2> d{-std::sin(t), std::cos(t)};
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          std::array<double, 2> lo{-half + j, half - i - 1.0};
          std::array<double, 2> hi{-half + j + 1.0, half - i};
          a(v * n + r, i * n + j) = clip_length<2>(o, d, lo, hi);
        }
      }
    }
  }
  return a;
}

Matrix brute_force_3d(const std::vector<Eigen::Vector3d>& dirs, std::size_t n) {
  const double half = 0.5 * static_cast<double>(n);
  const std::size_t per_view = n * n;
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(dirs.size() * per_view),
                          static_cast<Eigen::Index>(n * n * n));
  for (std::size_t v = 0; v < dirs.size(); ++v) {
    const Eigen::Vector3d& d = dirs[v];
    const Eigen::Vector3d helper =
        std::abs(d.z()) > 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d e1 = d.cross(helper).normalized();
    const Eigen::Vector3d e2 = d.cross(e1);
    for (std::size_t r2 = 0; r2 < n; ++r2) {
      for (std::size_t r1 = 0; r1 < n; ++r1) {
        const double o1 = static_cast<double>(r1) - 0.5 * (static_cast<double>(n) - 1.0);
        const double o2 = static_cast<double>(r2) - 0.5 * (static_cast<double>(n) - 1.0);
        const Eigen::Vector3d o = o1 * e1 + o2 * e2;
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              std::array<double, 3> lo{-half + j, half - i - 1.0, -half + k};
              std::array<double, 3> hi{-half + j + 1.0, half - i, -half + k + 1.0};
              a(v * per_view + r2 * n + r1, (k * n + i) * n + j) =
                  clip_length<3>({o.x(), o.y(), o.z()}, {d.x(), d.y(), d.z()}, lo, hi);
            }
      }
    }
  }
  return a;
}

bool inside(const Ellipse& e, double x, double y) {
  const double c = std::cos(e.phi * kDeg), s = std::sin(e.phi * kDeg);
  const double dx = x - e.x0, dy = y - e.y0;
  const double u = (dx * c + dy * s) / e.a;
  const double w = (-dx * s + dy * c) / e.b;
  return u * u + w * w <= 1.0;
}

}  // namespace

TEST(Phantom, CenterPositiveCornersZero) {
  for (std::size_t n : {32u, 64u, 128u}) {
    Phantom p = shepp_logan(2, n);
    ASSERT_EQ(p.size(), n * n);
    EXPECT_GT(p.voxels((n / 2) * n + n / 2), 0.0);
    EXPECT_EQ(p.voxels(0), 0.0);
    EXPECT_EQ(p.voxels(n - 1), 0.0);
    EXPECT_EQ(p.voxels((n - 1) * n), 0.0);
    EXPECT_EQ(p.voxels(n * n - 1), 0.0);
    EXPECT_GE(p.voxels.minCoeff(), 0.0);
  }
}

TEST(Phantom, MatchesMembershipOracle) {
  const std::size_t n = 64;
  Phantom p = shepp_logan(2, n);
  const auto& table = shepp_logan_2d_table();
  ASSERT_EQ(table.size(), 10u);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = (2.0 * j + 1.0 - n) / n;
      const double y = -(2.0 * i + 1.0 - n) / n;
      double v = 0.0;
      for (const Ellipse& e : table)
        if (inside(e, x, y)) v += e.intensity;
      EXPECT_NEAR(p.voxels(i * n + j), std::max(v, 0.0), 1e-15) << i << "," << j;
    }
  }
}

TEST(Phantom, MirrorSymmetricAwayFromOffAxisEllipses) {
  // Ellipses 3, 4, 8 and 10 have no mirror partner; everything else is
  // symmetric about x = 0.
  const std::size_t n = 128;
  Phantom p = shepp_logan(2, n);
  const auto& table = shepp_logan_2d_table();
  std::size_t compared = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n / 2; ++j) {
      const double x = grid_coordinate(j, n), y = -grid_coordinate(i, n);
      bool skip = false;
      for (std::size_t e : {2u, 3u, 7u, 9u})
        skip = skip || inside(table[e], x, y) || inside(table[e], -x, y);
      if (skip) continue;
      ++compared;
      EXPECT_EQ(p.voxels(i * n + j), p.voxels(i * n + (n - 1 - j))) << i << "," << j;
    }
  }
  EXPECT_GT(compared, n * n / 2 * 4 / 5);
}

TEST(Phantom, ThreeDimensional) {
  const std::size_t n = 32;
  Phantom p = shepp_logan(3, n);
  ASSERT_EQ(p.size(), n * n * n);
  EXPECT_EQ(p.dims, 3u);
  EXPECT_GT(p.voxels((n / 2 * n + n / 2) * n + n / 2), 0.0);
  EXPECT_EQ(p.voxels(0), 0.0);
  EXPECT_GE(p.voxels.minCoeff(), 0.0);
  EXPECT_THROW(shepp_logan(3, 4), InvalidArgument);
  EXPECT_THROW(shepp_logan(4, 16), InvalidArgument);
}

TEST(Projector2d, AxisAlignedViewsSumColumnsAndRows) {
  const std::size_t n = 16;
  auto op = build_projector(ProjectionGeometry::parallel_2d({0.0, 90.0}), n);
  ASSERT_EQ(op->n_rows(), 2 * n);
  ASSERT_EQ(op->n_blocks(), 2u);
  ASSERT_EQ(op->block_rows(), n);
  Vector x = oracle::gaussian_vector(n * n, 3);
  Vector y = op->apply(x);
  for (std::size_t r = 0; r < n; ++r) {
    double col = 0.0, row = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += x(i * n + r);
    // Detector axis (0, 1) at 90 degrees: offset r is height, i.e. row n-1-r.
    for (std::size_t j = 0; j < n; ++j) row += x((n - 1 - r) * n + j);
    EXPECT_NEAR(y(r), col, 1e-12);
    EXPECT_NEAR(y(n + r), row, 1e-12);
  }
  // Constant image: every ray has length n.
  Vector ones = op->apply(Vector::Ones(n * n));
  for (Eigen::Index r = 0; r < ones.size(); ++r) EXPECT_NEAR(ones(r), double(n), 1e-12);
}

TEST(Projector2d, MatchesBruteForceClipping) {
  const std::size_t n = 12;
  const std::vector<double> angles = {-89.0, -45.0, -30.0, 0.0, 17.3, 45.0, 60.0, 90.0};
  auto op = build_projector(ProjectionGeometry::parallel_2d(angles), n);
  Matrix dense = op->dense_matrix();
  Matrix oracle_a = brute_force_2d(angles, n);
  EXPECT_LE((dense - oracle_a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projector2d, AdjointAndNonnegativity) {
  const std::size_t n = 32;
  auto op = build_projector(ProjectionGeometry::parallel_2d(angle_range(-60, 3, 40)), n);
  EXPECT_EQ(op->n_blocks(), 40u);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Vector x = oracle::gaussian_vector(n * n, 10 + s);
    Vector y = oracle::gaussian_vector(op->n_rows(), 20 + s);
    const double lhs = op->apply(x).dot(y);
    const double rhs = x.dot(op->apply_adjoint(y));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(std::abs(lhs), 1.0));
  }
  const SparseMatrix& a = op->matrix();
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      EXPECT_GT(it.value(), 0.0);
      EXPECT_LE(it.value(), std::sqrt(2.0) + 1e-12);
    }
  // Block i is exactly the rays of view i.
  SampleBlock blk = op->fetch_block(7);
  EXPECT_EQ(blk.rows(), n);
  EXPECT_LE((blk.dense() - Matrix(a).middleRows(7 * n, n)).norm(), 0.0);
}

TEST(Projector2d, DetectorOptionsAndValidation) {
  const std::size_t n = 10;
  ProjectionGeometry g = ProjectionGeometry::parallel_2d({0.0});
  g.rays_per_view = 5;
  g.detector_spacing = 2.0;
  auto op = build_projector(g, n);
  EXPECT_EQ(op->n_rows(), 5u);
  // Rays at x = -4, -2, 0, 2, 4 land on pixel boundaries between columns;
  // each boundary ray must still carry length n in total.
  Vector ones = op->apply(Vector::Ones(n * n));
  for (Eigen::Index r = 0; r < ones.size(); ++r) EXPECT_GT(ones(r), 0.0);

  EXPECT_THROW(build_projector(ProjectionGeometry::parallel_2d({}), n), InvalidArgument);
  EXPECT_THROW(build_projector(ProjectionGeometry::parallel_2d({-90.0}), n), InvalidArgument);
  EXPECT_THROW(build_projector(ProjectionGeometry::parallel_2d({91.0}), n), InvalidArgument);
  EXPECT_NO_THROW(build_projector(ProjectionGeometry::parallel_2d({90.0}), n));
}

TEST(Projector3d, AxisDirectionSumsAlongZ) {
  const std::size_t n = 8;
  auto op = build_projector(ProjectionGeometry::parallel_3d({Eigen::Vector3d::UnitZ()}), n);
  ASSERT_EQ(op->n_rows(), n * n);
  Vector x = oracle::gaussian_vector(n * n * n, 4);
  Vector y = op->apply(x);
  Vector col_sums = Vector::Zero(n * n);
  for (std::size_t k = 0; k < n; ++k) col_sums += x.segment(k * n * n, n * n);
  // Each ray hits exactly one (i, j) column, and all columns are covered.
  std::vector<double> got(y.data(), y.data() + y.size());
  std::vector<double> want(col_sums.data(), col_sums.data() + col_sums.size());
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  for (std::size_t r = 0; r < got.size(); ++r) EXPECT_NEAR(got[r], want[r], 1e-12);
}

TEST(Projector3d, MatchesBruteForceClipping) {
  const std::size_t n = 5;
  auto dirs = random_directions(4, 7);
  dirs.push_back(Eigen::Vector3d(1, 1, 1).normalized());
  auto op = build_projector(ProjectionGeometry::parallel_3d(dirs), n);
  EXPECT_EQ(op->block_rows(), n * n);
  Matrix dense = op->dense_matrix();
  EXPECT_LE((dense - brute_force_3d(dirs, n)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projector3d, GuardsAndValidation) {
  EXPECT_THROW(build_projector(ProjectionGeometry::parallel_3d({Eigen::Vector3d::UnitZ()}),
                               kMax3dGrid + 1),
               ScaleGuard);
  EXPECT_THROW(build_projector(ProjectionGeometry::parallel_3d({Eigen::Vector3d(1, 1, 0)}), 4),
               InvalidArgument);
  for (const auto& d : random_directions(50, 3)) EXPECT_NEAR(d.norm(), 1.0, 1e-15);
}

TEST(SimulateData, NoiseRatioIsExact) {
  auto op = build_projector(ProjectionGeometry::parallel_2d(angle_range(-60, 10, 12)), 16);
  Vector x = shepp_logan(2, 16).voxels;
  Vector clean = op->apply(x);
  for (double level : {0.001, 0.01, 0.1}) {
    Vector b = simulate_data(*op, x, level, 9);
    EXPECT_NEAR((b - clean).norm() / clean.norm(), level, 1e-14);
  }
  EXPECT_EQ((simulate_data(*op, x, 0.0, 9) - clean).norm(), 0.0);
  EXPECT_EQ(simulate_data(*op, x, 0.01, 9), simulate_data(*op, x, 0.01, 9));
  EXPECT_NE(simulate_data(*op, x, 0.01, 9), simulate_data(*op, x, 0.01, 10));
  EXPECT_THROW(simulate_data(*op, x, -0.1, 9), InvalidArgument);
}

TEST(GaussianProblem, ShapeMomentsRankNoise) {
  TestProblem p = gaussian_testproblem(1000, 100, 100, 3);
  ASSERT_EQ(p.op->n_rows(), 1000u);
  ASSERT_EQ(p.op->n_cols(), 100u);
  ASSERT_EQ(p.op->n_blocks(), 100u);
  EXPECT_EQ(p.x_true, Vector::Ones(100));
  Matrix a = p.op->dense_matrix();
  const double mean = a.mean();
  const double var = (a.array() - mean).square().sum() / (a.size() - 1);
  // 1e5 samples: standard errors 3.2e-3 (mean) and 4.5e-3 (variance).
  EXPECT_LT(std::abs(mean), 0.015);
  EXPECT_LT(std::abs(var - 1.0), 0.025);
  Eigen::JacobiSVD<Matrix> svd(a);
  EXPECT_GT(svd.singularValues().minCoeff(), 1.0);
  Vector clean = a * p.x_true;
  EXPECT_NEAR((p.b - clean).norm() / clean.norm(), 0.01, 1e-14);
  EXPECT_EQ(p.op->rhs(), p.b);
  TestProblem q = gaussian_testproblem(1000, 100, 100, 3);
  EXPECT_EQ(q.op->dense_matrix(), a);
  EXPECT_THROW(gaussian_testproblem(1000, 100, 7, 3), InvalidArgument);
}

TEST(FlatFile, RoundTripAndBadMagic) {
  const auto dir = std::filesystem::temp_directory_path() / "slim_test_tomo";
  std::filesystem::create_directories(dir);
  Vector v = oracle::gaussian_vector(60, 5);
  v(3) = 1e-310;
  write_flat(dir / "a.slimf", v, {3, 4, 5});
  std::vector<std::uint64_t> ext;
  Vector w = read_flat(dir / "a.slimf", &ext);
  EXPECT_EQ(ext, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(v, w);
  EXPECT_THROW(write_flat(dir / "b.slimf", v, {7}), InvalidArgument);
  {
    std::ofstream out(dir / "bad.slimf", std::ios::binary);
    out << "NOPE!";
  }
  EXPECT_THROW(read_flat(dir / "bad.slimf"), StreamError);
  std::filesystem::remove_all(dir);
}
