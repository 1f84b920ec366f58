#pragma once

#include "slim/linops.hpp"
#include "slim/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace slim {

// Image on an n x n (or n x n x n) grid. Voxel (i, j) of a 2D image is
// stored at i*n + j with row 0 at the top; a 3D voxel (k, i, j) is stored
// at (k*n + i)*n + j with slice k along z.
struct Phantom {
  std::size_t dims = 2;
  std::size_t n = 0;
  Vector voxels;

  std::size_t size() const { return static_cast<std::size_t>(voxels.size()); }
};

// Ellipse in normalized coordinates [-1, 1]^2, rotation in degrees.
struct Ellipse {
  double x0, y0, a, b, phi, intensity;
};

// Ellipsoid in [-1, 1]^3 with z-x-z Euler angles in degrees.
struct Ellipsoid {
  double x0, y0, z0, a, b, c, phi, theta, psi, intensity;
};

// Classical 10-ellipse table (outer skull intensity 2, brain -0.98).
const std::vector<Ellipse>& shepp_logan_2d_table();
// Contrast-enhanced "modified" 3D table (intensities 1, -0.8, -0.2, 0.1).
const std::vector<Ellipsoid>& shepp_logan_3d_table();

// Renders the table at pixel centers. Negative sums are clamped to zero.
// dims must be 2 or 3 and n >= 8.
Phantom shepp_logan(std::size_t dims, std::size_t n);
Phantom render_ellipses(const std::vector<Ellipse>& table, std::size_t n);
Phantom render_ellipsoids(const std::vector<Ellipsoid>& table, std::size_t n);

// Centered disk of the given normalized radius.
Phantom disk_phantom(std::size_t n, double radius, double intensity = 1.0);

// Pixel-center coordinate of index i on an n-point axis, in (-1, 1).
inline double grid_coordinate(std::size_t i, std::size_t n) {
  return (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(n)) / static_cast<double>(n);
}

enum class GeometryMode { parallel_2d, parallel_3d };

// Parallel-beam scan. The image occupies a square (cube) of side
// n * pixel_size centered at the origin; each view has a centered detector
// of rays_per_view bins (rays_per_view^2 in 3D) spaced detector_spacing
// apart. Zero for either means the default (n bins, spacing = pixel size).
//
// 2D view at angle t (degrees): detector axis (cos t, sin t), rays travel
// along (-sin t, cos t); t = 0 gives vertical rays.
struct ProjectionGeometry {
  GeometryMode mode = GeometryMode::parallel_2d;
  std::vector<double> angles;
  std::vector<Eigen::Vector3d> directions;
  std::size_t rays_per_view = 0;
  double detector_spacing = 0.0;
  double pixel_size = 1.0;

  static ProjectionGeometry parallel_2d(std::vector<double> angles_deg);
  static ProjectionGeometry parallel_3d(std::vector<Eigen::Vector3d> unit_directions);

  std::size_t n_views() const;
  // Rows per view block for an n-grid.
  std::size_t block_rows(std::size_t n) const;
  // Throws InvalidArgument on malformed angles or directions.
  void validate() const;
};

// count angles first, first + step, ...
std::vector<double> angle_range(double first, double step, std::size_t count);
// Directions drawn uniformly from the unit sphere.
std::vector<Eigen::Vector3d> random_directions(std::size_t count, std::uint64_t seed);

// Largest 3D grid accepted by build_projector.
inline constexpr std::size_t kMax3dGrid = 64;

// Exact ray/voxel intersection lengths (Siddon traversal), one block per
// view. The returned operator carries a zero right-hand side.
std::unique_ptr<SparseBlockOperator> build_projector(const ProjectionGeometry& geom, std::size_t n);

// b = A x_true + e, with Gaussian e rescaled so ||e|| / ||A x_true|| equals
// noise_level exactly.
Vector simulate_data(const RowBlockOperator& op, const Vector& x_true, double noise_level,
                     std::uint64_t seed);
Vector add_noise(const Vector& clean, double noise_level, Rng& rng);

struct TestProblem {
  std::unique_ptr<RowBlockOperator> op;
  Vector b;
  Vector x_true;
};

// Dense standard-normal A (m x n) in M blocks, x_true = ones, 1% noise by
// default.
TestProblem gaussian_testproblem(std::size_t m, std::size_t n, std::size_t n_blocks,
                                 std::uint64_t seed, double noise_level = 0.01);

// Flat binary array: magic "SLIMF", uint64 rank, rank uint64 extents, then
// the values as binary64, all little-endian.
void write_flat(const std::filesystem::path& path, const Vector& values,
                const std::vector<std::uint64_t>& extents);
Vector read_flat(const std::filesystem::path& path, std::vector<std::uint64_t>* extents = nullptr);

// values viewed as a rows x cols row-major grid.
void write_grid_csv(const std::filesystem::path& path, const Vector& values, std::size_t rows,
                    std::size_t cols);

}  // namespace slim
