#include "slim/tomo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace slim {
namespace {

constexpr double kParallelEps = 1e-14;

// Siddon traversal of the ray o + s d (|d| = 1) through the grid
// [-half, half]^D of n^D cells of size h. emit(cell, length) receives the
// per-axis cell indices, axis 0 measured from the low end.
template <int D, class Emit>
void trace_ray(const std::array<double, D>& o, const std::array<double, D>& d, std::size_t n,
               double h, std::vector<double>& crossings, Emit&& emit) {
  const double half = 0.5 * h * static_cast<double>(n);
  double s_min = -INFINITY;
  double s_max = INFINITY;
  for (int a = 0; a < D; ++a) {
    if (std::abs(d[a]) < kParallelEps) {
      if (o[a] <= -half || o[a] >= half) return;
      continue;
    }
    const double s0 = (-half - o[a]) / d[a];
    const double s1 = (half - o[a]) / d[a];
    s_min = std::max(s_min, std::min(s0, s1));
    s_max = std::min(s_max, std::max(s0, s1));
  }
  if (!(s_max > s_min)) return;

  crossings.clear();
  crossings.push_back(s_min);
  crossings.push_back(s_max);
  for (int a = 0; a < D; ++a) {
    if (std::abs(d[a]) < kParallelEps) continue;
    for (std::size_t m = 1; m < n; ++m) {
      const double s = (-half + static_cast<double>(m) * h - o[a]) / d[a];
      if (s > s_min && s < s_max) crossings.push_back(s);
    }
  }
  std::sort(crossings.begin(), crossings.end());

  const double min_len = 1e-14 * h;
  std::array<std::size_t, D> cell{};
  for (std::size_t q = 0; q + 1 < crossings.size(); ++q) {
    const double len = crossings[q + 1] - crossings[q];
    if (len <= min_len) continue;
    const double mid = 0.5 * (crossings[q] + crossings[q + 1]);
    for (int a = 0; a < D; ++a) {
      const double pos = (o[a] + mid * d[a] + half) / h;
      const auto c = static_cast<long>(std::floor(pos));
      cell[a] = static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(n) - 1));
    }
    emit(cell, len);
  }
}

double detector_offset(std::size_t r, std::size_t count, double spacing) {
  return (static_cast<double>(r) - 0.5 * (static_cast<double>(count) - 1.0)) * spacing;
}

}  // namespace

ProjectionGeometry ProjectionGeometry::parallel_2d(std::vector<double> angles_deg) {
  ProjectionGeometry g;
  g.mode = GeometryMode::parallel_2d;
  g.angles = std::move(angles_deg);
  return g;
}

ProjectionGeometry ProjectionGeometry::parallel_3d(std::vector<Eigen::Vector3d> unit_directions) {
  ProjectionGeometry g;
  g.mode = GeometryMode::parallel_3d;
  g.directions = std::move(unit_directions);
  return g;
}

std::size_t ProjectionGeometry::n_views() const {
  return mode == GeometryMode::parallel_2d ? angles.size() : directions.size();
}

std::size_t ProjectionGeometry::block_rows(std::size_t n) const {
  const std::size_t r = rays_per_view == 0 ? n : rays_per_view;
  return mode == GeometryMode::parallel_2d ? r : r * r;
}

void ProjectionGeometry::validate() const {
  require(n_views() > 0, "projection geometry has no views");
  require(pixel_size > 0.0, "pixel size must be positive");
  require(detector_spacing >= 0.0, "detector spacing must be non-negative");
  if (mode == GeometryMode::parallel_2d) {
    for (double t : angles) {
      require(std::isfinite(t) && t > -90.0 && t <= 90.0,
              "2D projection angles must lie in (-90, 90] degrees");
    }
  } else {
    for (const Eigen::Vector3d& d : directions) {
      require(std::abs(d.norm() - 1.0) <= 1e-12, "3D projection directions must be unit vectors");
    }
  }
}

std::vector<double> angle_range(double first, double step, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t j = 0; j < count; ++j) out[j] = first + static_cast<double>(j) * step;
  return out;
}

std::vector<Eigen::Vector3d> random_directions(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  while (out.size() < count) {
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const double len = v.norm();
    if (len < 1e-8) continue;
    out.push_back(v / len);
  }
  return out;
}

std::unique_ptr<SparseBlockOperator> build_projector(const ProjectionGeometry& geom, std::size_t n) {
  geom.validate();
  require(n >= 1, "grid size must be positive");
  const double h = geom.pixel_size;
  const double spacing = geom.detector_spacing > 0.0 ? geom.detector_spacing : h;
  const std::size_t rays = geom.rays_per_view == 0 ? n : geom.rays_per_view;
  const std::size_t rows_per_view = geom.block_rows(n);
  const std::size_t n_rows = rows_per_view * geom.n_views();

  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> crossings;

  if (geom.mode == GeometryMode::parallel_2d) {
    entries.reserve(n_rows * 2 * n);
    for (std::size_t v = 0; v < geom.n_views(); ++v) {
      const double t = geom.angles[v] * std::numbers::pi / 180.0;
      const std::array<double, 2> u{std::cos(t), std::sin(t)};
      const std::array<double, 2> d{-u[1], u[0]};
      for (std::size_t r = 0; r < rays; ++r) {
        const double off = detector_offset(r, rays, spacing);
        const auto row = static_cast<int>(v * rows_per_view + r);
        trace_ray<2>({off * u[0], off * u[1]}, d, n, h, crossings,
                     [&](const std::array<std::size_t, 2>& c, double len) {
                       // axis 0 is x (column), axis 1 is y measured upward.
                       const std::size_t i = n - 1 - c[1];
                       entries.emplace_back(row, static_cast<int>(i * n + c[0]), len);
                     });
      }
    }
  } else {
    if (n > kMax3dGrid) {
      throw ScaleGuard("3D projector is limited to n <= " + std::to_string(kMax3dGrid));
    }
    entries.reserve(n_rows * 3 * n);
    for (std::size_t v = 0; v < geom.n_views(); ++v) {
      const Eigen::Vector3d& d = geom.directions[v];
      const Eigen::Vector3d helper =
          std::abs(d.z()) > 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitZ();
      const Eigen::Vector3d e1 = d.cross(helper).normalized();
      const Eigen::Vector3d e2 = d.cross(e1);
      for (std::size_t r2 = 0; r2 < rays; ++r2) {
        for (std::size_t r1 = 0; r1 < rays; ++r1) {
          const Eigen::Vector3d o = detector_offset(r1, rays, spacing) * e1 +
                                    detector_offset(r2, rays, spacing) * e2;
          const auto row = static_cast<int>(v * rows_per_view + r2 * rays + r1);
          trace_ray<3>({o.x(), o.y(), o.z()}, {d.x(), d.y(), d.z()}, n, h, crossings,
                       [&](const std::array<std::size_t, 3>& c, double len) {
                         const std::size_t i = n - 1 - c[1];
                         entries.emplace_back(row, static_cast<int>((c[2] * n + i) * n + c[0]),
                                              len);
                       });
        }
      }
    }
  }

  const std::size_t n_cols = geom.mode == GeometryMode::parallel_2d ? n * n : n * n * n;
  SparseMatrix a(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return std::make_unique<SparseBlockOperator>(std::move(a), Vector::Zero(static_cast<Eigen::Index>(n_rows)),
                                               rows_per_view);
}

}  // namespace slim
