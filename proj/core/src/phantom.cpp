#include "slim/tomo.hpp"

#include <cmath>
#include <numbers>

namespace slim {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void check_grid(std::size_t n) { require(n >= 8, "phantom grid needs n >= 8"); }

}  // namespace

const std::vector<Ellipse>& shepp_logan_2d_table() {
  static const std::vector<Ellipse> table = {
      {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
      {0.22, 0.0, 0.11, 0.31, -18.0, -0.02},
      {-0.22, 0.0, 0.16, 0.41, 18.0, -0.02},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
      {0.0, -0.605, 0.023, 0.023, 0.0, 0.01},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
  };
  return table;
}

const std::vector<Ellipsoid>& shepp_logan_3d_table() {
  static const std::vector<Ellipsoid> table = {
      {0.0, 0.0, 0.0, 0.69, 0.92, 0.81, 0.0, 0.0, 0.0, 1.0},
      {0.0, -0.0184, 0.0, 0.6624, 0.874, 0.78, 0.0, 0.0, 0.0, -0.8},
      {0.22, 0.0, 0.0, 0.11, 0.31, 0.22, -18.0, 0.0, 10.0, -0.2},
      {-0.22, 0.0, 0.0, 0.16, 0.41, 0.28, 18.0, 0.0, 10.0, -0.2},
      {0.0, 0.35, -0.15, 0.21, 0.25, 0.41, 0.0, 0.0, 0.0, 0.1},
      {0.0, 0.1, 0.25, 0.046, 0.046, 0.05, 0.0, 0.0, 0.0, 0.1},
      {0.0, -0.1, 0.25, 0.046, 0.046, 0.05, 0.0, 0.0, 0.0, 0.1},
      {-0.08, -0.605, 0.0, 0.046, 0.023, 0.05, 0.0, 0.0, 0.0, 0.1},
      {0.0, -0.605, 0.0, 0.023, 0.023, 0.02, 0.0, 0.0, 0.0, 0.1},
      {0.06, -0.605, 0.0, 0.023, 0.046, 0.02, 0.0, 0.0, 0.0, 0.1},
  };
  return table;
}

Phantom render_ellipses(const std::vector<Ellipse>& table, std::size_t n) {
  check_grid(n);
  Phantom p{2, n, Vector::Zero(static_cast<Eigen::Index>(n * n))};
  for (const Ellipse& e : table) {
    const double c = std::cos(e.phi * kDeg);
    const double s = std::sin(e.phi * kDeg);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = -grid_coordinate(i, n) - e.y0;
      for (std::size_t j = 0; j < n; ++j) {
        const double x = grid_coordinate(j, n) - e.x0;
        const double u = (x * c + y * s) / e.a;
        const double v = (-x * s + y * c) / e.b;
        if (u * u + v * v <= 1.0) p.voxels(static_cast<Eigen::Index>(i * n + j)) += e.intensity;
      }
    }
  }
  p.voxels = p.voxels.cwiseMax(0.0);
  return p;
}

Phantom render_ellipsoids(const std::vector<Ellipsoid>& table, std::size_t n) {
  check_grid(n);
  Phantom p{3, n, Vector::Zero(static_cast<Eigen::Index>(n * n * n))};
  for (const Ellipsoid& e : table) {
    const double cphi = std::cos(e.phi * kDeg), sphi = std::sin(e.phi * kDeg);
    const double cth = std::cos(e.theta * kDeg), sth = std::sin(e.theta * kDeg);
    const double cpsi = std::cos(e.psi * kDeg), spsi = std::sin(e.psi * kDeg);
    Eigen::Matrix3d rot;
    rot << cpsi * cphi - cth * sphi * spsi, cpsi * sphi + cth * cphi * spsi, spsi * sth,
        -spsi * cphi - cth * sphi * cpsi, -spsi * sphi + cth * cphi * cpsi, cpsi * sth,
        sth * sphi, -sth * cphi, cth;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const Eigen::Vector3d q =
              rot * Eigen::Vector3d(grid_coordinate(j, n), -grid_coordinate(i, n),
                                    grid_coordinate(k, n));
          const double u = (q.x() - e.x0) / e.a;
          const double v = (q.y() - e.y0) / e.b;
          const double w = (q.z() - e.z0) / e.c;
          if (u * u + v * v + w * w <= 1.0) {
            p.voxels(static_cast<Eigen::Index>((k * n + i) * n + j)) += e.intensity;
          }
        }
      }
    }
  }
  p.voxels = p.voxels.cwiseMax(0.0);
  return p;
}

Phantom shepp_logan(std::size_t dims, std::size_t n) {
  require(dims == 2 || dims == 3, "phantom dimension must be 2 or 3");
  return dims == 2 ? render_ellipses(shepp_logan_2d_table(), n)
                   : render_ellipsoids(shepp_logan_3d_table(), n);
}

Phantom disk_phantom(std::size_t n, double radius, double intensity) {
  require(radius > 0.0, "disk radius must be positive");
  return render_ellipses({{0.0, 0.0, radius, radius, 0.0, intensity}}, n);
}

}  // namespace slim
