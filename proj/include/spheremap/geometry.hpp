#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace spheremap {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Point3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Point3&) const = default;

  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  Point3 cross(const Point3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Point3 normalized() const {
    const double n = norm();
    return n > 0.0 ? *this / n : Point3{};
  }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct SurfaceSample {
  Point3 position;
  Point3 normal;  // unit length
};

struct PointCloud {
  std::vector<SurfaceSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Point3 centroid() const;
  double bbox_diagonal() const;
};

/// Spherical coordinates in degrees. theta is the inclination from +Z in
/// [0, 180]; phi is the azimuth from +X in [-180, 180].
struct SphericalPoint {
  double rho = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

/// Translate the cloud so its position centroid is the origin.
PointCloud center_to_origin(const PointCloud& cloud);

/// Quadrant-aware conversion; the origin maps to (0, 0, 0).
SphericalPoint cartesian_to_spherical(const Point3& p);

Point3 spherical_to_cartesian(const SphericalPoint& s);

/// Right-handed rotation of positions and normals, angle in degrees.
PointCloud rotate_about_x(const PointCloud& cloud, double angle_deg);
PointCloud rotate_about_z(const PointCloud& cloud, double angle_deg);

Point3 rotate_point_about_x(const Point3& p, double angle_deg);
Point3 rotate_point_about_z(const Point3& p, double angle_deg);

using Face = std::array<int, 3>;

struct NormalEstimate {
  PointCloud cloud;
  std::size_t degenerate_faces = 0;  // zero-area faces that were skipped
  bool flipped = false;              // orientation was reversed to point outward
};

/// Per-vertex normals from area-weighted incident face normals, oriented
/// outward by majority vote against the vertex centroid.
NormalEstimate estimate_normals_from_mesh(std::span<const Point3> vertices,
                                          std::span<const Face> faces);

}  // namespace spheremap
