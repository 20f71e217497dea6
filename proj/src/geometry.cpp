#include "spheremap/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

Point3 PointCloud::centroid() const {
  if (samples.empty()) throw EmptyInput("centroid of an empty point cloud");
  // Two-pass mean keeps the residual of center_to_origin at rounding level.
  Point3 sum;
  for (const auto& s : samples) sum += s.position;
  Point3 mean = sum / static_cast<double>(samples.size());
  Point3 corr;
  for (const auto& s : samples) corr += s.position - mean;
  return mean + corr / static_cast<double>(samples.size());
}

double PointCloud::bbox_diagonal() const {
  if (samples.empty()) return 0.0;
  Point3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  Point3 hi = lo * -1.0;
  for (const auto& s : samples) {
    lo = {std::min(lo.x, s.position.x), std::min(lo.y, s.position.y), std::min(lo.z, s.position.z)};
    hi = {std::max(hi.x, s.position.x), std::max(hi.y, s.position.y), std::max(hi.z, s.position.z)};
  }
  return (hi - lo).norm();
}

PointCloud center_to_origin(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyInput("center_to_origin: empty point cloud");
  const Point3 c = cloud.centroid();
  PointCloud out = cloud;
  for (auto& s : out.samples) s.position = s.position - c;
  return out;
}

SphericalPoint cartesian_to_spherical(const Point3& p) {
  const double rxy = std::hypot(p.x, p.y);
  const double rho = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  if (rho == 0.0) return {};
  // atan2 of a non-negative first argument lies in [0, pi].
  const double theta = std::atan2(rxy, p.z) / kDeg;
  const double phi = rxy == 0.0 ? 0.0 : std::atan2(p.y, p.x) / kDeg;
  return {rho, theta, phi};
}

Point3 spherical_to_cartesian(const SphericalPoint& s) {
  const double t = s.theta * kDeg;
  const double f = s.phi * kDeg;
  const double st = std::sin(t);
  return {s.rho * st * std::cos(f), s.rho * st * std::sin(f), s.rho * std::cos(t)};
}

Point3 rotate_point_about_x(const Point3& p, double angle_deg) {
  const double a = angle_deg * kDeg;
  const double c = std::cos(a), s = std::sin(a);
  return {p.x, c * p.y - s * p.z, s * p.y + c * p.z};
}

Point3 rotate_point_about_z(const Point3& p, double angle_deg) {
  const double a = angle_deg * kDeg;
  const double c = std::cos(a), s = std::sin(a);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

PointCloud rotate_about_x(const PointCloud& cloud, double angle_deg) {
  PointCloud out = cloud;
  for (auto& s : out.samples) {
    s.position = rotate_point_about_x(s.position, angle_deg);
    s.normal = rotate_point_about_x(s.normal, angle_deg);
  }
  return out;
}

PointCloud rotate_about_z(const PointCloud& cloud, double angle_deg) {
  PointCloud out = cloud;
  for (auto& s : out.samples) {
    s.position = rotate_point_about_z(s.position, angle_deg);
    s.normal = rotate_point_about_z(s.normal, angle_deg);
  }
  return out;
}

NormalEstimate estimate_normals_from_mesh(std::span<const Point3> vertices,
                                          std::span<const Face> faces) {
  if (vertices.empty()) throw EmptyInput("estimate_normals_from_mesh: no vertices");
  const auto nv = static_cast<int>(vertices.size());
  std::vector<Point3> acc(vertices.size());
  NormalEstimate result;
  for (const Face& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= nv) {
        throw ShapeError("face references vertex " + std::to_string(idx) + " of " +
                         std::to_string(nv));
      }
    }
    const Point3& a = vertices[f[0]];
    const Point3& b = vertices[f[1]];
    const Point3& c = vertices[f[2]];
    // Cross product length is twice the face area, so summing it weights by area.
    const Point3 n = (b - a).cross(c - a);
    if (n.norm() <= 0.0) {
      ++result.degenerate_faces;
      continue;
    }
    for (int idx : f) acc[idx] += n;
  }

  Point3 centre;
  for (const auto& v : vertices) centre += v;
  centre = centre / static_cast<double>(vertices.size());

  result.cloud.samples.reserve(vertices.size());
  long long outward = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Point3 n = acc[i].normalized();
    const double d = n.dot(vertices[i] - centre);
    if (d > 0.0) ++outward;
    if (d < 0.0) --outward;
    result.cloud.samples.push_back({vertices[i], n});
  }
  if (outward < 0) {
    result.flipped = true;
    for (auto& s : result.cloud.samples) s.normal = s.normal * -1.0;
  }
  return result;
}

}  // namespace spheremap
