#pragma once

#include <filesystem>
#include <vector>

#include "spheremap/geometry.hpp"

namespace spheremap {

struct Mesh {
  std::vector<Point3> vertices;
  std::vector<Point3> normals;  // empty, or one per vertex
  std::vector<Face> faces;      // polygons are fan-triangulated on load
};

enum class PlyEncoding { ascii, binary_little_endian };

/// PLY reader for vertex{x,y,z[,nx,ny,nz]} and face{vertex_indices}; other
/// elements and properties are skipped. Accepts ascii and binary_little_endian.
Mesh read_ply(const std::filesystem::path& path);

/// OBJ reader for v / vn / f records; everything else is ignored.
Mesh read_obj(const std::filesystem::path& path);

/// Dispatch on extension (.ply / .obj, case-insensitive).
Mesh read_mesh(const std::filesystem::path& path);

/// Surface samples from a mesh: stored normals when present, otherwise
/// estimated from faces. Normals are renormalized.
PointCloud mesh_to_cloud(const Mesh& mesh);

/// Point cloud with normals as a face-less PLY.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               PlyEncoding encoding = PlyEncoding::binary_little_endian);

}  // namespace spheremap
