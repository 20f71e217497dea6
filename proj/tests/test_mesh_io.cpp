#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "spheremap/errors.hpp"
#include "spheremap/mesh_io.hpp"
#include "test_support.hpp"

using namespace spheremap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spheremap_mesh_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("ascii PLY with normals, extra properties and a quad") {
  const fs::path p = scratch("quad.ply");
  write_text(p,
             "ply\nformat ascii 1.0\ncomment test\n"
             "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
             "property float nx\nproperty float ny\nproperty float nz\nproperty uchar red\n"
             "element face 1\nproperty list uchar int vertex_indices\n"
             "element edge 0\nproperty int vertex1\n"
             "end_header\n"
             "0 0 0 0 0 1 255\n1 0 0 0 0 1 0\n1 1 0 0 0 1 0\n0 1 0 0 0 1 0\n"
             "4 0 1 2 3\n");
  const Mesh m = read_mesh(p);
  CHECK(m.vertices.size() == 4);
  CHECK(m.normals.size() == 4);
  CHECK(m.faces.size() == 2);
  CHECK(m.vertices[2] == Point3{1, 1, 0});
  const PointCloud c = mesh_to_cloud(m);
  CHECK(c.samples[3].normal == Point3{0, 0, 1});
}

TEST_CASE("OBJ with negative indices and slash syntax") {
  const fs::path p = scratch("tri.OBJ");
  write_text(p, "# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3//1 -2//1 -1//1\nusemtl x\n");
  const Mesh m = read_mesh(p);
  REQUIRE(m.faces.size() == 1);
  CHECK(m.faces[0] == Face{0, 1, 2});
  const PointCloud c = mesh_to_cloud(m);
  CHECK(std::abs(std::abs(c.samples[0].normal.z) - 1.0) < 1e-12);
}

TEST_CASE("binary PLY round trip through write_ply") {
  const PointCloud cloud = testing::unit_sphere_cloud(500, 9);
  for (auto enc : {PlyEncoding::binary_little_endian, PlyEncoding::ascii}) {
    const fs::path p = scratch(enc == PlyEncoding::ascii ? "rt_a.ply" : "rt_b.ply");
    write_ply(p, cloud, enc);
    const PointCloud back = mesh_to_cloud(read_mesh(p));
    REQUIRE(back.size() == cloud.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      worst = std::max(worst, (back.samples[i].position - cloud.samples[i].position).norm());
      worst = std::max(worst, (back.samples[i].normal - cloud.samples[i].normal).norm());
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("malformed meshes are rejected") {
  const fs::path bad_index = scratch("bad_index.obj");
  write_text(bad_index, "v 0 0 0\nv 1 0 0\nf 1 2 7\n");
  CHECK_THROWS_AS(read_mesh(bad_index), ParseError);

  const fs::path truncated = scratch("trunc.ply");
  write_text(truncated,
             "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n0 0 0\n1 0 0\n");
  CHECK_THROWS_AS(read_mesh(truncated), ParseError);

  const fs::path not_ply = scratch("junk.ply");
  write_text(not_ply, "hello\n");
  CHECK_THROWS_AS(read_mesh(not_ply), ParseError);

  CHECK_THROWS_AS(read_mesh(scratch("missing.ply")), IoError);
  CHECK_THROWS(read_mesh(scratch("shape.stl")));
}
