#include "spheremap/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY support assumes little endian");

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

ScalarType scalar_type(const std::string& name, const std::filesystem::path& path, std::size_t line) {
  static const std::map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::i8},     {"int8", ScalarType::i8},     {"uchar", ScalarType::u8},
      {"uint8", ScalarType::u8},    {"short", ScalarType::i16},   {"int16", ScalarType::i16},
      {"ushort", ScalarType::u16},  {"uint16", ScalarType::u16},  {"int", ScalarType::i32},
      {"int32", ScalarType::i32},   {"uint", ScalarType::u32},    {"uint32", ScalarType::u32},
      {"float", ScalarType::f32},   {"float32", ScalarType::f32}, {"double", ScalarType::f64},
      {"float64", ScalarType::f64}};
  auto it = kTypes.find(name);
  if (it == kTypes.end()) parse_fail(path, line, "unknown PLY scalar type '" + name + "'");
  return it->second;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
  }
  return 0;
}

double read_binary(std::istream& in, ScalarType t) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(type_size(t)));
  switch (t) {
    case ScalarType::i8: return static_cast<std::int8_t>(buf[0]);
    case ScalarType::u8: return buf[0];
    case ScalarType::i16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    case ScalarType::u16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    case ScalarType::i32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::u32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::f32: { float v; std::memcpy(&v, buf, 4); return v; }
    case ScalarType::f64: { double v; std::memcpy(&v, buf, 8); return v; }
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::f32;
  bool is_list = false;
  ScalarType count_type = ScalarType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

void add_polygon(Mesh& mesh, const std::vector<int>& poly) {
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
  }
}

}  // namespace

Mesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") parse_fail(path, lineno, "missing 'ply' magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (next_line()) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        parse_fail(path, lineno, "unsupported PLY format '" + fmt + "'");
      }
    } else if (kw == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) parse_fail(path, lineno, "malformed element line");
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) parse_fail(path, lineno, "property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = scalar_type(ct, path, lineno);
        p.type = scalar_type(it, path, lineno);
      } else {
        p.type = scalar_type(t, path, lineno);
        ls >> p.name;
      }
      if (!ls) parse_fail(path, lineno, "malformed property line");
      elements.back().properties.push_back(p);
    } else if (kw == "end_header") {
      header_done = true;
      break;
    } else if (kw == "comment" || kw == "obj_info" || kw.empty()) {
      continue;
    } else {
      parse_fail(path, lineno, "unexpected header keyword '" + kw + "'");
    }
  }
  if (!header_done) parse_fail(path, lineno, "missing end_header");

  Mesh mesh;
  for (const PlyElement& e : elements) {
    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, iface = -1;
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const std::string& n = e.properties[k].name;
      const int kk = static_cast<int>(k);
      if (n == "x") ix = kk;
      if (n == "y") iy = kk;
      if (n == "z") iz = kk;
      if (n == "nx") inx = kk;
      if (n == "ny") iny = kk;
      if (n == "nz") inz = kk;
      if ((n == "vertex_indices" || n == "vertex_index") && e.properties[k].is_list) iface = kk;
    }
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      parse_fail(path, lineno, "vertex element lacks x/y/z");
    }
    const bool has_normals = is_vertex && inx >= 0 && iny >= 0 && inz >= 0;

    std::vector<double> scalars(e.properties.size());
    std::vector<int> poly;
    for (std::size_t row = 0; row < e.count; ++row) {
      poly.clear();
      if (binary) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const PlyProperty& p = e.properties[k];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_binary(in, p.count_type));
            for (std::size_t j = 0; j < n; ++j) {
              const double v = read_binary(in, p.type);
              if (static_cast<int>(k) == iface) poly.push_back(static_cast<int>(v));
            }
          } else {
            scalars[k] = read_binary(in, p.type);
          }
        }
        if (!in) parse_fail(path, lineno, "unexpected end of binary data in element '" + e.name + "'");
      } else {
        if (!next_line()) parse_fail(path, lineno, "unexpected end of file in element '" + e.name + "'");
        std::istringstream ls(line);
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const PlyProperty& p = e.properties[k];
          if (p.is_list) {
            std::size_t n = 0;
            ls >> n;
            for (std::size_t j = 0; j < n; ++j) {
              double v = 0;
              ls >> v;
              if (static_cast<int>(k) == iface) poly.push_back(static_cast<int>(v));
            }
          } else {
            ls >> scalars[k];
          }
          if (!ls) parse_fail(path, lineno, "malformed '" + e.name + "' record");
        }
      }
      if (is_vertex) {
        mesh.vertices.push_back({scalars[ix], scalars[iy], scalars[iz]});
        if (has_normals) mesh.normals.push_back({scalars[inx], scalars[iny], scalars[inz]});
      } else if (is_face && iface >= 0) {
        if (poly.size() < 3) parse_fail(path, lineno, "face with fewer than 3 vertices");
        add_polygon(mesh, poly);
      }
    }
  }
  return mesh;
}

Mesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mesh mesh;
  std::vector<Point3> vn;
  std::vector<Point3> normal_acc;
  std::vector<int> normal_hits;
  std::string line;
  std::size_t lineno = 0;
  std::vector<int> poly;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "v") {
      Point3 p;
      ls >> p.x >> p.y >> p.z;
      if (!ls) parse_fail(path, lineno, "malformed vertex");
      mesh.vertices.push_back(p);
    } else if (kw == "vn") {
      Point3 n;
      ls >> n.x >> n.y >> n.z;
      if (!ls) parse_fail(path, lineno, "malformed normal");
      vn.push_back(n);
    } else if (kw == "f") {
      poly.clear();
      std::string tok;
      normal_acc.resize(mesh.vertices.size());
      normal_hits.resize(mesh.vertices.size());
      while (ls >> tok) {
        const auto s1 = tok.find('/');
        const int nvert = static_cast<int>(mesh.vertices.size());
        int vi = 0;
        try {
          vi = std::stoi(tok.substr(0, s1));
        } catch (...) {
          parse_fail(path, lineno, "bad face token '" + tok + "'");
        }
        vi = vi < 0 ? nvert + vi : vi - 1;
        if (vi < 0 || vi >= nvert) parse_fail(path, lineno, "face index out of range");
        poly.push_back(vi);
        if (s1 != std::string::npos) {
          const auto s2 = tok.find('/', s1 + 1);
          if (s2 != std::string::npos && s2 + 1 < tok.size()) {
            int ni = std::stoi(tok.substr(s2 + 1));
            ni = ni < 0 ? static_cast<int>(vn.size()) + ni : ni - 1;
            if (ni < 0 || ni >= static_cast<int>(vn.size())) {
              parse_fail(path, lineno, "normal index out of range");
            }
            normal_acc[vi] += vn[ni];
            ++normal_hits[vi];
          }
        }
      }
      if (poly.size() < 3) parse_fail(path, lineno, "face with fewer than 3 vertices");
      add_polygon(mesh, poly);
    }
  }
  normal_hits.resize(mesh.vertices.size());
  normal_acc.resize(mesh.vertices.size());
  const bool all_have_normals =
      !mesh.vertices.empty() &&
      std::all_of(normal_hits.begin(), normal_hits.end(), [](int h) { return h > 0; });
  if (all_have_normals) {
    mesh.normals = normal_acc;
  } else if (vn.size() == mesh.vertices.size() && mesh.faces.empty()) {
    mesh.normals = vn;  // point-cloud style OBJ: one vn per v
  }
  return mesh;
}

Mesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  throw ParseError(path.string() + ": unsupported mesh extension '" + ext + "'");
}

PointCloud mesh_to_cloud(const Mesh& mesh) {
  if (mesh.vertices.empty()) throw EmptyInput("mesh has no vertices");
  if (mesh.normals.size() == mesh.vertices.size()) {
    PointCloud cloud;
    cloud.samples.reserve(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      cloud.samples.push_back({mesh.vertices[i], mesh.normals[i].normalized()});
    }
    return cloud;
  }
  return estimate_normals_from_mesh(mesh.vertices, mesh.faces).cloud;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const bool binary = encoding == PlyEncoding::binary_little_endian;
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "end_header\n";
  if (binary) {
    std::vector<float> buf;
    buf.reserve(cloud.size() * 6);
    for (const auto& s : cloud.samples) {
      for (double v : {s.position.x, s.position.y, s.position.z, s.normal.x, s.normal.y, s.normal.z}) {
        buf.push_back(static_cast<float>(v));
      }
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    out.precision(9);
    for (const auto& s : cloud.samples) {
      out << s.position.x << ' ' << s.position.y << ' ' << s.position.z << ' ' << s.normal.x << ' '
          << s.normal.y << ' ' << s.normal.z << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace spheremap
