#include "spheremap/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <numeric>

#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

static_assert(std::endian::native == std::endian::little, "SMW1 I/O assumes little endian");

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw ParseError(path.string() + ": truncated SMW1 file");
  return v;
}

}  // namespace

void write_smw1(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("SMW1", 4);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (a.name.size() > 255) throw IoError("SMW1 entry name too long: " + a.name);
    const std::size_t n = std::accumulate(a.dims.begin(), a.dims.end(), std::size_t{1},
                                          [](std::size_t x, std::uint32_t d) { return x * d; });
    if (n != a.data.size()) throw ShapeError("SMW1 entry '" + a.name + "' dims do not match data");
    const auto len = static_cast<unsigned char>(a.name.size());
    out.put(static_cast<char>(len));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put_u32(out, d);
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<NamedArray> read_smw1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "SMW1") {
    throw ParseError(path.string() + ": not an SMW1 file");
  }
  const std::uint32_t count = get_u32(in, path);
  std::vector<NamedArray> arrays(count);
  for (auto& a : arrays) {
    const int len = in.get();
    if (len == std::char_traits<char>::eof()) throw ParseError(path.string() + ": truncated SMW1 file");
    a.name.resize(static_cast<std::size_t>(len));
    in.read(a.name.data(), len);
    const std::uint32_t rank = get_u32(in, path);
    a.dims.resize(rank);
    std::size_t n = 1;
    for (auto& d : a.dims) {
      d = get_u32(in, path);
      n *= d;
    }
    a.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
      throw ParseError(path.string() + ": truncated data for '" + a.name + "'");
    }
  }
  return arrays;
}

}  // namespace spheremap
