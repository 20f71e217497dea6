#include "spheremap/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>

#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

static_assert(std::endian::native == std::endian::little, "SMR1 I/O assumes little endian");

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw ParseError(path.string() + ": truncated SMR1 header");
  return v;
}

}  // namespace

void write_smr1(const std::filesystem::path& path, const RasterGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("SMR1", 4);
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  put_u32(out, static_cast<std::uint32_t>(grid.channels()));
  for (const auto& name : grid.channel_names()) {
    if (name.size() > 255) throw IoError("channel name too long: " + name);
    out.put(static_cast<char>(static_cast<unsigned char>(name.size())));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  out.write(reinterpret_cast<const char*>(grid.data().data()),
            static_cast<std::streamsize>(grid.data().size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path.string());
}

RasterGrid read_smr1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "SMR1") {
    throw ParseError(path.string() + ": not an SMR1 raster");
  }
  const auto h = get_u32(in, path);
  const auto w = get_u32(in, path);
  const auto c = get_u32(in, path);
  if (h == 0 || w == 0 || c == 0 || h > 1u << 16 || w > 1u << 16 || c > 256) {
    throw ParseError(path.string() + ": implausible SMR1 dimensions");
  }
  std::vector<std::string> names(c);
  for (auto& n : names) {
    const int len = in.get();
    if (len == std::char_traits<char>::eof()) throw ParseError(path.string() + ": truncated channel names");
    n.resize(static_cast<std::size_t>(len));
    in.read(n.data(), len);
  }
  RasterGrid grid(static_cast<int>(h), static_cast<int>(w), std::move(names));
  if (!in.read(reinterpret_cast<char*>(grid.data().data()),
               static_cast<std::streamsize>(grid.data().size() * sizeof(float)))) {
    throw ParseError(path.string() + ": truncated SMR1 payload");
  }
  return grid;
}

void write_channel_png(const std::filesystem::path& path, const RasterGrid& grid, int channel) {
  const auto plane = grid.channel(channel);
  const auto [lo_it, hi_it] = std::minmax_element(plane.begin(), plane.end());
  const float lo = *lo_it, hi = *hi_it;
  const float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(grid.width()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(grid.width()), static_cast<png_uint_32>(grid.height()),
               8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < grid.width(); ++c) {
      const float v = (plane[static_cast<std::size_t>(r) * grid.width() + c] - lo) * scale;
      row[c] = static_cast<png_byte>(std::clamp(v + 0.5f, 0.0f, 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace spheremap
