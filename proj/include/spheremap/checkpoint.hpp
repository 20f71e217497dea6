#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spheremap {

/// One named float32 array of an SMW1 weight file.
struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const NamedArray&) const = default;
};

/// SMW1: "SMW1", u32 count, then per entry: u8 name length, name bytes,
/// u32 rank, rank x u32 dims, float32 data. All little endian.
void write_smw1(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_smw1(const std::filesystem::path& path);

}  // namespace spheremap
