#pragma once

#include <filesystem>

#include "spheremap/raster.hpp"

namespace spheremap {

/// SMR1: "SMR1", u32 H, u32 W, u32 C, C x (u8 length + ASCII name), then
/// H*W*C float32, row-major, channel-interleaved. Little endian.
void write_smr1(const std::filesystem::path& path, const RasterGrid& grid);
RasterGrid read_smr1(const std::filesystem::path& path);

/// 8-bit grayscale PNG of one channel, linearly min-max scaled.
void write_channel_png(const std::filesystem::path& path, const RasterGrid& grid, int channel);

}  // namespace spheremap
