#include "spheremap/raster.hpp"

#include <algorithm>

#include "spheremap/errors.hpp"

namespace spheremap {

RasterGrid::RasterGrid(int height, int width, std::vector<std::string> channel_names, float fill)
    : height_(height), width_(width), names_(std::move(channel_names)) {
  if (height <= 0 || width <= 0 || names_.empty()) {
    throw ShapeError("raster needs positive height, width and at least one channel");
  }
  values_.assign(static_cast<std::size_t>(height) * width * names_.size(), fill);
}

int RasterGrid::channel_index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw ShapeError("raster has no channel '" + std::string(name) + "'");
}

bool RasterGrid::has_channel(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::vector<float> RasterGrid::channel(int ch) const {
  std::vector<float> plane(static_cast<std::size_t>(height_) * width_);
  for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = values_[i * names_.size() + ch];
  return plane;
}

void RasterGrid::set_channel(int ch, std::span<const float> plane) {
  if (plane.size() != static_cast<std::size_t>(height_) * width_) {
    throw ShapeError("set_channel: plane size does not match raster");
  }
  for (std::size_t i = 0; i < plane.size(); ++i) values_[i * names_.size() + ch] = plane[i];
}

}  // namespace spheremap
