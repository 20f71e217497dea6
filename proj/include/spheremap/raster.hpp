#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spheremap {

/// H x W multi-channel float image, row-major with interleaved channels.
class RasterGrid {
 public:
  RasterGrid() = default;
  RasterGrid(int height, int width, std::vector<std::string> channel_names, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& channel_names() const { return names_; }

  /// Index of a named channel; throws ShapeError when absent.
  int channel_index(std::string_view name) const;
  bool has_channel(std::string_view name) const;

  float& at(int row, int col, int ch) { return values_[index(row, col, ch)]; }
  float at(int row, int col, int ch) const { return values_[index(row, col, ch)]; }

  std::span<float> data() { return values_; }
  std::span<const float> data() const { return values_; }

  /// One channel as a dense H x W plane.
  std::vector<float> channel(int ch) const;
  void set_channel(int ch, std::span<const float> plane);

  /// First row of this grid within the full projection it was cropped from.
  int row_offset = 0;

  bool operator==(const RasterGrid& o) const {
    return height_ == o.height_ && width_ == o.width_ && names_ == o.names_ && values_ == o.values_;
  }

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * names_.size() + ch;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::string> names_;
  std::vector<float> values_;
};

}  // namespace spheremap
