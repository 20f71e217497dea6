#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spheremap/raster.hpp"
#include "spheremap/targetmaps.hpp"

namespace spheremap {

struct BinaryMap {
  int height = 0;
  int width = 0;
  double threshold = 0.0;
  std::vector<std::uint8_t> cells;  // row-major, 1 = true

  bool at(int r, int c) const { return cells[static_cast<std::size_t>(r) * width + c] != 0; }
  std::size_t true_count() const;
};

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

struct Cluster {
  std::vector<Pixel> pixels;  // raster order
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  std::size_t size() const { return pixels.size(); }
};

struct CountResult {
  double count = 0.0;
  std::vector<Keypoint> centers;
  std::string method;
  double p_t = 0.0;
  std::size_t clamped_pixels = 0;  // density method: negative pixels set to zero
};

/// cell = value > p_t (strict).
BinaryMap binarize(const TargetMap& map, double p_t);

/// Maximal connected true regions, ordered by their first pixel in raster
/// order. `connectivity` is 4 or 8; wrap joins the first and last columns.
/// Column centroids are averaged after unwrapping around the seam.
std::vector<Cluster> connected_components(const BinaryMap& bin, int connectivity = 8,
                                          bool wrap_azimuth = true);

CountResult count_from_gaussian(const TargetMap& map, double p_t, std::size_t min_cluster_size = 1,
                                bool wrap_azimuth = true);

/// Integral of the map with negative pixels clamped to zero.
CountResult count_from_density(const TargetMap& map);

/// Area of intersection over union of two circles of equal diameter.
double circle_iou(double center_distance, double diameter);

/// Local maxima of the box-smoothed rho channel, greedily suppressed by
/// circle overlap (diameter beta, IoU > 0.5).
CountResult nms_baseline(const RasterGrid& grid, double beta, bool wrap_azimuth = true);

/// One 3x3 box pass; edge rows average over the rows that exist.
std::vector<float> box_smooth3(const std::vector<float>& plane, int height, int width, bool wrap);

void write_count_result(const std::filesystem::path& path, const CountResult& result);
CountResult read_count_result(const std::filesystem::path& path);

}  // namespace spheremap
