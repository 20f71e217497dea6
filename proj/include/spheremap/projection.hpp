#pragma once

#include "spheremap/geometry.hpp"
#include "spheremap/raster.hpp"
#include "spheremap/tensor.hpp"

namespace spheremap {

struct ProjectionConfig {
  double delta = 1.0;   // angular increment in degrees
  double h_min = 0.235; // ROI top, fraction of height
  double h_max = 0.765; // ROI bottom, fraction of height
  bool wrap_azimuth = true;

  /// Throws ConfigError unless 180/delta and 360/delta are integers and the
  /// ROI fractions are ordered inside [0, 1].
  void validate() const;
  int height() const;
  int width() const;
  /// Rows [first, last) kept by crop_roi for a raster of `height` rows.
  std::pair<int, int> roi_rows(int height) const;
};

/// Channel layout of a projected raster.
namespace channel {
inline constexpr int nx = 0;
inline constexpr int ny = 1;
inline constexpr int nz = 2;
inline constexpr int rho = 3;
inline constexpr int occupancy = 4;
}  // namespace channel

/// Bin a centred cloud into a (180/delta) x (360/delta) raster. Cells hold
/// the mean of their samples' normals (renormalised) and radial distances.
RasterGrid project_equirectangular(const PointCloud& cloud, const ProjectionConfig& cfg);

/// Fill unoccupied cells with cubic Hermite (Catmull-Rom tangents)
/// interpolation along rows, wrapping across the seam when enabled, then
/// along columns. Occupied cells and the occupancy channel are untouched.
RasterGrid fill_holes_cubic(const RasterGrid& grid, bool wrap_azimuth = true);

/// Keep rows [floor(h_min * H), ceil(h_max * H)).
RasterGrid crop_roi(const RasterGrid& grid, const ProjectionConfig& cfg);

/// Cyclic shift of every channel along the width; column c moves to c + offset.
RasterGrid circular_shift(const RasterGrid& grid, int offset);

/// [1, 3, H, W] network input with normal components mapped to (v + 1) / 2.
Tensor<float> normalize_input_channels(const RasterGrid& grid);

/// Full pipeline used for network inputs: centre, project, fill, crop.
RasterGrid project_roi(const PointCloud& cloud, const ProjectionConfig& cfg);

}  // namespace spheremap
