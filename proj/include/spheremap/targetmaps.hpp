#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "spheremap/raster.hpp"

namespace spheremap {

struct Keypoint {
  double row = 0.0;
  double col = 0.0;
  bool operator==(const Keypoint&) const = default;
};

/// Feature centres in raster pixel coordinates.
struct KeypointSet {
  int height = 0;
  int width = 0;
  double delta = 1.0;
  int row_offset = 0;  // first row of the annotated raster within the full projection
  std::vector<Keypoint> points;

  /// Throws ShapeError when a point lies outside [0,H) x [0,W) or is not finite.
  void validate() const;
  std::size_t size() const { return points.size(); }
};

/// Annotation JSON: {"height", "width", "delta", "points": [[row, col], ...]}
/// plus an optional "row_offset".
KeypointSet read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const KeypointSet& kps);

/// Shift columns by `offset` modulo the width.
KeypointSet shift_keypoints(const KeypointSet& kps, int offset);

enum class SigmaMode { fixed, adaptive };

/// How overlapping kernels are merged before peak normalisation.
enum class KernelCombine { max, sum };

struct GaussianMapConfig {
  SigmaMode mode = SigmaMode::fixed;
  double sigma = 1.25;  // fixed mode, pixels
  double p_t = 0.33;
  double beta = 2.5;    // adaptive upper bound and isolated-point fallback, pixels
  bool wrap_azimuth = true;
  double truncation_radius = 4.0;  // in units of sigma
  KernelCombine combine = KernelCombine::max;

  void validate() const;
};

struct DensityMapConfig {
  int k_neighbors = 3;
  double f = 10.0;
  double truncation_radius = 4.0;
  double fallback_sigma = 2.5;  // used when a keypoint has no neighbour
  bool wrap_azimuth = true;

  void validate() const;
};

enum class MapKind { gaussian, density };

struct TargetMap {
  int height = 0;
  int width = 0;
  MapKind kind = MapKind::gaussian;
  std::vector<double> values;  // row-major H x W

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  double sum() const;
  double max() const;
  RasterGrid to_raster(const char* name = nullptr) const;
  static TargetMap from_raster(const RasterGrid& grid, MapKind kind, int channel = 0);
};

/// Wrap-aware Euclidean pixel distance.
double pixel_distance(const Keypoint& a, const Keypoint& b, int width, bool wrap);

/// For each keypoint, ascending distances to its k nearest other keypoints.
std::vector<std::vector<double>> nearest_neighbor_distances(const KeypointSet& kps, int k,
                                                            bool wrap_azimuth = true);

/// min(d_min * p_t, beta); beta when there is no neighbour.
double adaptive_sigma(std::optional<double> d_min, const GaussianMapConfig& cfg);

/// Per-keypoint sigma for the Gaussian map.
std::vector<double> gaussian_sigmas(const KeypointSet& kps, const GaussianMapConfig& cfg);

/// Peak-normalised likelihood map; all zeros without keypoints.
TargetMap gaussian_map(const KeypointSet& kps, const GaussianMapConfig& cfg);

/// Per-keypoint sigma for the density map: k * mean(available neighbour distances) / f.
std::vector<double> density_sigmas(const KeypointSet& kps, const DensityMapConfig& cfg);

/// Sum of unit-mass kernels; integrates to the keypoint count.
TargetMap density_map(const KeypointSet& kps, const DensityMapConfig& cfg);

/// Cyclic column shift of a target map.
TargetMap shift_map(const TargetMap& map, int offset);

namespace reference {
/// Keypoint-by-keypoint splat, serial. Oracle for the row-parallel kernel.
TargetMap gaussian_map(const KeypointSet& kps, const GaussianMapConfig& cfg);
}  // namespace reference

}  // namespace spheremap
