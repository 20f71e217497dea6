#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spheremap/geometry.hpp"
#include "spheremap/mesh_io.hpp"
#include "spheremap/projection.hpp"
#include "spheremap/targetmaps.hpp"

namespace spheremap {

/// Parameters of one synthetic spheroid. Angles are in degrees.
struct SpheroidSpec {
  double a = 1.0;  // equatorial radius
  double c = 1.0;  // polar radius
  int n_features = 0;
  double spiral_divergence = 137.5;
  double spiral_phase = 0.0;          // azimuth of the first feature
  double feature_theta_min = 42.3;    // band holding the features
  double feature_theta_max = 137.7;
  double bump_amplitude = 0.03;       // fraction of the local radius
  double bump_angular_radius = 2.5;
  double surface_noise = 0.0;         // std of per-point radial jitter, fraction of radius
  int noise_blobs = 0;                // smooth low-frequency undulations
  double noise_blob_amplitude = 0.0;  // fraction of radius
  int sample_count = 100000;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct SyntheticSample {
  SpheroidSpec spec;
  PointCloud cloud;
  std::vector<Point3> feature_centers;  // on the perturbed surface, same frame as `cloud`
};

/// Feature directions on a golden-angle spiral with uniform area spacing in the band.
std::vector<Point3> spiral_directions(const SpheroidSpec& spec);

/// Smallest great-circle angle between any two directions, in degrees.
double min_angular_separation(const std::vector<Point3>& directions);

/// Throws PackingError when the edge-to-edge gap between two bumps is below one bump radius.
SyntheticSample generate_spheroid(const SpheroidSpec& spec);

/// Pixel keypoints of the features inside the ROI of `cfg`, measured after
/// centring `cloud` the same way projection does. Pixel (r, c) has its centre
/// at coordinates (r, c).
KeypointSet project_features(const PointCloud& cloud, const std::vector<Point3>& centers,
                             const ProjectionConfig& cfg);

/// Inclusive ranges that per-sample specs are drawn from.
struct SpecRanges {
  int features_min = 150;
  int features_max = 350;
  double a_min = 0.95, a_max = 1.05;
  double c_min = 0.95, c_max = 1.25;
  double bump_amplitude_min = 0.025, bump_amplitude_max = 0.04;
  double bump_angular_radius = 2.5;
  double feature_theta_min = 42.3;
  double feature_theta_max = 137.7;
  double surface_noise = 0.002;
  int noise_blobs = 12;
  double noise_blob_amplitude = 0.01;
  int sample_count = 100000;

  void validate() const;
};

/// Per-sample specs drawn uniformly from `ranges`; deterministic per seed.
/// A spec that fails to pack is redrawn up to 10 times.
std::vector<SpheroidSpec> draw_specs(int n_samples, const SpecRanges& ranges, std::uint64_t seed);

std::vector<SyntheticSample> generate_dataset(int n_samples, const SpecRanges& ranges, std::uint64_t seed);

/// Writes NNN.ply, NNN.json (annotations plus 3D feature centres) and manifest.json.
void write_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples,
                   const SpecRanges& ranges, std::uint64_t seed, const ProjectionConfig& cfg,
                   PlyEncoding encoding = PlyEncoding::binary_little_endian);

}  // namespace spheremap
