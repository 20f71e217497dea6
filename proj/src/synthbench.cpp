#include "spheremap/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "spheremap/errors.hpp"
#include "spheremap/parallel.hpp"
#include "spheremap/random.hpp"

namespace spheremap {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Bump {
  Point3 dir;
  double theta;   // degrees, for the band lookup
  double radius;  // degrees
  double amplitude;
};

double angle_between_deg(const Point3& u, const Point3& v) {
  return std::atan2(u.cross(v).norm(), u.dot(v)) / kDeg;
}

double cosine_profile(double angle, double radius) {
  return angle >= radius ? 0.0 : 0.5 * (1.0 + std::cos(std::numbers::pi * angle / radius));
}

// Radius of the perturbed surface along a unit direction.
class RadiusField {
 public:
  RadiusField(const SpheroidSpec& spec, std::vector<Bump> features, std::vector<Bump> blobs)
      : a_(spec.a), c_(spec.c), features_(std::move(features)), blobs_(std::move(blobs)) {
    std::sort(features_.begin(), features_.end(),
              [](const Bump& x, const Bump& y) { return x.theta < y.theta; });
    for (const auto& f : features_) max_feature_radius_ = std::max(max_feature_radius_, f.radius);
  }

  double operator()(const Point3& u) const {
    const double s2 = u.x * u.x + u.y * u.y;
    const double base = 1.0 / std::sqrt(s2 / (a_ * a_) + u.z * u.z / (c_ * c_));
    const double theta = std::atan2(std::sqrt(s2), u.z) / kDeg;
    double rel = 0.0;
    // Features are sorted by inclination; only those within one radius can touch u.
    auto lo = std::lower_bound(features_.begin(), features_.end(), theta - max_feature_radius_,
                               [](const Bump& b, double t) { return b.theta < t; });
    for (auto it = lo; it != features_.end() && it->theta <= theta + max_feature_radius_; ++it) {
      rel += it->amplitude * cosine_profile(angle_between_deg(u, it->dir), it->radius);
    }
    for (const auto& b : blobs_) rel += b.amplitude * cosine_profile(angle_between_deg(u, b.dir), b.radius);
    return base * (1.0 + rel);
  }

 private:
  double a_, c_;
  std::vector<Bump> features_;
  std::vector<Bump> blobs_;
  double max_feature_radius_ = 0.0;
};

Point3 random_direction(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

// Outward normal of the surface u -> r(u) u from central differences in a tangent frame.
Point3 field_normal(const RadiusField& field, const Point3& u) {
  const Point3 helper = std::abs(u.z) < 0.9 ? Point3{0, 0, 1} : Point3{1, 0, 0};
  const Point3 e1 = u.cross(helper).normalized();
  const Point3 e2 = u.cross(e1);
  const double h = 1e-5;
  auto surf = [&](const Point3& d) {
    const Point3 v = d.normalized();
    return v * field(v);
  };
  const Point3 t1 = surf(u + e1 * h) - surf(u - e1 * h);
  const Point3 t2 = surf(u + e2 * h) - surf(u - e2 * h);
  Point3 n = t1.cross(t2).normalized();
  if (n.dot(u) < 0.0) n = n * -1.0;
  return n;
}

nlohmann::json spec_to_json(const SpheroidSpec& s) {
  return {{"a", s.a},
          {"c", s.c},
          {"n_features", s.n_features},
          {"spiral_divergence", s.spiral_divergence},
          {"spiral_phase", s.spiral_phase},
          {"feature_theta_min", s.feature_theta_min},
          {"feature_theta_max", s.feature_theta_max},
          {"bump_amplitude", s.bump_amplitude},
          {"bump_angular_radius", s.bump_angular_radius},
          {"surface_noise", s.surface_noise},
          {"noise_blobs", s.noise_blobs},
          {"noise_blob_amplitude", s.noise_blob_amplitude},
          {"sample_count", s.sample_count},
          {"seed", s.seed}};
}

}  // namespace

void SpheroidSpec::validate() const {
  if (!(a > 0.0 && c > 0.0)) throw ConfigError("spheroid radii must be positive");
  if (n_features < 0) throw ConfigError("n_features must be non-negative");
  if (!(bump_amplitude >= 0.0 && bump_amplitude < 0.3)) throw ConfigError("bump_amplitude must lie in [0, 0.3)");
  if (!(bump_angular_radius > 0.0)) throw ConfigError("bump_angular_radius must be positive");
  if (!(feature_theta_min >= 0.0 && feature_theta_min < feature_theta_max && feature_theta_max <= 180.0)) {
    throw ConfigError("feature theta band must satisfy 0 <= min < max <= 180");
  }
  if (surface_noise < 0.0 || noise_blob_amplitude < 0.0 || noise_blobs < 0) {
    throw ConfigError("noise parameters must be non-negative");
  }
  if (sample_count < 10 * n_features || sample_count < 1) {
    throw ConfigError("sample_count must be at least 10 * n_features");
  }
}

std::vector<Point3> spiral_directions(const SpheroidSpec& spec) {
  std::vector<Point3> dirs;
  dirs.reserve(spec.n_features);
  const double z0 = std::cos(spec.feature_theta_min * kDeg);
  const double z1 = std::cos(spec.feature_theta_max * kDeg);
  for (int i = 0; i < spec.n_features; ++i) {
    const double z = z0 - (i + 0.5) / spec.n_features * (z0 - z1);
    const double phi = std::fmod(spec.spiral_phase + i * spec.spiral_divergence, 360.0) * kDeg;
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.push_back({s * std::cos(phi), s * std::sin(phi), z});
  }
  return dirs;
}

double min_angular_separation(const std::vector<Point3>& dirs) {
  double best = 180.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) best = std::min(best, angle_between_deg(dirs[i], dirs[j]));
  }
  return best;
}

SyntheticSample generate_spheroid(const SpheroidSpec& spec) {
  spec.validate();
  const auto dirs = spiral_directions(spec);
  if (dirs.size() >= 2) {
    const double sep = min_angular_separation(dirs);
    const double gap = sep - 2.0 * spec.bump_angular_radius;
    if (gap < spec.bump_angular_radius) {
      char msg[200];
      std::snprintf(msg, sizeof msg,
                    "%d features leave a %.2f deg gap between bumps of radius %.2f deg; use fewer features",
                    spec.n_features, gap, spec.bump_angular_radius);
      throw PackingError(msg);
    }
  }

  Rng rng(spec.seed);
  std::vector<Bump> features;
  for (const auto& d : dirs) {
    features.push_back({d, std::atan2(std::hypot(d.x, d.y), d.z) / kDeg, spec.bump_angular_radius, spec.bump_amplitude});
  }
  std::vector<Bump> blobs;
  for (int i = 0; i < spec.noise_blobs; ++i) {
    const Point3 d = random_direction(rng);
    const double radius = rng.uniform(20.0, 45.0);
    const double amp = rng.uniform(-1.0, 1.0) * spec.noise_blob_amplitude;
    blobs.push_back({d, 0.0, radius, amp});
  }
  const RadiusField field(spec, std::move(features), std::move(blobs));

  SyntheticSample out;
  out.spec = spec;
  std::vector<Point3> dirs_sampled(spec.sample_count);
  std::vector<double> jitter(spec.sample_count);
  for (int i = 0; i < spec.sample_count; ++i) {
    dirs_sampled[i] = random_direction(rng);
    jitter[i] = spec.surface_noise > 0.0 ? spec.surface_noise * rng.normal() : 0.0;
  }
  out.cloud.samples.resize(spec.sample_count);
  for (int i = 0; i < spec.sample_count; ++i) {
    const Point3& u = dirs_sampled[i];
    out.cloud.samples[i].position = u * (field(u) * (1.0 + jitter[i]));
    out.cloud.samples[i].normal = field_normal(field, u);
  }
  for (const auto& d : dirs) out.feature_centers.push_back(d * field(d));
  return out;
}

KeypointSet project_features(const PointCloud& cloud, const std::vector<Point3>& centers,
                             const ProjectionConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw EmptyInput("project_features: empty cloud");
  const int H = cfg.height(), W = cfg.width();
  const auto [r0, r1] = cfg.roi_rows(H);
  const Point3 origin = cloud.centroid();
  KeypointSet kps;
  kps.height = r1 - r0;
  kps.width = W;
  kps.delta = cfg.delta;
  kps.row_offset = r0;
  for (const auto& p : centers) {
    const SphericalPoint s = cartesian_to_spherical(p - origin);
    const int pixel_row = std::clamp(static_cast<int>(std::floor(s.theta / cfg.delta)), 0, H - 1);
    if (pixel_row < r0 || pixel_row >= r1) continue;
    // Snap to a 1/1024 px grid: integer column shifts then leave every
    // kernel distance bit-identical, so shifted targets regenerate exactly.
    auto snap = [](double v) { return std::round(v * 1024.0) / 1024.0; };
    const double row = std::clamp(snap(s.theta / cfg.delta - 0.5 - r0), 0.0, kps.height - 1.0 / 1024.0);
    double col = snap((s.phi + 180.0) / cfg.delta - 0.5);
    if (col < 0.0) col += W;
    if (col >= W) col -= W;
    kps.points.push_back({row, col});
  }
  return kps;
}

void SpecRanges::validate() const {
  if (features_min < 0 || features_min > features_max) throw ConfigError("invalid feature count range");
  if (!(a_min > 0.0 && a_min <= a_max && c_min > 0.0 && c_min <= c_max)) throw ConfigError("invalid radius range");
  if (!(bump_amplitude_min >= 0.0 && bump_amplitude_min <= bump_amplitude_max && bump_amplitude_max < 0.3)) {
    throw ConfigError("invalid bump amplitude range");
  }
}

std::vector<SpheroidSpec> draw_specs(int n_samples, const SpecRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  std::vector<SpheroidSpec> specs;
  for (int i = 0; i < n_samples; ++i) {
    bool packed = false;
    for (int attempt = 0; attempt <= 10 && !packed; ++attempt) {
      Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i) * 16 + attempt);
      SpheroidSpec s;
      s.n_features = static_cast<int>(rng.between(ranges.features_min, ranges.features_max));
      s.a = rng.uniform(ranges.a_min, ranges.a_max);
      s.c = rng.uniform(ranges.c_min, ranges.c_max);
      s.bump_amplitude = rng.uniform(ranges.bump_amplitude_min, ranges.bump_amplitude_max);
      s.bump_angular_radius = ranges.bump_angular_radius;
      s.spiral_phase = rng.uniform(0.0, 360.0);
      s.feature_theta_min = ranges.feature_theta_min;
      s.feature_theta_max = ranges.feature_theta_max;
      s.surface_noise = ranges.surface_noise;
      s.noise_blobs = ranges.noise_blobs;
      s.noise_blob_amplitude = ranges.noise_blob_amplitude;
      s.sample_count = std::max(ranges.sample_count, 10 * s.n_features);
      s.seed = rng.next();
      s.validate();
      const auto dirs = spiral_directions(s);
      packed = dirs.size() < 2 ||
               min_angular_separation(dirs) - 2.0 * s.bump_angular_radius >= s.bump_angular_radius;
      if (packed) specs.push_back(s);
    }
    if (!packed) {
      throw PackingError("sample " + std::to_string(i) + " could not be packed after 10 retries; lower features_max");
    }
  }
  return specs;
}

std::vector<SyntheticSample> generate_dataset(int n_samples, const SpecRanges& ranges, std::uint64_t seed) {
  const auto specs = draw_specs(n_samples, ranges, seed);
  std::vector<SyntheticSample> out(specs.size());
#pragma omp parallel for num_threads(thread_count()) schedule(dynamic, 1)
  for (int i = 0; i < static_cast<int>(specs.size()); ++i) out[i] = generate_spheroid(specs[i]);
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples,
                   const SpecRanges& ranges, std::uint64_t seed, const ProjectionConfig& cfg,
                   PlyEncoding encoding) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["ranges"] = {{"features_min", ranges.features_min},
                        {"features_max", ranges.features_max},
                        {"a_min", ranges.a_min},
                        {"a_max", ranges.a_max},
                        {"c_min", ranges.c_min},
                        {"c_max", ranges.c_max},
                        {"bump_amplitude_min", ranges.bump_amplitude_min},
                        {"bump_amplitude_max", ranges.bump_amplitude_max},
                        {"bump_angular_radius", ranges.bump_angular_radius},
                        {"feature_theta_min", ranges.feature_theta_min},
                        {"feature_theta_max", ranges.feature_theta_max},
                        {"surface_noise", ranges.surface_noise},
                        {"noise_blobs", ranges.noise_blobs},
                        {"noise_blob_amplitude", ranges.noise_blob_amplitude},
                        {"sample_count", ranges.sample_count}};
  manifest["projection"] = {{"delta", cfg.delta}, {"h_min", cfg.h_min}, {"h_max", cfg.h_max}};
  auto entries = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[16];
    std::snprintf(stem, sizeof stem, "%03zu", i);
    const auto& s = samples[i];
    write_ply(dir / (std::string(stem) + ".ply"), s.cloud, encoding);
    const KeypointSet kps = project_features(s.cloud, s.feature_centers, cfg);
    write_annotations(dir / (std::string(stem) + ".json"), kps);
    // Keep the 3D centres next to the annotation so other resolutions can be derived.
    std::ifstream in(dir / (std::string(stem) + ".json"));
    nlohmann::json ann;
    in >> ann;
    in.close();
    auto centers = nlohmann::json::array();
    for (const auto& p : s.feature_centers) centers.push_back({p.x, p.y, p.z});
    ann["features_3d"] = centers;
    std::ofstream out(dir / (std::string(stem) + ".json"));
    out << ann.dump(1) << "\n";
    if (!out) throw IoError("cannot write annotation for sample " + std::string(stem));
    entries.push_back({{"index", i},
                       {"stem", stem},
                       {"n_features", s.spec.n_features},
                       {"n_keypoints", kps.size()},
                       {"spec", spec_to_json(s.spec)}});
  }
  manifest["samples"] = entries;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << "\n";
}

}  // namespace spheremap
