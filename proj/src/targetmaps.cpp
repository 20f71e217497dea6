#include "spheremap/targetmaps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <numeric>

#include "spheremap/errors.hpp"
#include "spheremap/parallel.hpp"

namespace spheremap {
namespace {

int wrap_index(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

double wrapped_dx(double a, double b, int width, bool wrap) {
  double dx = std::abs(a - b);
  if (wrap) dx = std::min(dx, width - dx);
  return dx;
}

// Pixels within `radius` of a keypoint, as (row, col, squared distance).
template <typename Fn>
void for_each_pixel_in_disc(const Keypoint& kp, double radius, int height, int width, bool wrap,
                            Fn&& fn) {
  const int r0 = std::max(0, static_cast<int>(std::ceil(kp.row - radius)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(kp.row + radius)));
  const int c0 = static_cast<int>(std::ceil(kp.col - radius));
  const int c1 = static_cast<int>(std::floor(kp.col + radius));
  const double r2 = radius * radius;
  for (int r = r0; r <= r1; ++r) {
    const double dy = r - kp.row;
    for (int c = c0; c <= c1; ++c) {
      int cc = c;
      if (wrap) {
        cc = wrap_index(c, width);
      } else if (c < 0 || c >= width) {
        continue;
      }
      const double dx = c - kp.col;
      const double d2 = dy * dy + dx * dx;
      if (d2 <= r2) fn(r, cc, d2);
    }
    if (wrap && c1 - c0 + 1 > width) break;  // disc wider than the raster; never hit in practice
  }
}

}  // namespace

void KeypointSet::validate() const {
  if (height <= 0 || width <= 0) throw ShapeError("keypoint set needs positive raster dims");
  for (const auto& p : points) {
    if (!std::isfinite(p.row) || !std::isfinite(p.col) || p.row < 0 || p.row >= height || p.col < 0 ||
        p.col >= width) {
      throw ShapeError("keypoint (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                       ") outside " + std::to_string(height) + "x" + std::to_string(width) + " raster");
    }
  }
}

KeypointSet read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    KeypointSet kps;
    kps.height = j.at("height").get<int>();
    kps.width = j.at("width").get<int>();
    kps.delta = j.value("delta", 1.0);
    kps.row_offset = j.value("row_offset", 0);
    for (const auto& p : j.at("points")) {
      kps.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    kps.validate();
    return kps;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_annotations(const std::filesystem::path& path, const KeypointSet& kps) {
  nlohmann::json j;
  j["height"] = kps.height;
  j["width"] = kps.width;
  j["delta"] = kps.delta;
  j["row_offset"] = kps.row_offset;
  auto pts = nlohmann::json::array();
  for (const auto& p : kps.points) pts.push_back({p.row, p.col});
  j["points"] = pts;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

KeypointSet shift_keypoints(const KeypointSet& kps, int offset) {
  KeypointSet out = kps;
  const int o = wrap_index(offset, kps.width);
  for (auto& p : out.points) {
    p.col += o;
    if (p.col >= kps.width) p.col -= kps.width;
  }
  return out;
}

void GaussianMapConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be positive");
  if (!(p_t > 0.0 && p_t < 1.0)) throw ConfigError("p_t must lie in (0, 1)");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(truncation_radius > 0.0)) throw ConfigError("truncation radius must be positive");
}

void DensityMapConfig::validate() const {
  if (k_neighbors < 1) throw ConfigError("k_neighbors must be at least 1");
  if (!(f > 0.0)) throw ConfigError("density scaling factor f must be positive");
  if (!(fallback_sigma > 0.0)) throw ConfigError("fallback sigma must be positive");
  if (!(truncation_radius > 0.0)) throw ConfigError("truncation radius must be positive");
}

double TargetMap::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double TargetMap::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

RasterGrid TargetMap::to_raster(const char* name) const {
  RasterGrid g(height, width, {name ? name : (kind == MapKind::gaussian ? "gaussian" : "density")});
  std::transform(values.begin(), values.end(), g.data().begin(), [](double v) { return static_cast<float>(v); });
  return g;
}

TargetMap TargetMap::from_raster(const RasterGrid& grid, MapKind kind, int channel) {
  const auto plane = grid.channel(channel);
  return TargetMap{grid.height(), grid.width(), kind, std::vector<double>(plane.begin(), plane.end())};
}

double pixel_distance(const Keypoint& a, const Keypoint& b, int width, bool wrap) {
  const double dy = a.row - b.row;
  const double dx = wrapped_dx(a.col, b.col, width, wrap);
  return std::sqrt(dy * dy + dx * dx);
}

std::vector<std::vector<double>> nearest_neighbor_distances(const KeypointSet& kps, int k,
                                                            bool wrap_azimuth) {
  if (k < 1) throw ConfigError("nearest_neighbor_distances: k must be at least 1");
  const std::size_t n = kps.points.size();
  std::vector<std::vector<double>> out(n);
  // Bucket grid so dense sets stay near-linear; cells are at least `cell` px.
  const double cell = 16.0;
  const int gh = std::max(1, static_cast<int>(std::ceil(kps.height / cell)));
  const int gw = std::max(1, static_cast<int>(std::ceil(kps.width / cell)));
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(gh) * gw);
  auto bucket_of = [&](const Keypoint& p) {
    const int br = std::clamp(static_cast<int>(p.row / cell), 0, gh - 1);
    const int bc = std::clamp(static_cast<int>(p.col / cell), 0, gw - 1);
    return std::pair{br, bc};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto [br, bc] = bucket_of(kps.points[i]);
    buckets[static_cast<std::size_t>(br) * gw + bc].push_back(static_cast<int>(i));
  }
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), n ? n - 1 : 0);
  const double slack = wrap_azimuth ? gw * cell - kps.width : 0.0;

#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto [br, bc] = bucket_of(kps.points[i]);
    std::vector<double> d;
    // Grow the search ring until the k-th distance is provably final.
    for (int ring = 0;; ++ring) {
      d.clear();
      const int rr = std::min(ring, std::max(gh, gw));
      for (int r = br - rr; r <= br + rr; ++r) {
        if (r < 0 || r >= gh) continue;
        const int c_lo = wrap_azimuth ? bc - rr : std::max(0, bc - rr);
        const int c_hi = wrap_azimuth ? bc - rr + std::min(2 * rr + 1, gw) - 1 : std::min(gw - 1, bc + rr);
        for (int cq = c_lo; cq <= c_hi; ++cq) {
          const int c = wrap_azimuth ? wrap_index(cq, gw) : cq;
          for (int j : buckets[static_cast<std::size_t>(r) * gw + c]) {
            if (static_cast<std::size_t>(j) == i) continue;
            d.push_back(pixel_distance(kps.points[i], kps.points[j], kps.width, wrap_azimuth));
          }
        }
      }
      const bool covers_all = rr >= std::max(gh, gw);
      std::sort(d.begin(), d.end());
      if (covers_all) break;
      // Everything outside the ring is at least `ring * cell` away, less the
      // width missing from the last bucket column when it wraps.
      if (d.size() >= want && (want == 0 || d[want - 1] <= rr * cell - slack)) break;
    }
    d.resize(std::min(d.size(), want));
    out[i] = std::move(d);
  }
  return out;
}

double adaptive_sigma(std::optional<double> d_min, const GaussianMapConfig& cfg) {
  if (!d_min) return cfg.beta;
  return std::min(*d_min * cfg.p_t, cfg.beta);
}

std::vector<double> gaussian_sigmas(const KeypointSet& kps, const GaussianMapConfig& cfg) {
  if (cfg.mode == SigmaMode::fixed) return std::vector<double>(kps.points.size(), cfg.sigma);
  const auto nn = nearest_neighbor_distances(kps, 1, cfg.wrap_azimuth);
  std::vector<double> sig(kps.points.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    sig[i] = adaptive_sigma(nn[i].empty() ? std::nullopt : std::optional<double>(nn[i][0]), cfg);
  }
  return sig;
}

namespace {

void normalise_peak(std::vector<double>& acc) {
  const double peak = acc.empty() ? 0.0 : *std::max_element(acc.begin(), acc.end());
  if (peak > 0.0) {
    for (auto& v : acc) v /= peak;
  }
}

TargetMap to_map(int h, int w, MapKind kind, std::vector<double> acc) {
  return TargetMap{h, w, kind, std::move(acc)};
}

}  // namespace

TargetMap gaussian_map(const KeypointSet& kps, const GaussianMapConfig& cfg) {
  cfg.validate();
  kps.validate();
  const int H = kps.height, W = kps.width;
  const auto sig = gaussian_sigmas(kps, cfg);
  std::vector<double> acc(static_cast<std::size_t>(H) * W, 0.0);

  // Keypoints touching each row, in keypoint order, so every pixel sees its
  // contributions in the same order as the serial reference.
  std::vector<std::vector<int>> rows(H);
  for (std::size_t i = 0; i < kps.points.size(); ++i) {
    const double rad = cfg.truncation_radius * sig[i];
    const int r0 = std::max(0, static_cast<int>(std::ceil(kps.points[i].row - rad)));
    const int r1 = std::min(H - 1, static_cast<int>(std::floor(kps.points[i].row + rad)));
    for (int r = r0; r <= r1; ++r) rows[r].push_back(static_cast<int>(i));
  }

#pragma omp parallel for num_threads(thread_count()) schedule(dynamic, 4)
  for (int r = 0; r < H; ++r) {
    double* line = acc.data() + static_cast<std::size_t>(r) * W;
    for (int i : rows[r]) {
      const Keypoint& kp = kps.points[i];
      const double s = sig[i];
      const double rad = cfg.truncation_radius * s;
      const double dy = r - kp.row;
      const double half = std::sqrt(std::max(0.0, rad * rad - dy * dy));
      const int c0 = static_cast<int>(std::ceil(kp.col - half));
      const int c1 = static_cast<int>(std::floor(kp.col + half));
      for (int c = c0; c <= c1; ++c) {
        int cc = c;
        if (cfg.wrap_azimuth) {
          cc = wrap_index(c, W);
        } else if (c < 0 || c >= W) {
          continue;
        }
        const double dx = c - kp.col;
        const double d2 = dy * dy + dx * dx;
        if (d2 > rad * rad) continue;
        const double v = std::exp(-d2 / (2.0 * s * s));
        if (cfg.combine == KernelCombine::sum) {
          line[cc] += v;
        } else {
          line[cc] = std::max(line[cc], v);
        }
      }
    }
  }
  normalise_peak(acc);
  return to_map(H, W, MapKind::gaussian, std::move(acc));
}

namespace reference {

TargetMap gaussian_map(const KeypointSet& kps, const GaussianMapConfig& cfg) {
  cfg.validate();
  kps.validate();
  const int H = kps.height, W = kps.width;
  const auto sig = gaussian_sigmas(kps, cfg);
  std::vector<double> acc(static_cast<std::size_t>(H) * W, 0.0);
  for (std::size_t i = 0; i < kps.points.size(); ++i) {
    const double s = sig[i];
    for_each_pixel_in_disc(kps.points[i], cfg.truncation_radius * s, H, W, cfg.wrap_azimuth,
                           [&](int r, int c, double d2) {
                             double& dst = acc[static_cast<std::size_t>(r) * W + c];
                             const double v = std::exp(-d2 / (2.0 * s * s));
                             dst = cfg.combine == KernelCombine::sum ? dst + v : std::max(dst, v);
                           });
  }
  normalise_peak(acc);
  return to_map(H, W, MapKind::gaussian, std::move(acc));
}

}  // namespace reference

std::vector<double> density_sigmas(const KeypointSet& kps, const DensityMapConfig& cfg) {
  const auto nn = nearest_neighbor_distances(kps, cfg.k_neighbors, cfg.wrap_azimuth);
  std::vector<double> sig(kps.points.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (nn[i].empty()) {
      sig[i] = cfg.fallback_sigma;
      continue;
    }
    const double mean = std::accumulate(nn[i].begin(), nn[i].end(), 0.0) / nn[i].size();
    sig[i] = cfg.k_neighbors * mean / cfg.f;
    if (!(sig[i] > 0.0)) sig[i] = cfg.fallback_sigma;  // coincident keypoints
  }
  return sig;
}

TargetMap density_map(const KeypointSet& kps, const DensityMapConfig& cfg) {
  cfg.validate();
  kps.validate();
  const int H = kps.height, W = kps.width;
  const auto sig = density_sigmas(kps, cfg);
  std::vector<double> acc(static_cast<std::size_t>(H) * W, 0.0);
  std::vector<std::pair<std::size_t, double>> kernel;
  for (std::size_t i = 0; i < kps.points.size(); ++i) {
    const double s = sig[i];
    kernel.clear();
    double mass = 0.0;
    // A radius of at least one pixel keeps every kernel non-empty.
    const double rad = std::max(cfg.truncation_radius * s, 1.0);
    for_each_pixel_in_disc(kps.points[i], rad, H, W, cfg.wrap_azimuth, [&](int r, int c, double d2) {
      const double v = std::exp(-d2 / (2.0 * s * s));
      kernel.emplace_back(static_cast<std::size_t>(r) * W + c, v);
      mass += v;
    });
    if (mass <= 0.0) {
      // Degenerate (tiny sigma far from every pixel centre): put the unit mass on the nearest pixel.
      const int r = std::clamp(static_cast<int>(std::lround(kps.points[i].row)), 0, H - 1);
      const int c = wrap_index(static_cast<int>(std::lround(kps.points[i].col)), W);
      acc[static_cast<std::size_t>(r) * W + c] += 1.0;
      continue;
    }
    for (const auto& [idx, v] : kernel) acc[idx] += v / mass;
  }
  return to_map(H, W, MapKind::density, std::move(acc));
}

TargetMap shift_map(const TargetMap& map, int offset) {
  TargetMap out = map;
  const int W = map.width;
  const int o = wrap_index(offset, W);
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < W; ++c)
      out.values[static_cast<std::size_t>(r) * W + (c + o) % W] = map.values[static_cast<std::size_t>(r) * W + c];
  return out;
}

}  // namespace spheremap
