#include "spheremap/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spheremap/errors.hpp"
#include "spheremap/parallel.hpp"

namespace spheremap {
namespace {

const std::vector<std::string>& projection_channels() {
  static const std::vector<std::string> names{"nx", "ny", "nz", "rho", "occupancy"};
  return names;
}

bool is_integer_ratio(double num, double den) {
  const double r = num / den;
  return r >= 1.0 && std::abs(r - std::round(r)) < 1e-9;
}

// Interpolated channels: the three normal components and rho.
constexpr int kValueChannels = 4;

int wrap_index(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

struct Known {
  double pos;
  float v[kValueChannels];
};

double hermite(double p0, double p1, double m0, double m1, double h, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * p1 +
         (t3 - t2) * h * m1;
}

// Fill the unknown entries of one line. `get`/`set` address positions
// 0..n-1; `known` flags which entries carry data.
template <typename Get, typename Set>
void fill_line(int n, const std::vector<char>& known, bool wrap, Get get, Set set) {
  std::vector<Known> pts;
  for (int i = 0; i < n; ++i) {
    if (!known[i]) continue;
    Known k{static_cast<double>(i), {}};
    for (int c = 0; c < kValueChannels; ++c) k.v[c] = get(i, c);
    pts.push_back(k);
  }
  const int m = static_cast<int>(pts.size());
  if (m == 0 || m == n) return;

  if (m < 4) {
    // Too sparse for a cubic: nearest known value.
    for (int i = 0; i < n; ++i) {
      if (known[i]) continue;
      double best = 1e300;
      const Known* src = nullptr;
      for (const auto& p : pts) {
        double d = std::abs(p.pos - i);
        if (wrap) d = std::min(d, n - d);
        if (d < best) {
          best = d;
          src = &p;
        }
      }
      for (int c = 0; c < kValueChannels; ++c) set(i, c, src->v[c]);
    }
    return;
  }

  // Known sample k, with positions unwrapped around the seam when wrapping.
  auto sample = [&](int k) -> Known {
    if (!wrap) return pts[std::clamp(k, 0, m - 1)];
    const int q = ((k % m) + m) % m;
    const int turns = (k - q) / m;
    Known p = pts[q];
    p.pos += static_cast<double>(turns) * n;
    return p;
  };

  const int first_seg = wrap ? 0 : 0;
  const int last_seg = wrap ? m - 1 : m - 2;
  for (int k = first_seg; k <= last_seg; ++k) {
    const Known p0 = sample(k);
    const Known p1 = sample(k + 1);
    const double h = p1.pos - p0.pos;
    if (h <= 1.0) continue;
    const bool has_prev = wrap || k > 0;
    const bool has_next = wrap || k + 2 < m;
    const Known pm = sample(k - 1);
    const Known p2 = sample(k + 2);
    for (int step = 1; step < static_cast<int>(std::lround(h)); ++step) {
      const double x = p0.pos + step;
      const int idx = wrap ? wrap_index(static_cast<int>(std::lround(x)), n) : static_cast<int>(x);
      const double t = (x - p0.pos) / h;
      for (int c = 0; c < kValueChannels; ++c) {
        const double m0 = has_prev ? (p1.v[c] - pm.v[c]) / (p1.pos - pm.pos) : (p1.v[c] - p0.v[c]) / h;
        const double m1 = has_next ? (p2.v[c] - p0.v[c]) / (p2.pos - p0.pos) : (p1.v[c] - p0.v[c]) / h;
        set(idx, c, static_cast<float>(hermite(p0.v[c], p1.v[c], m0, m1, h, t)));
      }
    }
  }
  if (!wrap) {
    // Constant extension beyond the outermost samples.
    const Known& a = pts.front();
    const Known& b = pts.back();
    for (int i = 0; i < static_cast<int>(a.pos); ++i)
      for (int c = 0; c < kValueChannels; ++c) set(i, c, a.v[c]);
    for (int i = static_cast<int>(b.pos) + 1; i < n; ++i)
      for (int c = 0; c < kValueChannels; ++c) set(i, c, b.v[c]);
  }
}

void renormalize(RasterGrid& g, int r, int c) {
  const double x = g.at(r, c, channel::nx), y = g.at(r, c, channel::ny), z = g.at(r, c, channel::nz);
  const double n = std::sqrt(x * x + y * y + z * z);
  if (n > 0.0) {
    g.at(r, c, channel::nx) = static_cast<float>(x / n);
    g.at(r, c, channel::ny) = static_cast<float>(y / n);
    g.at(r, c, channel::nz) = static_cast<float>(z / n);
  }
}

}  // namespace

void ProjectionConfig::validate() const {
  if (!(delta > 0.0) || !is_integer_ratio(180.0, delta) || !is_integer_ratio(360.0, delta)) {
    throw ConfigError("delta must divide 180 and 360 into whole pixel counts, got " +
                      std::to_string(delta));
  }
  if (!(h_min >= 0.0 && h_min < h_max && h_max <= 1.0)) {
    throw ConfigError("ROI fractions must satisfy 0 <= h_min < h_max <= 1");
  }
}

int ProjectionConfig::height() const { return static_cast<int>(std::lround(180.0 / delta)); }
int ProjectionConfig::width() const { return static_cast<int>(std::lround(360.0 / delta)); }

std::pair<int, int> ProjectionConfig::roi_rows(int height) const {
  // Small tolerance so exact products such as 0.25 * 180 are not nudged by rounding.
  const double lo = h_min * height;
  const double hi = h_max * height;
  const int first = static_cast<int>(std::floor(lo + 1e-9));
  const int last = static_cast<int>(std::ceil(hi - 1e-9));
  return {std::clamp(first, 0, height), std::clamp(last, 0, height)};
}

RasterGrid project_equirectangular(const PointCloud& cloud, const ProjectionConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw EmptyInput("project_equirectangular: empty point cloud");
  const int H = cfg.height(), W = cfg.width();
  std::vector<double> acc(static_cast<std::size_t>(H) * W * 4, 0.0);
  std::vector<int> hits(static_cast<std::size_t>(H) * W, 0);
  for (const auto& s : cloud.samples) {
    const SphericalPoint sp = cartesian_to_spherical(s.position);
    const int row = std::min(static_cast<int>(std::floor(sp.theta / cfg.delta)), H - 1);
    const int col = std::min(static_cast<int>(std::floor((sp.phi + 180.0) / cfg.delta)), W - 1);
    const std::size_t cell = static_cast<std::size_t>(std::max(row, 0)) * W + std::max(col, 0);
    acc[cell * 4 + 0] += s.normal.x;
    acc[cell * 4 + 1] += s.normal.y;
    acc[cell * 4 + 2] += s.normal.z;
    acc[cell * 4 + 3] += sp.rho;
    ++hits[cell];
  }
  RasterGrid grid(H, W, projection_channels());
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * W + c;
      if (hits[cell] == 0) continue;
      const Point3 n = Point3{acc[cell * 4], acc[cell * 4 + 1], acc[cell * 4 + 2]}.normalized();
      grid.at(r, c, channel::nx) = static_cast<float>(n.x);
      grid.at(r, c, channel::ny) = static_cast<float>(n.y);
      grid.at(r, c, channel::nz) = static_cast<float>(n.z);
      grid.at(r, c, channel::rho) = static_cast<float>(acc[cell * 4 + 3] / hits[cell]);
      grid.at(r, c, channel::occupancy) = 1.0f;
    }
  }
  return grid;
}

RasterGrid fill_holes_cubic(const RasterGrid& grid, bool wrap_azimuth) {
  const int H = grid.height(), W = grid.width();
  const int occ = grid.channel_index("occupancy");
  bool any = false;
  for (int r = 0; r < H && !any; ++r)
    for (int c = 0; c < W && !any; ++c) any = grid.at(r, c, occ) > 0.5f;
  if (!any) throw EmptyInput("fill_holes_cubic: raster has no occupied cells");

  RasterGrid out = grid;
  std::vector<char> filled(static_cast<std::size_t>(H) * W, 0);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) filled[static_cast<std::size_t>(r) * W + c] = grid.at(r, c, occ) > 0.5f;

  // Row pass, rows are independent.
#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int r = 0; r < H; ++r) {
    std::vector<char> known(filled.begin() + static_cast<std::ptrdiff_t>(r) * W,
                            filled.begin() + static_cast<std::ptrdiff_t>(r + 1) * W);
    if (std::find(known.begin(), known.end(), 1) == known.end()) continue;
    fill_line(
        W, known, wrap_azimuth, [&](int i, int ch) { return out.at(r, i, ch); },
        [&](int i, int ch, float v) { out.at(r, i, ch) = v; });
    for (int c = 0; c < W; ++c) {
      if (!known[c]) renormalize(out, r, c);
      filled[static_cast<std::size_t>(r) * W + c] = 1;
    }
  }

  // Column pass for rows that had no data at all.
#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int c = 0; c < W; ++c) {
    std::vector<char> known(static_cast<std::size_t>(H));
    for (int r = 0; r < H; ++r) known[r] = filled[static_cast<std::size_t>(r) * W + c];
    if (std::find(known.begin(), known.end(), 0) == known.end()) continue;
    fill_line(
        H, known, false, [&](int i, int ch) { return out.at(i, c, ch); },
        [&](int i, int ch, float v) { out.at(i, c, ch) = v; });
    for (int r = 0; r < H; ++r) {
      if (!known[r]) renormalize(out, r, c);
    }
  }
  return out;
}

RasterGrid crop_roi(const RasterGrid& grid, const ProjectionConfig& cfg) {
  const auto [first, last] = cfg.roi_rows(grid.height());
  const int h = last - first;
  if (h < 8) {
    throw RoiTooSmall("ROI keeps " + std::to_string(h) + " rows, at least 8 are required");
  }
  RasterGrid out(h, grid.width(), grid.channel_names());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < grid.width(); ++c)
      for (int ch = 0; ch < grid.channels(); ++ch) out.at(r, c, ch) = grid.at(first + r, c, ch);
  out.row_offset = grid.row_offset + first;
  return out;
}

RasterGrid circular_shift(const RasterGrid& grid, int offset) {
  const int W = grid.width();
  const int o = wrap_index(offset, W);
  RasterGrid out = grid;
  if (o == 0) return out;
  for (int r = 0; r < grid.height(); ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < grid.channels(); ++ch) out.at(r, (c + o) % W, ch) = grid.at(r, c, ch);
  return out;
}

Tensor<float> normalize_input_channels(const RasterGrid& grid) {
  const int H = grid.height(), W = grid.width();
  const int chans[3] = {grid.channel_index("nx"), grid.channel_index("ny"), grid.channel_index("nz")};
  std::vector<float> values(static_cast<std::size_t>(3) * H * W);
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const float v = std::clamp(grid.at(r, c, chans[k]), -1.0f, 1.0f);
        values[(static_cast<std::size_t>(k) * H + r) * W + c] = (v + 1.0f) * 0.5f;
      }
  return Tensor<float>({1, 3, H, W}, std::move(values));
}

RasterGrid project_roi(const PointCloud& cloud, const ProjectionConfig& cfg) {
  const PointCloud centred = center_to_origin(cloud);
  return crop_roi(fill_holes_cubic(project_equirectangular(centred, cfg), cfg.wrap_azimuth), cfg);
}

}  // namespace spheremap
