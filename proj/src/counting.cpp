#include "spheremap/counting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // The smaller root wins so labels follow raster order.
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::size_t BinaryMap::true_count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

BinaryMap binarize(const TargetMap& map, double p_t) {
  BinaryMap b{map.height, map.width, p_t, std::vector<std::uint8_t>(map.values.size())};
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!std::isfinite(map.values[i])) throw NumericError("binarize: non-finite map value");
    b.cells[i] = map.values[i] > p_t ? 1 : 0;
  }
  return b;
}

std::vector<Cluster> connected_components(const BinaryMap& bin, int connectivity, bool wrap_azimuth) {
  if (connectivity != 4 && connectivity != 8) throw ConfigError("connectivity must be 4 or 8");
  const int H = bin.height, W = bin.width;
  DisjointSet ds(static_cast<std::size_t>(H) * W);
  auto id = [W](int r, int c) { return r * W + c; };

  // Union with the already-visited neighbours (previous row, previous column),
  // plus the seam neighbours when wrapping.
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!bin.at(r, c)) continue;
      auto link = [&](int rr, int cc) {
        if (rr < 0 || rr >= H) return;
        if (cc < 0 || cc >= W) {
          if (!wrap_azimuth) return;
          cc = (cc + W) % W;
        }
        if (bin.at(rr, cc)) ds.unite(id(r, c), id(rr, cc));
      };
      link(r, c - 1);
      link(r - 1, c);
      if (connectivity == 8) {
        link(r - 1, c - 1);
        link(r - 1, c + 1);
      }
      if (wrap_azimuth && c == W - 1 && W > 1) {
        // Right edge touches column 0 of this row and (for 8-connectivity) the rows around it.
        link(r, W);
        if (connectivity == 8) {
          link(r - 1, W);
          link(r + 1, W);
        }
      }
    }
  }

  std::vector<int> label_of(static_cast<std::size_t>(H) * W, -1);
  std::vector<Cluster> clusters;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!bin.at(r, c)) continue;
      const int root = ds.find(id(r, c));
      int& lab = label_of[root];
      if (lab < 0) {
        lab = static_cast<int>(clusters.size());
        clusters.emplace_back();
      }
      clusters[lab].pixels.push_back({r, c});
    }
  }

  for (auto& cl : clusters) {
    const double ref = cl.pixels.front().col;
    double sr = 0.0, sc = 0.0;
    for (const auto& p : cl.pixels) {
      double c = p.col;
      if (wrap_azimuth) {
        if (c - ref > W / 2.0) c -= W;
        if (ref - c > W / 2.0) c += W;
      }
      sr += p.row;
      sc += c;
    }
    const double n = static_cast<double>(cl.pixels.size());
    cl.centroid_row = sr / n;
    double col = sc / n;
    if (wrap_azimuth) {
      col = std::fmod(col, static_cast<double>(W));
      if (col < 0) col += W;
    }
    cl.centroid_col = col;
  }
  return clusters;
}

CountResult count_from_gaussian(const TargetMap& map, double p_t, std::size_t min_cluster_size,
                                bool wrap_azimuth) {
  const auto clusters = connected_components(binarize(map, p_t), 8, wrap_azimuth);
  CountResult res;
  res.method = "gaussian";
  res.p_t = p_t;
  for (const auto& cl : clusters) {
    if (cl.size() < min_cluster_size) continue;
    res.centers.push_back({cl.centroid_row, cl.centroid_col});
  }
  res.count = static_cast<double>(res.centers.size());
  return res;
}

CountResult count_from_density(const TargetMap& map) {
  CountResult res;
  res.method = "density";
  double s = 0.0;
  for (double v : map.values) {
    if (!std::isfinite(v)) throw NumericError("count_from_density: non-finite map value");
    if (v < 0.0) {
      ++res.clamped_pixels;
      continue;
    }
    s += v;
  }
  res.count = s;
  return res;
}

double circle_iou(double d, double diameter) {
  const double R = diameter / 2.0;
  if (d >= diameter) return 0.0;
  if (d <= 0.0) return 1.0;
  const double lens = 2.0 * R * R * std::acos(d / diameter) - 0.5 * d * std::sqrt(diameter * diameter - d * d);
  const double disc = std::numbers::pi * R * R;
  return lens / (2.0 * disc - lens);
}

std::vector<float> box_smooth3(const std::vector<float>& plane, int H, int W, bool wrap) {
  std::vector<float> out(plane.size());
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double s = 0.0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= H) continue;
        for (int dc = -1; dc <= 1; ++dc) {
          int cc = c + dc;
          if (cc < 0 || cc >= W) {
            if (!wrap) continue;
            cc = (cc + W) % W;
          }
          s += plane[static_cast<std::size_t>(rr) * W + cc];
          ++n;
        }
      }
      out[static_cast<std::size_t>(r) * W + c] = static_cast<float>(s / n);
    }
  }
  return out;
}

CountResult nms_baseline(const RasterGrid& grid, double beta, bool wrap_azimuth) {
  if (!(beta > 0.0)) throw ConfigError("nms_baseline: beta must be positive");
  const int H = grid.height(), W = grid.width();
  const auto rho = box_smooth3(grid.channel(grid.channel_index("rho")), H, W, wrap_azimuth);
  auto at = [&](int r, int c) { return rho[static_cast<std::size_t>(r) * W + c]; };

  struct Proposal {
    float value;
    int row, col;
  };
  std::vector<Proposal> props;
  // Border rows of the raster have no outer neighbours and are skipped.
  for (int r = 1; r + 1 < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const float v = at(r, c);
      // Relative margin so float jitter on a flat surface is not a maximum.
      const float margin = 1e-6f * std::max(1.0f, std::abs(v));
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          int cc = c + dc;
          if (cc < 0 || cc >= W) {
            if (!wrap_azimuth) continue;
            cc = (cc + W) % W;
          }
          if (!(v > at(r + dr, cc) + margin)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) props.push_back({v, r, c});
    }
  }
  std::sort(props.begin(), props.end(), [](const Proposal& a, const Proposal& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });

  CountResult res;
  res.method = "nms";
  for (const auto& p : props) {
    const Keypoint kp{static_cast<double>(p.row), static_cast<double>(p.col)};
    bool keep = true;
    for (const auto& acc : res.centers) {
      if (circle_iou(pixel_distance(kp, acc, W, wrap_azimuth), beta) > 0.5) {
        keep = false;
        break;
      }
    }
    if (keep) res.centers.push_back(kp);
  }
  res.count = static_cast<double>(res.centers.size());
  return res;
}

void write_count_result(const std::filesystem::path& path, const CountResult& result) {
  nlohmann::json j;
  j["count"] = result.count;
  auto centers = nlohmann::json::array();
  for (const auto& c : result.centers) centers.push_back({c.row, c.col});
  j["centers"] = centers;
  j["method"] = result.method;
  j["p_t"] = result.p_t;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

CountResult read_count_result(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    CountResult r;
    r.count = j.at("count").get<double>();
    r.method = j.value("method", "");
    r.p_t = j.value("p_t", 0.0);
    for (const auto& c : j.at("centers")) r.centers.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace spheremap
