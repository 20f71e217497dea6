#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "spheremap/errors.hpp"
#include "spheremap/projection.hpp"
#include "spheremap/random.hpp"
#include "spheremap/raster_io.hpp"
#include "test_support.hpp"

using namespace spheremap;

namespace {

RasterGrid random_grid(int h, int w, std::uint64_t seed, double hole_fraction = 0.0) {
  Rng rng(seed);
  RasterGrid g(h, w, {"nx", "ny", "nz", "rho", "occupancy"});
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (rng.uniform() < hole_fraction) continue;
      const Point3 n = Point3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}.normalized();
      g.at(r, c, 0) = static_cast<float>(n.x);
      g.at(r, c, 1) = static_cast<float>(n.y);
      g.at(r, c, 2) = static_cast<float>(n.z);
      g.at(r, c, 3) = static_cast<float>(rng.uniform(0.5, 1.5));
      g.at(r, c, 4) = 1.0f;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("raster shapes for both resolutions") {
  const PointCloud cloud = testing::unit_sphere_cloud(20000, 1);
  ProjectionConfig cfg;
  cfg.delta = 1.0;
  RasterGrid g = project_equirectangular(cloud, cfg);
  CHECK(g.width() == 360);
  CHECK(g.height() == 180);
  CHECK(g.channels() == 5);
  cfg.delta = 0.5;
  g = project_equirectangular(cloud, cfg);
  CHECK(g.width() == 720);
  CHECK(g.height() == 360);
  CHECK(cfg.roi_rows(360) == std::pair{84, 276});
  CHECK(crop_roi(g, cfg).height() == 192);
  CHECK(crop_roi(g, cfg).row_offset == 84);
  cfg.delta = 1.0;
  CHECK(cfg.roi_rows(180) == std::pair{42, 138});
}

TEST_CASE("invalid projection configs") {
  ProjectionConfig cfg;
  cfg.delta = 0.7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.delta = 1.0;
  cfg.h_min = 0.6;
  cfg.h_max = 0.4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(project_equirectangular(PointCloud{}, ProjectionConfig{}), EmptyInput);
}

TEST_CASE("unit sphere projects to unit rho with unit normals") {
  const PointCloud cloud = testing::unit_sphere_cloud(100000, 2);
  const RasterGrid g = project_equirectangular(cloud, ProjectionConfig{});
  double worst_rho = 0.0, worst_norm = 0.0;
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      const float occ = g.at(r, c, channel::occupancy);
      CHECK((occ == 0.0f || occ == 1.0f));
      if (occ == 0.0f) continue;
      worst_rho = std::max(worst_rho, std::abs(g.at(r, c, channel::rho) - 1.0));
      const Point3 n{g.at(r, c, 0), g.at(r, c, 1), g.at(r, c, 2)};
      worst_norm = std::max(worst_norm, std::abs(n.norm() - 1.0));
    }
  }
  CHECK(worst_rho < 1e-6);
  CHECK(worst_norm < 1e-3);
}

TEST_CASE("single samples land in the expected cell") {
  PointCloud cloud;
  const SphericalPoint s{1.0, 45.3, -179.6};
  const Point3 p = spherical_to_cartesian(s);
  cloud.samples = {{p, p}, {p * -1.0, p * -1.0}};
  ProjectionConfig cfg;
  cfg.delta = 0.5;
  const RasterGrid g = project_equirectangular(cloud, cfg);
  CHECK(g.at(90, 0, channel::occupancy) == 1.0f);
  // the antipode sits at theta 134.7, phi 0.4
  CHECK(g.at(269, 360, channel::occupancy) == 1.0f);
  int occupied = 0;
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) occupied += g.at(r, c, channel::occupancy) > 0;
  CHECK(occupied == 2);
}

TEST_CASE("hole filling") {
  SUBCASE("no holes is a no-op") {
    const RasterGrid g = random_grid(12, 40, 3);
    CHECK(fill_holes_cubic(g) == g);
  }
  SUBCASE("constant neighbours fill with the constant") {
    RasterGrid g(8, 16, {"nx", "ny", "nz", "rho", "occupancy"});
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 16; ++c) {
        g.at(r, c, 2) = 1.0f;
        g.at(r, c, 3) = 2.5f;
        g.at(r, c, 4) = 1.0f;
      }
    g.at(4, 7, 2) = 0.0f;
    g.at(4, 7, 3) = 0.0f;
    g.at(4, 7, 4) = 0.0f;
    const RasterGrid f = fill_holes_cubic(g);
    CHECK(f.at(4, 7, 3) == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(f.at(4, 7, 2) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.at(4, 7, 4) == 0.0f);
  }
  SUBCASE("sinusoid with sparse holes") {
    const int w = 360;
    const double amp = 0.2;
    RasterGrid g(4, w, {"nx", "ny", "nz", "rho", "occupancy"});
    Rng rng(17);
    int run = 0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < w; ++c) {
        const bool hole = run < 2 && c > 0 && rng.uniform() < 0.2;
        run = hole ? run + 1 : 0;
        g.at(r, c, 2) = 1.0f;
        if (hole) continue;
        g.at(r, c, 3) = static_cast<float>(1.0 + amp * std::sin(2.0 * std::numbers::pi * 3.0 * c / w));
        g.at(r, c, 4) = 1.0f;
      }
    }
    const RasterGrid f = fill_holes_cubic(g);
    double worst = 0.0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < w; ++c) {
        const double truth = 1.0 + amp * std::sin(2.0 * std::numbers::pi * 3.0 * c / w);
        worst = std::max(worst, std::abs(f.at(r, c, 3) - truth));
      }
    CHECK(worst < 0.01 * amp);
  }
  SUBCASE("occupied pixels are bit identical") {
    const RasterGrid g = random_grid(20, 50, 4, 0.3);
    const RasterGrid f = fill_holes_cubic(g);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 50; ++c) {
        if (g.at(r, c, 4) == 0.0f) continue;
        for (int ch = 0; ch < 5; ++ch) CHECK(f.at(r, c, ch) == g.at(r, c, ch));
      }
  }
  SUBCASE("empty grid") {
    CHECK_THROWS_AS(fill_holes_cubic(RasterGrid(8, 8, {"nx", "ny", "nz", "rho", "occupancy"})), EmptyInput);
  }
}

TEST_CASE("crop limits") {
  ProjectionConfig cfg;
  cfg.h_min = 0.0;
  cfg.h_max = 1.0;
  const RasterGrid g = random_grid(180, 360, 5);
  CHECK(crop_roi(g, cfg) == g);
  cfg.h_min = 0.5;
  cfg.h_max = 0.52;
  CHECK_THROWS_AS(crop_roi(g, cfg), RoiTooSmall);
}

TEST_CASE("circular shift laws") {
  const RasterGrid g = random_grid(10, 36, 6);
  CHECK(circular_shift(g, 0) == g);
  CHECK(circular_shift(circular_shift(g, 18), 18) == g);
  const RasterGrid s = circular_shift(g, 7);
  CHECK(s.at(3, 7, 1) == g.at(3, 0, 1));
  CHECK(s.at(3, 2, 1) == g.at(3, 31, 1));
  for (int ch = 0; ch < 5; ++ch) {
    auto a = g.channel(ch), b = s.channel(ch);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
  ProjectionConfig cfg;
  const RasterGrid big = random_grid(180, 360, 7);
  CHECK(crop_roi(circular_shift(big, 123), cfg) == circular_shift(crop_roi(big, cfg), 123));
}

TEST_CASE("rotation about z matches a circular shift") {
  const PointCloud cloud = testing::unit_sphere_cloud(50000, 8);
  // move points off bin edges so binning is unambiguous
  PointCloud centred;
  for (const auto& s : cloud.samples) {
    SphericalPoint sp = cartesian_to_spherical(s.position);
    sp.theta = std::floor(sp.theta) + 0.5;
    sp.phi = std::floor(sp.phi) + 0.5;
    const Point3 p = spherical_to_cartesian(sp);
    centred.samples.push_back({p, p});
  }
  // project directly; centring would move the cloud
  ProjectionConfig cfg;
  const int k = 25;
  const RasterGrid a = circular_shift(project_equirectangular(centred, cfg), k);
  const RasterGrid b = project_equirectangular(rotate_about_z(centred, k * cfg.delta), cfg);
  double diff = 0.0;
  for (int ch : {channel::rho, channel::occupancy}) {
    double sa = 0.0, sb = 0.0;
    for (int r = 0; r < a.height(); ++r)
      for (int c = 0; c < a.width(); ++c) {
        sa += a.at(r, c, ch) * a.at(r, c, channel::occupancy);
        sb += b.at(r, c, ch) * b.at(r, c, channel::occupancy);
        CHECK(a.at(r, c, channel::occupancy) == b.at(r, c, channel::occupancy));
      }
    diff = std::max(diff, std::abs(sa - sb) / std::max(1.0, sa));
  }
  CHECK(diff < 1e-6);
}

TEST_CASE("input normalisation") {
  RasterGrid g(8, 8, {"nx", "ny", "nz", "rho", "occupancy"});
  g.at(0, 0, 2) = 1.0f;
  g.at(0, 0, 4) = 1.0f;
  g.at(0, 1, 0) = -1.0f;
  g.at(0, 1, 4) = 1.0f;
  const Tensor<float> t = normalize_input_channels(g);
  REQUIRE(t.shape() == Shape{1, 3, 8, 8});
  CHECK(t.data()[0] == 0.5f);
  CHECK(t.data()[64] == 0.5f);
  CHECK(t.data()[128] == 1.0f);
  CHECK(t.data()[1] == 0.0f);
  CHECK(t.data()[65] == 0.5f);
  CHECK(t.data()[129] == 0.5f);
  // unoccupied pixel with no value is neutral
  CHECK(t.data()[173] == 0.5f);
  const Tensor<float> r = normalize_input_channels(random_grid(16, 16, 9, 0.2));
  for (float v : r.data()) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("SMR1 round trip and bad magic") {
  const auto dir = std::filesystem::temp_directory_path() / "spheremap_proj_tests";
  std::filesystem::create_directories(dir);
  RasterGrid g = random_grid(9, 13, 10, 0.1);
  write_smr1(dir / "g.smr", g);
  const RasterGrid back = read_smr1(dir / "g.smr");
  CHECK(back == g);
  write_channel_png(dir / "g.png", g, channel::rho);
  CHECK(std::filesystem::file_size(dir / "g.png") > 0);
  CHECK_THROWS_AS(read_smr1(dir / "g.png"), ParseError);
}
