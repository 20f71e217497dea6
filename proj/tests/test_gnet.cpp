#include <algorithm>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "spheremap/errors.hpp"
#include "spheremap/gnet.hpp"
#include "spheremap/random.hpp"

using namespace spheremap;

namespace {

Tensor<float> random_input(int n, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(n) * 3 * h * w);
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return Tensor<float>({n, 3, h, w}, std::move(v));
}

// Layer-by-layer arithmetic, written out independently of the model code.
std::size_t count_by_layers(int c0, UpsampleMode mode, bool bn) {
  auto conv = [](std::size_t cin, std::size_t cout, std::size_t k, bool bias) {
    return cin * cout * k * k + (bias ? cout : 0);
  };
  auto double_conv = [&](std::size_t cin, std::size_t cout) {
    const std::size_t norm = bn ? 2 * cout : 0;
    return conv(cin, cout, 3, !bn) + norm + conv(cout, cout, 3, !bn) + norm;
  };
  std::size_t total = double_conv(3, c0);
  std::size_t ch = c0;
  for (int i = 0; i < 4; ++i, ch *= 2) total += double_conv(ch, ch * 2);
  for (int i = 0; i < 4; ++i, ch /= 2) {
    const std::size_t half = ch / 2;
    const std::size_t k = mode == UpsampleMode::transpose ? 2 : 3;
    total += conv(ch, half, k, true);
    total += double_conv(ch, half);
  }
  return total + conv(c0, 1, 1, true);
}

double bce(const Tensor<float>& p, const Tensor<float>& y) { return bce_loss(p, y).item(); }

}  // namespace

TEST_CASE("parameter counts") {
  GNetConfig cfg;
  cfg.base_width = 8;
  for (auto mode : {UpsampleMode::transpose_dilated, UpsampleMode::transpose, UpsampleMode::nearest_upsample}) {
    for (bool bn : {true, false}) {
      cfg.upsample = mode;
      cfg.batchnorm = bn;
      const auto model = GNetModel<float>::build(cfg, 1);
      CHECK(model.count_parameters() == count_by_layers(8, mode, bn));
      CHECK(gnet_parameter_count(cfg) == model.count_parameters());
    }
  }
  cfg.batchnorm = true;
  cfg.upsample = UpsampleMode::transpose_dilated;
  CHECK(gnet_parameter_count(cfg) == 540953);
  // a single 3x3 conv from 3 to 8 channels with bias
  CHECK(3 * 3 * 3 * 8 + 8 == 224);
}

TEST_CASE("output shape equals input shape in every mode") {
  GNetConfig cfg;
  cfg.base_width = 4;
  for (auto mode : {UpsampleMode::transpose_dilated, UpsampleMode::transpose, UpsampleMode::nearest_upsample}) {
    cfg.upsample = mode;
    auto model = GNetModel<float>::build(cfg, 3);
    for (int h : {64, 96, 192})
      for (int w : {64, 320, 720}) {
        const Tensor<float> y = model.forward(random_input(1, h, w, h + w), false);
        CHECK(y.shape() == Shape{1, 1, h, w});
        const auto [lo, hi] = std::minmax_element(y.data().begin(), y.data().end());
        CHECK(*lo > 0.0f);
        CHECK(*hi < 1.0f);
      }
  }
}

TEST_CASE("desk model on a full resolution input") {
  GNetConfig cfg;
  auto model = GNetModel<float>::build(cfg, 5);
  const Tensor<float> y = model.forward(random_input(1, 192, 720, 1), false);
  CHECK(y.shape() == Shape{1, 1, 192, 720});
}

TEST_CASE("invalid shapes are rejected") {
  GNetConfig cfg;
  cfg.input_height = 100;
  cfg.input_width = 64;
  CHECK_THROWS_AS(GNetModel<float>::build(cfg, 1), ShapeError);
  cfg.input_height = 0;
  cfg.input_width = 0;
  auto model = GNetModel<float>::build(cfg, 1);
  CHECK_THROWS_AS(model.forward(random_input(1, 40, 64, 2), false), ShapeError);
  cfg.base_width = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("same seed gives identical parameters and deterministic eval") {
  GNetConfig cfg;
  cfg.base_width = 4;
  auto a = GNetModel<float>::build(cfg, 42);
  auto b = GNetModel<float>::build(cfg, 42);
  auto c = GNetModel<float>::build(cfg, 43);
  CHECK(a.state_dict() == b.state_dict());
  CHECK_FALSE(a.state_dict() == c.state_dict());
  const auto x = random_input(2, 32, 64, 3);
  CHECK(a.forward(x, false).values() == a.forward(x, false).values());
}

TEST_CASE("encoder shapes are shared across upsample modes") {
  GNetConfig cfg;
  std::map<std::string, Shape> first;
  bool have = false;
  for (auto mode : {UpsampleMode::transpose_dilated, UpsampleMode::transpose, UpsampleMode::nearest_upsample}) {
    cfg.upsample = mode;
    const auto model = GNetModel<float>::build(cfg, 1);
    const auto names = model.encoder_parameter_names();
    CHECK_FALSE(names.empty());
    std::map<std::string, Shape> shapes;
    for (const auto& p : model.parameters())
      if (std::find(names.begin(), names.end(), p.name) != names.end()) shapes[p.name] = p.tensor.shape();
    CHECK(shapes.size() == names.size());
    if (have) CHECK(shapes == first);
    first = shapes;
    have = true;
  }
}

TEST_CASE("one optimiser step lowers the loss on its sample") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GNetConfig cfg;
    cfg.base_width = 4;
    auto model = GNetModel<float>::build(cfg, seed);
    const auto x = random_input(1, 32, 64, 100 + seed);
    Rng rng(seed);
    std::vector<float> t(32 * 64);
    for (auto& v : t) v = rng.uniform() < 0.1 ? 1.0f : 0.0f;
    const Tensor<float> y({1, 1, 32, 64}, t);
    Adam<float> opt(model.parameters(), {.lr = 1e-3});
    Tensor<float> loss = bce_loss(model.forward(x, true), y);
    const double before = loss.item();
    loss.backward();
    opt.step();
    const double after = bce(model.forward(x, true), y);
    failures += !(after < before);
  }
  CHECK(failures <= 1);
}

TEST_CASE("state dict round trip through SMW1") {
  const auto dir = std::filesystem::temp_directory_path() / "spheremap_gnet_tests";
  std::filesystem::create_directories(dir);
  GNetConfig cfg;
  cfg.base_width = 4;
  auto model = GNetModel<float>::build(cfg, 7);
  const auto x = random_input(2, 32, 64, 9);
  model.forward(x, true);  // moves the running statistics
  write_smw1(dir / "m.smw", model.state_dict());
  write_gnet_config(dir / "m.json", model.config());
  CHECK(read_gnet_config(dir / "m.json") == cfg);
  auto other = GNetModel<float>::build(read_gnet_config(dir / "m.json"), 8);
  other.load_state_dict(read_smw1(dir / "m.smw"));
  CHECK(other.state_dict() == model.state_dict());
  CHECK(other.forward(x, false).values() == model.forward(x, false).values());

  GNetConfig wider = cfg;
  wider.base_width = 8;
  auto mismatch = GNetModel<float>::build(wider, 1);
  CHECK_THROWS_AS(mismatch.load_state_dict(model.state_dict()), ShapeError);
}

TEST_CASE("linear head and circular width") {
  GNetConfig cfg;
  cfg.base_width = 4;
  cfg.head = OutputHead::linear;
  cfg.circular_width = true;
  auto model = GNetModel<float>::build(cfg, 2);
  const Tensor<float> y = model.forward(random_input(1, 32, 64, 4), false);
  CHECK(y.shape() == Shape{1, 1, 32, 64});
  CHECK(upsample_mode_from_string(to_string(UpsampleMode::transpose)) == UpsampleMode::transpose);
  CHECK_THROWS_AS(upsample_mode_from_string("bilinear"), ConfigError);
}
