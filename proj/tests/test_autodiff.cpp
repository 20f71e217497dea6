#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "spheremap/adam.hpp"
#include "spheremap/checkpoint.hpp"
#include "spheremap/errors.hpp"
#include "spheremap/gradcheck.hpp"
#include "spheremap/kernels.hpp"
#include "spheremap/ops.hpp"
#include "spheremap/parallel.hpp"
#include "spheremap/random.hpp"

using namespace spheremap;
using TD = Tensor<double>;

namespace {

TD random_tensor(const Shape& s, Rng& rng, bool grad = false, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(s));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TD(s, std::move(v), grad);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("conv2d hand examples") {
  const TD x = TD::full({1, 1, 3, 3}, 1.0);
  const TD w = TD::full({1, 1, 3, 3}, 1.0);
  Conv2dOptions o;
  o.padding = 1;
  const TD y = conv2d(x, w, TD{}, o);
  REQUIRE(y.shape() == Shape{1, 1, 3, 3});
  CHECK(y.data()[4] == 9.0);
  CHECK(y.data()[0] == 4.0);
  CHECK(y.data()[1] == 6.0);

  Rng rng(1);
  const TD img = random_tensor({2, 1, 5, 7}, rng);
  std::vector<double> id(9, 0.0);
  id[4] = 1.0;
  const TD yi = conv2d(img, TD({1, 1, 3, 3}, id), TD{}, o);
  CHECK(std::vector<double>(yi.data().begin(), yi.data().end()) == img.values());

  CHECK_THROWS_AS(conv2d(TD::zeros({1, 2, 4, 4}), TD::zeros({1, 3, 3, 3}), TD{}), ShapeError);
}

TEST_CASE("conv_transpose2d sizes and identity") {
  CHECK(conv_transpose_output_size(16, 3, 2, 2, 2, 1) == 32);
  Rng rng(2);
  const TD x = random_tensor({1, 4, 16, 16}, rng);
  ConvTranspose2dOptions o;
  o.stride = 2;
  o.padding = 2;
  o.dilation = 2;
  o.output_padding = 1;
  CHECK(conv_transpose2d(x, random_tensor({4, 3, 3, 3}, rng), TD{}, o).shape() == Shape{1, 3, 32, 32});

  const TD y = conv_transpose2d(x, TD::full({4, 4, 1, 1}, 0.0), TD{});
  CHECK(y.shape() == x.shape());
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  const TD z = conv_transpose2d(x, TD({4, 4, 1, 1}, eye), TD{});
  CHECK(z.values() == x.values());
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  Rng rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const int stride = 1 + trial % 2, dil = 1 + (trial / 2) % 2, pad = trial % 3, k = 2 + trial % 2;
    const int h = 9 + trial % 4, w = 10 + trial % 3;
    const int oh = conv_output_size(h, k, stride, pad, dil), ow = conv_output_size(w, k, stride, pad, dil);
    const TD x = random_tensor({2, 3, h, w}, rng);
    const TD wt = random_tensor({4, 3, k, k}, rng);
    const TD u = random_tensor({2, 4, oh, ow}, rng);
    Conv2dOptions co{stride, pad, dil, false};
    const TD cx = conv2d(x, wt, TD{}, co);
    ConvTranspose2dOptions to{stride, pad, dil, 0, false};
    // pick output_padding so the transposed output recovers the input size
    to.output_padding = h - conv_transpose_output_size(oh, k, stride, pad, dil, 0);
    if (to.output_padding != w - conv_transpose_output_size(ow, k, stride, pad, dil, 0)) continue;
    if (to.output_padding >= std::max(stride, dil)) continue;
    const TD tu = conv_transpose2d(u, wt, TD{}, to);
    REQUIRE(tu.shape() == x.shape());
    const double lhs = dot(cx.data(), u.data()), rhs = dot(x.data(), tu.data());
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("pointwise examples") {
  const TD x({1, 1, 1, 3}, {-1.0, 0.0, 2.0});
  const TD r = relu(x);
  CHECK(r.values() == std::vector<double>{0.0, 0.0, 2.0});
  CHECK(sigmoid(x).data()[1] == 0.5);

  const TD p({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  const TD m = maxpool2d(p);
  CHECK(m.item() == 4.0);
  const TD c = TD::full({1, 1, 2, 2}, 5.0, true);
  TD s = weighted_sum(maxpool2d(c), {1.0});
  s.backward();
  CHECK(std::vector<double>(c.grad().begin(), c.grad().end()) == std::vector<double>{1, 0, 0, 0});

  const TD nan({1}, {std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(sigmoid(nan), NumericError);
}

TEST_CASE("batchnorm statistics") {
  Rng rng(4);
  const TD x = random_tensor({3, 2, 5, 5}, rng, false, -3.0, 7.0);
  auto stats = BatchNormStats<double>::make(2);
  const TD y = batchnorm2d(x, TD::full({2}, 1.0), TD::zeros({2}), stats, true);
  for (int ch = 0; ch < 2; ++ch) {
    double mean = 0.0, var = 0.0;
    int n = 0;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 25; ++i) mean += y.data()[(b * 2 + ch) * 25 + i], ++n;
    mean /= n;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 25; ++i) var += std::pow(y.data()[(b * 2 + ch) * 25 + i] - mean, 2);
    var /= n;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);  // eps in the denominator
  }
  auto fresh = BatchNormStats<double>::make(2);
  const TD e = batchnorm2d(x, TD({2}, {2.0, 3.0}), TD({2}, {0.5, -1.0}), fresh, false);
  const double scale = 1.0 / std::sqrt(1.0 + 1e-5);
  for (int b = 0; b < 3; ++b)
    for (int ch = 0; ch < 2; ++ch)
      for (int i = 0; i < 25; ++i) {
        const std::size_t k = (b * 2 + ch) * 25 + i;
        CHECK(e.data()[k] == doctest::Approx(x.data()[k] * scale * (ch ? 3.0 : 2.0) + (ch ? -1.0 : 0.5)));
      }
}

TEST_CASE("concat and crop") {
  Rng rng(5);
  const TD a = random_tensor({2, 3, 4, 5}, rng), b = random_tensor({2, 1, 4, 5}, rng);
  const TD c = concat_channels(a, b);
  CHECK(c.shape() == Shape{2, 4, 4, 5});
  CHECK(c.data()[(1 * 4 + 3) * 20 + 7] == b.data()[1 * 20 + 7]);
  CHECK(c.data()[(1 * 4 + 2) * 20 + 7] == a.data()[(1 * 3 + 2) * 20 + 7]);
  CHECK_THROWS_AS(concat_channels(a, random_tensor({2, 1, 4, 6}, rng)), ShapeError);
  const TD k = crop_width(a, 1, 3);
  CHECK(k.shape() == Shape{2, 3, 4, 3});
  CHECK(k.data()[0] == a.data()[1]);
}

TEST_CASE("loss examples") {
  const TD y({1, 1, 1, 4}, {0, 1, 1, 0});
  CHECK(bce_loss(y, y).item() <= 1e-6);
  CHECK(bce_loss(TD::full({1, 1, 1, 4}, 0.5), y).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(mse_loss(y, y).item() == 0.0);
  const TD two({1, 1, 1, 4}, {2, 3, 3, 2});
  CHECK(mse_loss(two, y).item() == 4.0);
  CHECK_THROWS_AS(mse_loss(two, TD::zeros({1, 1, 2, 2})), ShapeError);
  CHECK_THROWS_AS(bce_loss(two, TD::zeros({1, 1, 2, 2})), ShapeError);
}

TEST_CASE("finite difference checker sanity") {
  Rng rng(6);
  const auto lin = finite_difference_check([](const std::vector<TD>& in) { return crop_width(in[0], 0, 3); },
                                           {random_tensor({1, 2, 3, 3}, rng, true)});
  CHECK(lin.max_rel_error < 1e-10);
  CHECK(lin.checked == 18);
}

TEST_CASE("gradient check suite passes for every op") {
  const auto reports = run_gradcheck_suite(4, 99);
  CHECK(reports.size() >= 13);
  for (const auto& r : reports) {
    INFO(r.op << " max rel error " << r.max_rel_error);
    CHECK(r.passed());
    CHECK(r.cases >= 4);
  }
}

TEST_CASE("parallel convolution kernels match the reference loops") {
  Rng rng(7);
  for (int trial = 0; trial < 24; ++trial) {
    ConvGeometry g;
    g.batch = 1 + trial % 3;
    g.in_channels = 1 + trial % 4;
    g.out_channels = 1 + (trial * 5) % 6;
    g.in_height = 6 + trial % 5;
    g.in_width = 7 + (trial * 3) % 9;
    g.kernel_h = g.kernel_w = 1 + trial % 3;
    g.stride = 1 + trial % 2;
    g.dilation = 1 + (trial / 3) % 2;
    g.padding = (trial / 2) % 3;
    g.circular_width = trial % 4 == 3;
    if (g.circular_width && g.padding > g.in_width) continue;
    g.out_height = conv_output_size(g.in_height, g.kernel_h, g.stride, g.padding, g.dilation);
    g.out_width = conv_output_size(g.in_width, g.kernel_w, g.stride, g.padding, g.dilation);
    if (g.out_height < 1 || g.out_width < 1) continue;
    auto fill = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& e : v) e = rng.uniform(-1, 1);
      return v;
    };
    const auto x = fill(std::size_t(g.batch) * g.in_channels * g.in_height * g.in_width);
    const auto w = fill(std::size_t(g.out_channels) * g.patch_size());
    const auto b = fill(g.out_channels);
    const auto dy = fill(std::size_t(g.batch) * g.out_channels * g.out_height * g.out_width);
    std::vector<double> y1(dy.size()), y2(dy.size());
    kernels::conv2d_forward<double>(g, x, w, b, y1);
    kernels::reference::conv2d_forward<double>(g, x, w, b, y2);
    std::vector<double> dx1(x.size(), 0.0), dx2(x.size(), 0.0);
    kernels::conv2d_backward_input<double>(g, dy, w, dx1);
    kernels::reference::conv2d_backward_input<double>(g, dy, w, dx2);
    std::vector<double> dw1(w.size(), 0.0), dw2(w.size(), 0.0), db1(b.size(), 0.0), db2(b.size(), 0.0);
    kernels::conv2d_backward_weight<double>(g, x, dy, dw1, db1);
    kernels::reference::conv2d_backward_weight<double>(g, x, dy, dw2, db2);
    auto close = [](const std::vector<double>& a, const std::vector<double>& c) {
      double worst = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - c[i]));
      return worst;
    };
    CHECK(close(y1, y2) < 1e-12);
    CHECK(close(dx1, dx2) < 1e-12);
    CHECK(close(dw1, dw2) < 1e-12);
    CHECK(close(db1, db2) < 1e-12);
  }
}

TEST_CASE("parallel kernels are bit identical across thread counts") {
  Rng rng(8);
  ConvGeometry g{2, 4, 12, 20, 6, 12, 20, 3, 3, 1, 1, 1, false};
  std::vector<float> x(2 * 4 * 12 * 20), w(6 * 4 * 9), y1(2 * 6 * 12 * 20), y2(y1.size());
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
  set_thread_count(1);
  kernels::conv2d_forward<float>(g, x, w, {}, y1);
  set_thread_count(4);
  kernels::conv2d_forward<float>(g, x, w, {}, y2);
  set_thread_count(0);
  CHECK(y1 == y2);
}

TEST_CASE("adam") {
  SUBCASE("first step magnitude is close to lr") {
    TD w = TD::full({3}, 1.0, true);
    Adam<double> opt({{"w", w}}, {.lr = 0.01});
    weighted_sum(w, {2.0, -5.0, 0.3}).backward();
    opt.step();
    for (int i = 0; i < 3; ++i) {
      const double d = std::abs(w.data()[i] - 1.0);
      CHECK(d > 0.99 * 0.01);
      CHECK(d <= 0.01 + 1e-15);
    }
    CHECK_FALSE(w.has_grad());
  }
  SUBCASE("zero gradient and zero lr leave parameters unchanged") {
    TD w = TD::full({2}, 1.5, true);
    Adam<double> opt({{"w", w}}, {.lr = 0.1});
    weighted_sum(w, {0.0, 0.0}).backward();
    opt.step();
    CHECK(w.values() == std::vector<double>{1.5, 1.5});
    TD u = TD::full({2}, 1.5, true);
    Adam<double> frozen({{"u", u}}, {.lr = 0.0});
    weighted_sum(u, {1.0, -1.0}).backward();
    frozen.step();
    CHECK(u.values() == std::vector<double>{1.5, 1.5});
  }
  SUBCASE("converges on a quadratic") {
    TD w = TD::full({1}, 0.0, true);
    Adam<double> opt({{"w", w}}, {.lr = 0.1});
    for (int i = 0; i < 200; ++i) {
      const TD target = TD::full({1}, 3.0);
      // mse over one element is (w - 3)^2
      mse_loss(w, target).backward();
      opt.step();
    }
    CHECK(std::abs(w.data()[0] - 3.0) < 0.05);
  }
  SUBCASE("missing gradient names the parameter") {
    TD w = TD::full({1}, 0.0, true);
    Adam<double> opt({{"head.bias", w}}, {});
    try {
      opt.step();
      FAIL("expected MissingGradient");
    } catch (const MissingGradient& e) {
      CHECK(std::string(e.what()).find("head.bias") != std::string::npos);
    }
  }
}

TEST_CASE("SMW1 round trip is bit exact") {
  const auto dir = std::filesystem::temp_directory_path() / "spheremap_autodiff_tests";
  std::filesystem::create_directories(dir);
  Rng rng(9);
  std::vector<NamedArray> arrays;
  arrays.push_back({"a.weight", {2, 3, 3, 3}, std::vector<float>(54)});
  arrays.push_back({"b", {1}, {std::numeric_limits<float>::denorm_min()}});
  for (auto& v : arrays[0].data) v = static_cast<float>(rng.normal());
  write_smw1(dir / "w.smw", arrays);
  CHECK(read_smw1(dir / "w.smw") == arrays);
  CHECK_THROWS_AS(read_smw1(dir / "missing.smw"), IoError);
}
