#include <algorithm>
#include <numeric>

#include "spheremap/gradcheck.hpp"
#include "spheremap/kernels.hpp"
#include "spheremap/ops.hpp"
#include "spheremap/random.hpp"

namespace spheremap {
namespace {

using T = Tensor<double>;

T random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool rg = true) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return T(shape, std::move(v), rg);
}

// Distinct values spaced well beyond the finite-difference step, in random order.
T separated_tensor(const Shape& shape, Rng& rng) {
  std::vector<double> v(numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -1.0 + 0.01 * static_cast<double>(i);
  rng.shuffle(v);
  return T(shape, std::move(v), true);
}

// Uniform values with magnitude at least `gap`, so relu never straddles zero.
T away_from_zero(const Shape& shape, Rng& rng, double gap) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) {
    x = rng.uniform(gap, 1.0);
    if (rng.uniform() < 0.5) x = -x;
  }
  return T(shape, std::move(v), true);
}

void record(OpCheckReport& rep, const GradCheckResult& r) {
  rep.max_rel_error = std::max(rep.max_rel_error, r.max_rel_error);
  rep.elements += r.checked;
  ++rep.cases;
}

}  // namespace

std::vector<OpCheckReport> run_gradcheck_suite(int n_seeds, std::uint64_t base_seed) {
  OpCheckReport conv{"conv2d", 0, 1e-6}, convt{"conv_transpose2d", 0, 1e-6},
      convt_gnet{"conv_transpose2d[k3 s2 d2 p2 op1]", 0, 1e-6}, pool{"maxpool2d", 0, 1e-6},
      rel{"relu", 0, 1e-6}, sig{"sigmoid", 0, 1e-6}, bn{"batchnorm2d[train]", 0, 1e-5},
      bn_eval{"batchnorm2d[eval]", 0, 1e-5}, cat{"concat_channels", 0, 1e-6}, bce{"bce_loss", 0, 1e-6},
      mse{"mse_loss", 0, 1e-6}, up{"upsample_nearest2x", 0, 1e-6}, crop{"crop_width", 0, 1e-6},
      net{"two-layer net", 0, 1e-5};

  for (int s = 0; s < n_seeds; ++s) {
    Rng rng = Rng::derive(base_seed, static_cast<std::uint64_t>(s));
    const int N = static_cast<int>(rng.between(1, 2));
    const int Ci = static_cast<int>(rng.between(1, 3));
    const int Co = static_cast<int>(rng.between(1, 3));
    const int H = static_cast<int>(rng.between(5, 8));
    const int W = static_cast<int>(rng.between(5, 8));
    const std::uint64_t wseed = rng.next();

    {
      Conv2dOptions o;
      o.stride = static_cast<int>(rng.between(1, 2));
      o.dilation = static_cast<int>(rng.between(1, 2));
      o.padding = static_cast<int>(rng.between(0, 2));
      o.circular_width = rng.uniform() < 0.3;
      const int k = static_cast<int>(rng.between(1, 3));
      if (conv_output_size(H, k, o.stride, o.padding, o.dilation) >= 1 &&
          conv_output_size(W, k, o.stride, o.padding, o.dilation) >= 1) {
        record(conv, finite_difference_check(
                         [o](const std::vector<T>& in) { return conv2d(in[0], in[1], in[2], o); },
                         {random_tensor({N, Ci, H, W}, rng), random_tensor({Co, Ci, k, k}, rng),
                          random_tensor({Co}, rng)},
                         1e-4, wseed));
      }
    }
    {
      ConvTranspose2dOptions o;
      o.stride = static_cast<int>(rng.between(1, 2));
      o.dilation = static_cast<int>(rng.between(1, 2));
      o.padding = static_cast<int>(rng.between(0, 1));
      o.output_padding = static_cast<int>(rng.between(0, std::max(o.stride, o.dilation) - 1));
      const int k = static_cast<int>(rng.between(1, 3));
      const int h = static_cast<int>(rng.between(3, 5)), w = static_cast<int>(rng.between(3, 5));
      if (conv_transpose_output_size(h, k, o.stride, o.padding, o.dilation, o.output_padding) >= 1 &&
          conv_transpose_output_size(w, k, o.stride, o.padding, o.dilation, o.output_padding) >= 1) {
        record(convt, finite_difference_check(
                          [o](const std::vector<T>& in) { return conv_transpose2d(in[0], in[1], in[2], o); },
                          {random_tensor({N, Ci, h, w}, rng), random_tensor({Ci, Co, k, k}, rng),
                           random_tensor({Co}, rng)},
                          1e-4, wseed));
      }
    }
    {
      const ConvTranspose2dOptions o{2, 2, 2, 1, false};
      const int h = static_cast<int>(rng.between(2, 4)), w = static_cast<int>(rng.between(2, 4));
      record(convt_gnet, finite_difference_check(
                             [o](const std::vector<T>& in) { return conv_transpose2d(in[0], in[1], in[2], o); },
                             {random_tensor({N, Ci, h, w}, rng), random_tensor({Ci, Co, 3, 3}, rng),
                              random_tensor({Co}, rng)},
                             1e-4, wseed));
    }
    record(pool, finite_difference_check([](const std::vector<T>& in) { return maxpool2d(in[0], 2, 2); },
                                         {separated_tensor({N, Ci, 2 * (H / 2), 2 * (W / 2)}, rng)}, 1e-4, wseed));
    record(rel, finite_difference_check([](const std::vector<T>& in) { return relu(in[0]); },
                                        {away_from_zero({N, Ci, H, W}, rng, 0.01)}, 1e-4, wseed));
    record(sig, finite_difference_check([](const std::vector<T>& in) { return sigmoid(in[0]); },
                                        {random_tensor({N, Ci, H, W}, rng, -3.0, 3.0)}, 1e-4, wseed));
    {
      const int C = Ci + 1;
      auto stats = std::make_shared<BatchNormStats<double>>(BatchNormStats<double>::make(C));
      record(bn, finite_difference_check(
                     [stats](const std::vector<T>& in) { return batchnorm2d(in[0], in[1], in[2], *stats, true); },
                     {random_tensor({2, C, H, W}, rng), random_tensor({C}, rng, 0.5, 1.5),
                      random_tensor({C}, rng)},
                     1e-4, wseed));
      BatchNormStats<double> fixed{random_tensor({C}, rng, -0.5, 0.5, false), random_tensor({C}, rng, 0.5, 2.0, false)};
      auto fstats = std::make_shared<BatchNormStats<double>>(fixed);
      record(bn_eval, finite_difference_check(
                          [fstats](const std::vector<T>& in) { return batchnorm2d(in[0], in[1], in[2], *fstats, false); },
                          {random_tensor({N, C, H, W}, rng), random_tensor({C}, rng, 0.5, 1.5), random_tensor({C}, rng)},
                          1e-4, wseed));
    }
    record(cat, finite_difference_check([](const std::vector<T>& in) { return concat_channels(in[0], in[1]); },
                                        {random_tensor({N, Ci, H, W}, rng), random_tensor({N, Co, H, W}, rng)}, 1e-4,
                                        wseed));
    {
      // Targets at least 0.1 from the prediction: where p == y the gradient
      // vanishes and the relative error measures only rounding.
      const T pred = random_tensor({N, 1, H, W}, rng, 0.05, 0.95);
      std::vector<double> y(pred.numel());
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = pred.data()[i];
        const double lo = std::max(0.0, p - 0.1), hi = std::min(1.0, p + 0.1);
        const double u = rng.uniform(0.0, 1.0 - (hi - lo));
        y[i] = u < lo ? u : u + (hi - lo);
      }
      const T target(pred.shape(), std::move(y), false);
      record(bce, finite_difference_check([target](const std::vector<T>& in) { return bce_loss(in[0], target); },
                                          {pred}, 1e-5, wseed));
      record(mse, finite_difference_check([target](const std::vector<T>& in) { return mse_loss(in[0], target); },
                                          {T(pred.shape(), pred.values(), true)}, 1e-4, wseed));
    }
    record(up, finite_difference_check([](const std::vector<T>& in) { return upsample_nearest2x(in[0]); },
                                       {random_tensor({N, Ci, 3, 4}, rng)}, 1e-4, wseed));
    {
      const int b = static_cast<int>(rng.between(0, 2));
      record(crop, finite_difference_check([b](const std::vector<T>& in) { return crop_width(in[0], b, 3); },
                                           {random_tensor({N, Ci, H, W}, rng)}, 1e-4, wseed));
    }
    {
      // conv -> sigmoid -> conv -> sigmoid -> bce, smooth end to end.
      const T target = random_tensor({N, 1, 6, 6}, rng, 0.0, 1.0, false);
      Conv2dOptions o;
      o.padding = 1;
      record(net, finite_difference_check(
                      [target, o](const std::vector<T>& in) {
                        T h = sigmoid(conv2d(in[0], in[1], in[2], o));
                        return bce_loss(sigmoid(conv2d(h, in[3], in[4], o)), target);
                      },
                      {random_tensor({N, 2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng),
                       random_tensor({1, 3, 3, 3}, rng), random_tensor({1}, rng)},
                      1e-4, wseed));
    }
  }
  return {conv, convt, convt_gnet, pool, rel, sig, bn, bn_eval, cat, bce, mse, up, crop, net};
}

}  // namespace spheremap
