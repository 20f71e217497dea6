#include "spheremap/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spheremap/kernels.hpp"
#include "spheremap/parallel.hpp"

namespace spheremap {
namespace {

template <typename T>
void require_rank4(const Tensor<T>& t, const char* op, const char* what) {
  if (!t.defined() || t.rank() != 4) {
    throw ShapeError(std::string(op) + ": " + what + " must be [N,C,H,W], got " +
                     (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
  }
}

template <typename T>
void accumulate(std::vector<T>& dst, std::span<const T> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <typename T>
std::span<const T> empty_span() {
  return {};
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& opts) {
  require_rank4(input, "conv2d", "input");
  require_rank4(weight, "conv2d", "weight");
  if (input.dim(1) != weight.dim(1)) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + " has " +
                     std::to_string(input.dim(1)) + " channels but weight " +
                     shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.in_height = input.dim(2);
  g.in_width = input.dim(3);
  g.out_channels = weight.dim(0);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = opts.stride;
  g.padding = opts.padding;
  g.dilation = opts.dilation;
  g.circular_width = opts.circular_width;
  g.out_height = conv_output_size(g.in_height, g.kernel_h, g.stride, g.padding, g.dilation);
  g.out_width = conv_output_size(g.in_width, g.kernel_w, g.stride, g.padding, g.dilation);
  if (g.out_height < 1 || g.out_width < 1 || g.stride < 1 || g.dilation < 1) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + " with weight " +
                     shape_str(weight.shape()) + " gives an empty output");
  }
  if (g.circular_width && g.padding > g.in_width) {
    throw ShapeError("conv2d: circular padding wider than the input");
  }

  Shape out_shape{g.batch, g.out_channels, g.out_height, g.out_width};
  std::vector<T> y(numel(out_shape));
  kernels::conv2d_forward<T>(g, input.data(), weight.data(),
                             bias.defined() ? bias.data() : empty_span<T>(), y);

  auto in_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(y), {input, weight, bias}, "conv2d",
      [g, in_node, w_node, b_node](typename Tensor<T>::Node& self) {
        if (in_node->requires_grad) {
          in_node->ensure_grad();
          kernels::conv2d_backward_input<T>(g, self.grad, w_node->value, in_node->grad);
        }
        const bool want_b = b_node && b_node->requires_grad;
        if (w_node->requires_grad) {
          w_node->ensure_grad();
          std::span<T> db;
          if (want_b) {
            b_node->ensure_grad();
            db = b_node->grad;
          }
          kernels::conv2d_backward_weight<T>(g, in_node->value, self.grad, w_node->grad, db);
        } else if (want_b) {
          b_node->ensure_grad();
          const std::size_t pixels = static_cast<std::size_t>(g.out_height) * g.out_width;
          for (int n = 0; n < g.batch; ++n)
            for (int c = 0; c < g.out_channels; ++c) {
              const T* src = self.grad.data() + (static_cast<std::size_t>(n) * g.out_channels + c) * pixels;
              T s = T(0);
              for (std::size_t j = 0; j < pixels; ++j) s += src[j];
              b_node->grad[c] += s;
            }
        }
      });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           const ConvTranspose2dOptions& opts) {
  require_rank4(input, "conv_transpose2d", "input");
  require_rank4(weight, "conv_transpose2d", "weight");
  if (input.dim(1) != weight.dim(0)) {
    throw ShapeError("conv_transpose2d: input " + shape_str(input.shape()) + " has " +
                     std::to_string(input.dim(1)) + " channels but weight " +
                     shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(0)));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(1))) {
    throw ShapeError("conv_transpose2d: bias " + shape_str(bias.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  }
  if (opts.output_padding < 0 || opts.output_padding >= std::max(opts.stride, opts.dilation)) {
    throw ShapeError("conv_transpose2d: output_padding must be smaller than stride or dilation");
  }
  const int oh = conv_transpose_output_size(input.dim(2), weight.dim(2), opts.stride, opts.padding,
                                            opts.dilation, opts.output_padding);
  const int ow = conv_transpose_output_size(input.dim(3), weight.dim(3), opts.stride, opts.padding,
                                            opts.dilation, opts.output_padding);
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv_transpose2d: input " + shape_str(input.shape()) + " with weight " +
                     shape_str(weight.shape()) + " gives an empty output");
  }
  // The equivalent forward convolution maps the [N,Co,oh,ow] output back to
  // the [N,Ci,H,W] input.
  ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = weight.dim(1);
  g.in_height = oh;
  g.in_width = ow;
  g.out_channels = weight.dim(0);
  g.out_height = input.dim(2);
  g.out_width = input.dim(3);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = opts.stride;
  g.padding = opts.padding;
  g.dilation = opts.dilation;
  g.circular_width = opts.circular_width;

  Shape out_shape{g.batch, g.in_channels, oh, ow};
  std::vector<T> y(numel(out_shape), T(0));
  kernels::conv2d_backward_input<T>(g, input.data(), weight.data(), y);
  if (bias.defined()) {
    const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
    for (int n = 0; n < g.batch; ++n)
      for (int c = 0; c < g.in_channels; ++c) {
        T* dst = y.data() + (static_cast<std::size_t>(n) * g.in_channels + c) * pixels;
        for (std::size_t j = 0; j < pixels; ++j) dst[j] += bias.data()[c];
      }
  }

  auto in_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(y), {input, weight, bias}, "conv_transpose2d",
      [g, in_node, w_node, b_node](typename Tensor<T>::Node& self) {
        if (in_node->requires_grad) {
          in_node->ensure_grad();
          std::vector<T> tmp(in_node->value.size());
          kernels::conv2d_forward<T>(g, self.grad, w_node->value, {}, tmp);
          accumulate<T>(in_node->grad, tmp);
        }
        if (w_node->requires_grad) {
          w_node->ensure_grad();
          kernels::conv2d_backward_weight<T>(g, self.grad, in_node->value, w_node->grad, {});
        }
        if (b_node && b_node->requires_grad) {
          b_node->ensure_grad();
          const std::size_t pixels = static_cast<std::size_t>(g.in_height) * g.in_width;
          for (int n = 0; n < g.batch; ++n)
            for (int c = 0; c < g.in_channels; ++c) {
              const T* src = self.grad.data() + (static_cast<std::size_t>(n) * g.in_channels + c) * pixels;
              T s = T(0);
              for (std::size_t j = 0; j < pixels; ++j) s += src[j];
              b_node->grad[c] += s;
            }
        }
      });
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, int kernel, int stride) {
  require_rank4(input, "maxpool2d", "input");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int oh = (H - kernel) / stride + 1;
  const int ow = (W - kernel) / stride + 1;
  if (H < kernel || W < kernel) {
    throw ShapeError("maxpool2d: input " + shape_str(input.shape()) + " smaller than the window");
  }
  Shape out_shape{N, C, oh, ow};
  std::vector<T> y(numel(out_shape));
  std::vector<std::size_t> argmax(y.size());
  const auto x = input.data();
  const int planes = N * C;
#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int p = 0; p < planes; ++p) {
    const std::size_t in_base = static_cast<std::size_t>(p) * H * W;
    const std::size_t out_base = static_cast<std::size_t>(p) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        std::size_t best = in_base + static_cast<std::size_t>(oy * stride) * W + ox * stride;
        for (int ky = 0; ky < kernel; ++ky)
          for (int kx = 0; kx < kernel; ++kx) {
            const std::size_t idx =
                in_base + static_cast<std::size_t>(oy * stride + ky) * W + ox * stride + kx;
            if (x[idx] > x[best]) best = idx;
          }
        y[out_base + static_cast<std::size_t>(oy) * ow + ox] = x[best];
        argmax[out_base + static_cast<std::size_t>(oy) * ow + ox] = best;
      }
  }
  auto in_node = input.node();
  return Tensor<T>::make_result(std::move(out_shape), std::move(y), {input}, "maxpool2d",
                                [in_node, argmax = std::move(argmax)](typename Tensor<T>::Node& self) {
                                  in_node->ensure_grad();
                                  for (std::size_t i = 0; i < argmax.size(); ++i) {
                                    in_node->grad[argmax[i]] += self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  const auto x = input.data();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  auto in_node = input.node();
  return Tensor<T>::make_result(input.shape(), std::move(y), {input}, "relu",
                                [in_node](typename Tensor<T>::Node& self) {
                                  in_node->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                    if (in_node->value[i] > T(0)) in_node->grad[i] += self.grad[i];
                                  }
                                });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  const auto x = input.data();
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      y[i] = e / (T(1) + e);
    }
  }
  auto in_node = input.node();
  return Tensor<T>::make_result(input.shape(), std::move(y), {input}, "sigmoid",
                                [in_node](typename Tensor<T>::Node& self) {
                                  in_node->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                    const T s = self.value[i];
                                    in_node->grad[i] += self.grad[i] * s * (T(1) - s);
                                  }
                                });
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormStats<T>& stats, bool training, double momentum, double eps) {
  require_rank4(input, "batchnorm2d", "input");
  const int N = input.dim(0), C = input.dim(1);
  const std::size_t HW = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  const std::size_t M = static_cast<std::size_t>(N) * HW;
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &stats.running_mean, &stats.running_var}) {
    if (!t->defined() || t->numel() != static_cast<std::size_t>(C)) {
      throw ShapeError("batchnorm2d: per-channel parameter does not match input " +
                       shape_str(input.shape()));
    }
  }
  const auto x = input.data();
  std::vector<T> y(x.size());
  std::vector<T> xhat(x.size());
  std::vector<double> inv_std(C);
  auto rm = stats.running_mean.data();
  auto rv = stats.running_var.data();
  const auto g = gamma.data();
  const auto b = beta.data();

#pragma omp parallel for num_threads(thread_count()) schedule(static)
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* src = x.data() + (static_cast<std::size_t>(n) * C + c) * HW;
        for (std::size_t j = 0; j < HW; ++j) s += src[j];
      }
      mean = s / static_cast<double>(M);
      double ss = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* src = x.data() + (static_cast<std::size_t>(n) * C + c) * HW;
        for (std::size_t j = 0; j < HW; ++j) {
          const double d = src[j] - mean;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(M);
      const double unbiased = M > 1 ? ss / static_cast<double>(M - 1) : var;
      rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * mean);
      rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * unbiased);
    } else {
      mean = rm[c];
      var = rv[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = is;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
      for (std::size_t j = 0; j < HW; ++j) {
        const T xh = static_cast<T>((x[base + j] - mean) * is);
        xhat[base + j] = xh;
        y[base + j] = g[c] * xh + b[c];
      }
    }
  }

  auto in_node = input.node();
  auto g_node = gamma.node();
  auto b_node = beta.node();
  return Tensor<T>::make_result(
      input.shape(), std::move(y), {input, gamma, beta}, "batchnorm2d",
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](typename Tensor<T>::Node& self) {
        if (in_node->requires_grad) in_node->ensure_grad();
        if (g_node->requires_grad) g_node->ensure_grad();
        if (b_node->requires_grad) b_node->ensure_grad();
        const auto& dy = self.grad;
#pragma omp parallel for num_threads(thread_count()) schedule(static)
        for (int c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (int n = 0; n < N; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
            for (std::size_t j = 0; j < HW; ++j) {
              sum_dy += dy[base + j];
              sum_dy_xh += static_cast<double>(dy[base + j]) * xhat[base + j];
            }
          }
          if (g_node->requires_grad) g_node->grad[c] += static_cast<T>(sum_dy_xh);
          if (b_node->requires_grad) b_node->grad[c] += static_cast<T>(sum_dy);
          if (!in_node->requires_grad) continue;
          const double gc = g_node->value[c];
          const double is = inv_std[c];
          for (int n = 0; n < N; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
            for (std::size_t j = 0; j < HW; ++j) {
              double d;
              if (training) {
                // d/dx of gamma * (x - mean) / std with batch mean and variance.
                d = gc * is / static_cast<double>(M) *
                    (static_cast<double>(M) * dy[base + j] - sum_dy - xhat[base + j] * sum_dy_xh);
              } else {
                d = gc * is * dy[base + j];
              }
              in_node->grad[base + j] += static_cast<T>(d);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank4(a, "concat_channels", "first input");
  require_rank4(b, "concat_channels", "second input");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ outside the channel axis");
  }
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  const std::size_t HW = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  Shape out_shape{N, Ca + Cb, a.dim(2), a.dim(3)};
  std::vector<T> y(numel(out_shape));
  for (int n = 0; n < N; ++n) {
    const T* sa = a.data().data() + static_cast<std::size_t>(n) * Ca * HW;
    const T* sb = b.data().data() + static_cast<std::size_t>(n) * Cb * HW;
    T* dst = y.data() + static_cast<std::size_t>(n) * (Ca + Cb) * HW;
    std::copy(sa, sa + Ca * HW, dst);
    std::copy(sb, sb + Cb * HW, dst + Ca * HW);
  }
  auto a_node = a.node();
  auto b_node = b.node();
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(y), {a, b}, "concat_channels",
      [=](typename Tensor<T>::Node& self) {
        for (int n = 0; n < N; ++n) {
          const T* src = self.grad.data() + static_cast<std::size_t>(n) * (Ca + Cb) * HW;
          if (a_node->requires_grad) {
            a_node->ensure_grad();
            T* da = a_node->grad.data() + static_cast<std::size_t>(n) * Ca * HW;
            for (std::size_t j = 0; j < Ca * HW; ++j) da[j] += src[j];
          }
          if (b_node->requires_grad) {
            b_node->ensure_grad();
            T* db = b_node->grad.data() + static_cast<std::size_t>(n) * Cb * HW;
            for (std::size_t j = 0; j < Cb * HW; ++j) db[j] += src[Ca * HW + j];
          }
        }
      });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input) {
  require_rank4(input, "upsample_nearest2x", "input");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  Shape out_shape{N, C, 2 * H, 2 * W};
  std::vector<T> y(numel(out_shape));
  const auto x = input.data();
  const int planes = N * C;
  for (int p = 0; p < planes; ++p)
    for (int oy = 0; oy < 2 * H; ++oy)
      for (int ox = 0; ox < 2 * W; ++ox) {
        y[(static_cast<std::size_t>(p) * 2 * H + oy) * 2 * W + ox] =
            x[(static_cast<std::size_t>(p) * H + oy / 2) * W + ox / 2];
      }
  auto in_node = input.node();
  return Tensor<T>::make_result(std::move(out_shape), std::move(y), {input}, "upsample_nearest2x",
                                [=](typename Tensor<T>::Node& self) {
                                  in_node->ensure_grad();
                                  for (int p = 0; p < planes; ++p)
                                    for (int oy = 0; oy < 2 * H; ++oy)
                                      for (int ox = 0; ox < 2 * W; ++ox) {
                                        in_node->grad[(static_cast<std::size_t>(p) * H + oy / 2) * W + ox / 2] +=
                                            self.grad[(static_cast<std::size_t>(p) * 2 * H + oy) * 2 * W + ox];
                                      }
                                });
}

template <typename T>
Tensor<T> crop_width(const Tensor<T>& input, int begin, int width) {
  require_rank4(input, "crop_width", "input");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (begin < 0 || width < 1 || begin + width > W) {
    throw ShapeError("crop_width: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + width) + ") outside " + shape_str(input.shape()));
  }
  Shape out_shape{N, C, H, width};
  std::vector<T> y(numel(out_shape));
  const auto x = input.data();
  const std::size_t rows = static_cast<std::size_t>(N) * C * H;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(x.data() + r * W + begin, x.data() + r * W + begin + width, y.data() + r * width);
  }
  auto in_node = input.node();
  return Tensor<T>::make_result(std::move(out_shape), std::move(y), {input}, "crop_width",
                                [=](typename Tensor<T>::Node& self) {
                                  in_node->ensure_grad();
                                  for (std::size_t r = 0; r < rows; ++r)
                                    for (int j = 0; j < width; ++j)
                                      in_node->grad[r * W + begin + j] += self.grad[r * width + j];
                                });
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("bce_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
  const auto p = pred.data();
  const auto y = target.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), lo, hi);
    sum -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  const double n = static_cast<double>(p.size());
  auto p_node = pred.node();
  auto y_node = target.node();
  return Tensor<T>::make_result({1}, {static_cast<T>(sum / n)}, {pred}, "bce_loss",
                                [=](typename Tensor<T>::Node& self) {
                                  p_node->ensure_grad();
                                  const double g = self.grad[0] / n;
                                  for (std::size_t i = 0; i < p_node->value.size(); ++i) {
                                    const double pv = p_node->value[i];
                                    if (pv <= lo || pv >= hi) continue;  // clamp is flat there
                                    const double yv = y_node->value[i];
                                    p_node->grad[i] += static_cast<T>(g * (-yv / pv + (1.0 - yv) / (1.0 - pv)));
                                  }
                                });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  const auto p = pred.data();
  const auto y = target.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - y[i];
    sum += d * d;
  }
  const double n = static_cast<double>(p.size());
  auto p_node = pred.node();
  auto y_node = target.node();
  return Tensor<T>::make_result({1}, {static_cast<T>(sum / n)}, {pred}, "mse_loss",
                                [=](typename Tensor<T>::Node& self) {
                                  p_node->ensure_grad();
                                  const double g = 2.0 * self.grad[0] / n;
                                  for (std::size_t i = 0; i < p_node->value.size(); ++i) {
                                    p_node->grad[i] += static_cast<T>(
                                        g * (static_cast<double>(p_node->value[i]) - y_node->value[i]));
                                  }
                                });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& input, const std::vector<T>& weights) {
  if (weights.size() != input.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                     shape_str(input.shape()));
  }
  const auto x = input.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += static_cast<double>(weights[i]) * x[i];
  auto in_node = input.node();
  return Tensor<T>::make_result({1}, {static_cast<T>(sum)}, {input}, "weighted_sum",
                                [=](typename Tensor<T>::Node& self) {
                                  in_node->ensure_grad();
                                  for (std::size_t i = 0; i < weights.size(); ++i) {
                                    in_node->grad[i] += self.grad[0] * weights[i];
                                  }
                                });
}

#define SPHEREMAP_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                            const Conv2dOptions&);                                                \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                      const ConvTranspose2dOptions&);                             \
  template Tensor<T> maxpool2d(const Tensor<T>&, int, int);                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                 BatchNormStats<T>&, bool, double, double);                       \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                        \
  template Tensor<T> crop_width(const Tensor<T>&, int, int);                                      \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> weighted_sum(const Tensor<T>&, const std::vector<T>&);

SPHEREMAP_INSTANTIATE_OPS(float)
SPHEREMAP_INSTANTIATE_OPS(double)

#undef SPHEREMAP_INSTANTIATE_OPS

}  // namespace spheremap
