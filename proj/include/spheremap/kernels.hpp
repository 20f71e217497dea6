#pragma once

#include <span>

namespace spheremap {

/// Shape bookkeeping for one 2D cross-correlation y = w (*) x.
///
/// x is [batch, in_channels, in_height, in_width], w is
/// [out_channels, in_channels, kernel_h, kernel_w], y is
/// [batch, out_channels, out_height, out_width]. Rows are always zero padded;
/// columns are zero padded or, with circular_width, wrapped modulo in_width.
struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int out_channels = 1;
  int out_height = 1;
  int out_width = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  bool circular_width = false;

  int patch_size() const { return in_channels * kernel_h * kernel_w; }
  long long flops() const {
    return 2LL * batch * out_channels * out_height * out_width * patch_size();
  }
};

/// Standard convolution output extent.
inline int conv_output_size(int in, int kernel, int stride, int padding, int dilation) {
  return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
}

/// Transposed convolution output extent.
inline int conv_transpose_output_size(int in, int kernel, int stride, int padding, int dilation,
                                      int output_padding) {
  return (in - 1) * stride - 2 * padding + dilation * (kernel - 1) + output_padding + 1;
}

namespace kernels {

// im2col + GEMM, parallel over (sample, column block) work items. The work
// decomposition does not depend on the thread count, so results are
// bit-identical for any SPHEREMAP_THREADS.

/// y = conv(x, w) + bias (bias may be empty). Overwrites y.
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y);

/// dx += conv^T(dy, w).
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                           std::span<T> dx);

/// dw += dy (x) x, db += sum(dy) (db may be empty).
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> db);

namespace reference {

// Direct nested loops, single threaded. Kept as the test oracle and the
// benchmark baseline for the kernels above.

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                           std::span<T> dx);

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> db);

}  // namespace reference
}  // namespace kernels
}  // namespace spheremap
