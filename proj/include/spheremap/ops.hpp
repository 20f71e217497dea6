#pragma once

#include <vector>

#include "spheremap/tensor.hpp"

namespace spheremap {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  bool circular_width = false;
};

struct ConvTranspose2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int output_padding = 0;
  bool circular_width = false;
};

/// Cross-correlation. input [N,Ci,H,W], weight [Co,Ci,kh,kw], bias [Co] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& opts = {});

/// Adjoint of conv2d w.r.t. its input. weight [Ci,Co,kh,kw].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           const ConvTranspose2dOptions& opts = {});

/// Max over kernel x kernel windows; gradient goes to the first maximal element.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, int kernel = 2, int stride = 2);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);

/// Running statistics of a batchnorm layer (per channel).
template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  static BatchNormStats make(int channels) {
    return {Tensor<T>::zeros({channels}), Tensor<T>::full({channels}, T(1))};
  }
};

/// Per-channel standardization then affine. Training mode uses batch
/// statistics (and updates `stats`); eval mode uses the running statistics.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormStats<T>& stats, bool training, double momentum = 0.1,
                      double eps = 1e-5);

/// Stack along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// 2x nearest-neighbour upsampling of H and W.
template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input);

/// Columns [begin, begin + width) of an [N,C,H,W] tensor.
template <typename T>
Tensor<T> crop_width(const Tensor<T>& input, int begin, int width);

/// Mean binary cross-entropy, predictions clamped to [1e-7, 1 - 1e-7].
/// Gradient flows to `pred` only.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean squared error. Gradient flows to `pred` only.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Scalar sum_i weights[i] * input[i].
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& input, const std::vector<T>& weights);

}  // namespace spheremap
