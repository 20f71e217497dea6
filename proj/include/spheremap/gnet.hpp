#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spheremap/adam.hpp"
#include "spheremap/checkpoint.hpp"
#include "spheremap/ops.hpp"
#include "spheremap/random.hpp"
#include "spheremap/tensor.hpp"

namespace spheremap {

enum class UpsampleMode { nearest_upsample, transpose, transpose_dilated };
enum class OutputHead { sigmoid, linear };

const char* to_string(UpsampleMode m);
UpsampleMode upsample_mode_from_string(const std::string& s);

struct GNetConfig {
  int in_channels = 3;
  int base_width = 8;
  int depth = 5;  // number of scales
  UpsampleMode upsample = UpsampleMode::transpose_dilated;
  int out_channels = 1;
  bool batchnorm = true;
  bool circular_width = false;  // wrap convolutions across the width
  OutputHead head = OutputHead::sigmoid;
  int input_height = 0;  // optional, checked for divisibility at build time
  int input_width = 0;

  void validate() const;
  int divisor() const { return 1 << (depth - 1); }
  bool operator==(const GNetConfig&) const = default;
};

void write_gnet_config(const std::filesystem::path& path, const GNetConfig& cfg);
GNetConfig read_gnet_config(const std::filesystem::path& path);

/// Encoder-decoder with skip connections. Parameters are created in a fixed
/// order from the seed, so the same (config, seed) always gives the same model.
/// Copies share parameter storage.
template <typename T>
class GNetModel {
 public:
  static GNetModel build(const GNetConfig& cfg, std::uint64_t seed);

  /// [N, in_channels, H, W] -> [N, out_channels, H, W]; H and W must be
  /// multiples of 2^(depth-1).
  Tensor<T> forward(const Tensor<T>& input, bool training);

  const GNetConfig& config() const { return cfg_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::size_t count_parameters() const;

  /// Parameters followed by batchnorm running statistics.
  std::vector<NamedArray> state_dict() const;
  /// Throws ShapeError when names or dims differ from this model's.
  void load_state_dict(const std::vector<NamedArray>& state);

  /// Names of the parameters that belong to the encoder path.
  std::vector<std::string> encoder_parameter_names() const;

 private:
  struct Conv {
    Tensor<T> weight;
    Tensor<T> bias;  // undefined when followed by batchnorm
  };
  struct Norm {
    Tensor<T> gamma;
    Tensor<T> beta;
    BatchNormStats<T> stats;
    std::string name;
  };
  struct DoubleConv {
    Conv conv1, conv2;
    Norm bn1, bn2;
  };
  struct UpStage {
    Conv up;  // transposed conv, or the conv after nearest upsampling
    DoubleConv block;
  };

  DoubleConv make_double_conv(const std::string& name, int cin, int cout, Rng& rng);
  Conv make_conv(const std::string& name, int cin, int cout, int k, bool bias, Rng& rng);
  Conv make_conv_transpose(const std::string& name, int cin, int cout, int k, Rng& rng);
  Norm make_norm(const std::string& name, int c);
  Tensor<T> run_double_conv(DoubleConv& b, const Tensor<T>& x, bool training);
  Tensor<T> init_uniform(const Shape& shape, double bound, Rng& rng);
  template <typename Fn>
  void for_each_norm(Fn&& fn);

  GNetConfig cfg_;
  DoubleConv inc_;
  std::vector<DoubleConv> downs_;
  std::vector<UpStage> ups_;
  Conv head_;
  std::vector<Parameter<T>> params_;
  std::size_t encoder_param_count_ = 0;
};

/// Closed-form parameter count of a configuration.
std::size_t gnet_parameter_count(const GNetConfig& cfg);

}  // namespace spheremap
