#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spheremap/gnet.hpp"
#include "spheremap/projection.hpp"
#include "spheremap/random.hpp"
#include "spheremap/raster.hpp"
#include "spheremap/targetmaps.hpp"

namespace spheremap {

enum class TargetMode { gaussian_fixed, gaussian_adaptive, density };
enum class LossKind { bce, mse };
enum class PadMode { reflect, circular };

const char* to_string(TargetMode m);
TargetMode target_mode_from_string(const std::string& s);
const char* to_string(LossKind l);
LossKind loss_kind_from_string(const std::string& s);
const char* to_string(PadMode p);
PadMode pad_mode_from_string(const std::string& s);

struct TrainConfig {
  TargetMode target_mode = TargetMode::gaussian_adaptive;
  std::optional<LossKind> loss;  // default: bce for gaussian targets, mse for density
  std::optional<double> lr;      // default: 1e-6 gaussian, 1e-5 density
  int batch_size = 4;
  int max_epochs = 100;
  int plateau_patience = 20;
  double plateau_min_delta = 0.005;  // relative improvement that resets patience
  bool augment = true;
  std::uint64_t seed = 0;
  double split_fraction = 0.8;
  double val_fraction = 0.1;   // carved from the training part
  double density_scale = 100.0;  // density targets are multiplied by this for training
  PadMode pad_mode = PadMode::reflect;
  GaussianMapConfig gaussian;
  DensityMapConfig density;

  void validate() const;
  LossKind effective_loss() const;
  double effective_lr() const;
  bool gaussian_target() const { return target_mode != TargetMode::density; }
};

/// One training example: the ROI raster, its keypoints and the cached target.
struct Sample {
  std::string name;
  RasterGrid raster;
  KeypointSet keypoints;
  TargetMap target;
};

/// Target for `kps` under the configured regime.
TargetMap make_target(const KeypointSet& kps, const TrainConfig& cfg);

/// Build a sample from a cloud and its 3D feature centres.
Sample make_sample(std::string name, const PointCloud& cloud, const std::vector<Point3>& centers,
                   const ProjectionConfig& proj, const TrainConfig& cfg);

/// Reads NNN.ply / NNN.json pairs in name order. Keypoints are recomputed from
/// the stored 3D centres when the annotation was written for another projection.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, const ProjectionConfig& proj,
                                 const TrainConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Deterministic shuffled split; round(fraction * n) go to `train`.
Split split_dataset(std::size_t n, double fraction, std::uint64_t seed);

/// Same circular shift applied to raster, keypoints and target.
Sample augment_sample(const Sample& s, int offset);
Sample augment_sample(const Sample& s, Rng& rng);

/// Pad the width of an [N,C,H,W] tensor to `width`, splitting the padding
/// evenly (extra column on the right). Not differentiable.
Tensor<float> pad_width(const Tensor<float>& x, int width, PadMode mode);
int padded_width(int width, int divisor);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  bool stopped_on_plateau = false;
  std::vector<NamedArray> best_state;
};

struct TrainHooks {
  /// Called after each epoch; return false to stop.
  std::function<bool(const EpochRecord&)> on_epoch;
  /// Run directory for config, metrics and checkpoints (optional).
  std::optional<std::filesystem::path> run_dir;
  /// Continue from the checkpoint in run_dir.
  bool resume = false;
  /// Written verbatim to run_dir/config.json.
  std::string config_json;
};

/// Mini-batch Adam training with plateau stopping on validation loss. On
/// return the model holds the best-validation weights. Throws DivergedError
/// when the loss becomes non-finite.
TrainResult train(GNetModel<float>& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Mean loss of the model over a set, eval mode, no augmentation.
double evaluate_loss(GNetModel<float>& model, const std::vector<Sample>& set, const TrainConfig& cfg);

struct Prediction {
  TargetMap map;  // in target units (density undone from the training scale)
  int padded_width = 0;
  PadMode pad_mode = PadMode::reflect;
};

Prediction predict(GNetModel<float>& model, const RasterGrid& raster, const TrainConfig& cfg);

/// Network head and loss that match the regime.
void configure_for_target(GNetConfig& net, TargetMode mode);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace spheremap
