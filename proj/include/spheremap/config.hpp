#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spheremap/gnet.hpp"
#include "spheremap/projection.hpp"
#include "spheremap/synthbench.hpp"
#include "spheremap/targetmaps.hpp"
#include "spheremap/training.hpp"

namespace spheremap {

/// Everything a pipeline run needs, loadable from one JSON file.
struct RunConfig {
  std::string preset = "desk";
  ProjectionConfig projection;
  GNetConfig network;
  TrainConfig train;
  SpecRanges synth;
  int synth_samples = 80;
  std::size_t min_cluster_size = 1;
  double nms_beta = 2.5;

  void validate() const;
};

std::vector<std::string> preset_names();

/// Throws ConfigError for unknown names.
RunConfig make_preset(const std::string& name);

/// Preset named by the file's "preset" key (default "desk"), then the
/// file's values on top. Unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text);

std::string to_json_string(const RunConfig& cfg);

}  // namespace spheremap
