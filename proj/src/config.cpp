#include "spheremap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

using nlohmann::json;

// Copies known keys from `j` and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + section_ + "." + it.key() + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + section_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T, typename Fn>
  void get_as(const char* key, T& dst, Fn&& convert) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) dst = convert(s);
  }

  const json* section(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

SigmaMode sigma_mode_from_string(const std::string& s) {
  if (s == "fixed") return SigmaMode::fixed;
  if (s == "adaptive") return SigmaMode::adaptive;
  throw ConfigError("unknown sigma mode '" + s + "'");
}

KernelCombine combine_from_string(const std::string& s) {
  if (s == "max") return KernelCombine::max;
  if (s == "sum") return KernelCombine::sum;
  throw ConfigError("unknown kernel combination '" + s + "'");
}

OutputHead head_from_string(const std::string& s) {
  if (s == "sigmoid") return OutputHead::sigmoid;
  if (s == "linear") return OutputHead::linear;
  throw ConfigError("unknown output head '" + s + "'");
}

void apply_overrides(RunConfig& c, const json& j) {
  Reader root(j, "root");
  std::string preset_unused;
  root.get("preset", preset_unused);
  std::uint64_t seed = c.train.seed;
  root.get("seed", seed);
  c.train.seed = seed;
  root.get("synth_samples", c.synth_samples);

  if (const json* s = root.section("projection")) {
    Reader r(*s, "projection");
    r.get("delta", c.projection.delta);
    r.get("h_min", c.projection.h_min);
    r.get("h_max", c.projection.h_max);
    r.get("wrap_azimuth", c.projection.wrap_azimuth);
  }
  if (const json* s = root.section("gaussian")) {
    Reader r(*s, "gaussian");
    auto& g = c.train.gaussian;
    r.get_as("mode", g.mode, sigma_mode_from_string);
    r.get("sigma", g.sigma);
    r.get("p_t", g.p_t);
    r.get("beta", g.beta);
    r.get("wrap_azimuth", g.wrap_azimuth);
    r.get("truncation_radius", g.truncation_radius);
    r.get_as("combine", g.combine, combine_from_string);
  }
  if (const json* s = root.section("density")) {
    Reader r(*s, "density");
    auto& d = c.train.density;
    r.get("k_neighbors", d.k_neighbors);
    r.get("f", d.f);
    r.get("truncation_radius", d.truncation_radius);
    r.get("fallback_sigma", d.fallback_sigma);
    r.get("wrap_azimuth", d.wrap_azimuth);
  }
  if (const json* s = root.section("network")) {
    Reader r(*s, "network");
    auto& n = c.network;
    r.get("in_channels", n.in_channels);
    r.get("base_width", n.base_width);
    r.get("depth", n.depth);
    r.get_as("upsample", n.upsample, upsample_mode_from_string);
    r.get("out_channels", n.out_channels);
    r.get("batchnorm", n.batchnorm);
    r.get("circular_width", n.circular_width);
    r.get_as("head", n.head, head_from_string);
    r.get("input_height", n.input_height);
    r.get("input_width", n.input_width);
  }
  if (const json* s = root.section("train")) {
    Reader r(*s, "train");
    auto& t = c.train;
    r.get_as("target_mode", t.target_mode, target_mode_from_string);
    if (s->contains("loss")) {
      std::string l;
      r.get("loss", l);
      t.loss = loss_kind_from_string(l);
    } else {
      r.section("loss");
    }
    if (s->contains("lr")) {
      double lr = 0.0;
      r.get("lr", lr);
      t.lr = lr;
    } else {
      r.section("lr");
    }
    r.get("batch_size", t.batch_size);
    r.get("max_epochs", t.max_epochs);
    r.get("plateau_patience", t.plateau_patience);
    r.get("plateau_min_delta", t.plateau_min_delta);
    r.get("augment", t.augment);
    r.get("seed", t.seed);
    r.get("split_fraction", t.split_fraction);
    r.get("val_fraction", t.val_fraction);
    r.get("density_scale", t.density_scale);
    r.get_as("pad_mode", t.pad_mode, pad_mode_from_string);
  }
  if (const json* s = root.section("counting")) {
    Reader r(*s, "counting");
    r.get("min_cluster_size", c.min_cluster_size);
    r.get("nms_beta", c.nms_beta);
  }
  if (const json* s = root.section("synth")) {
    Reader r(*s, "synth");
    auto& y = c.synth;
    r.get("features_min", y.features_min);
    r.get("features_max", y.features_max);
    r.get("a_min", y.a_min);
    r.get("a_max", y.a_max);
    r.get("c_min", y.c_min);
    r.get("c_max", y.c_max);
    r.get("bump_amplitude_min", y.bump_amplitude_min);
    r.get("bump_amplitude_max", y.bump_amplitude_max);
    r.get("bump_angular_radius", y.bump_angular_radius);
    r.get("feature_theta_min", y.feature_theta_min);
    r.get("feature_theta_max", y.feature_theta_max);
    r.get("surface_noise", y.surface_noise);
    r.get("noise_blobs", y.noise_blobs);
    r.get("noise_blob_amplitude", y.noise_blob_amplitude);
    r.get("sample_count", y.sample_count);
  }
}

}  // namespace

void RunConfig::validate() const {
  projection.validate();
  network.validate();
  train.validate();
  synth.validate();
  if (synth_samples < 1) throw ConfigError("synth_samples must be positive");
  if (!(nms_beta > 0.0)) throw ConfigError("nms_beta must be positive");
}

std::vector<std::string> preset_names() { return {"paper-delta-0.5", "paper-delta-1.0", "desk"}; }

RunConfig make_preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.projection.h_min = 0.235;
  c.projection.h_max = 0.765;
  c.train.gaussian.p_t = 0.33;
  c.train.density.f = 10.0;
  c.train.density.k_neighbors = 3;
  if (name == "paper-delta-0.5") {
    c.projection.delta = 0.5;
    c.train.gaussian.sigma = 2.5;
    c.train.gaussian.beta = 5.0;
    c.network.base_width = 64;
  } else if (name == "paper-delta-1.0" || name == "desk") {
    c.projection.delta = 1.0;
    c.train.gaussian.sigma = 1.25;
    c.train.gaussian.beta = 2.5;
    c.network.base_width = name == "desk" ? 8 : 64;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.train.density.fallback_sigma = c.train.gaussian.beta;
  c.nms_beta = c.train.gaussian.beta;
  c.synth.feature_theta_min = c.projection.h_min * 180.0;
  c.synth.feature_theta_max = c.projection.h_max * 180.0;
  if (name == "desk") {
    // Desk-scale training cannot afford the full-scale learning rates.
    c.train.lr = 1e-3;
    c.train.max_epochs = 40;
  }
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = make_preset(j.value("preset", std::string("desk")));
  apply_overrides(c, j);
  configure_for_target(c.network, c.train.target_mode);
  if (j.contains("network") && j["network"].contains("head")) {
    c.network.head = head_from_string(j["network"]["head"].get<std::string>());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json_string(const RunConfig& c) {
  const auto& g = c.train.gaussian;
  const auto& d = c.train.density;
  const auto& n = c.network;
  const auto& t = c.train;
  const auto& y = c.synth;
  json j;
  j["preset"] = c.preset;
  j["seed"] = t.seed;
  j["synth_samples"] = c.synth_samples;
  j["projection"] = {{"delta", c.projection.delta},
                     {"h_min", c.projection.h_min},
                     {"h_max", c.projection.h_max},
                     {"wrap_azimuth", c.projection.wrap_azimuth}};
  j["gaussian"] = {{"mode", g.mode == SigmaMode::fixed ? "fixed" : "adaptive"},
                   {"sigma", g.sigma},
                   {"p_t", g.p_t},
                   {"beta", g.beta},
                   {"wrap_azimuth", g.wrap_azimuth},
                   {"truncation_radius", g.truncation_radius},
                   {"combine", g.combine == KernelCombine::max ? "max" : "sum"}};
  j["density"] = {{"k_neighbors", d.k_neighbors},
                  {"f", d.f},
                  {"truncation_radius", d.truncation_radius},
                  {"fallback_sigma", d.fallback_sigma},
                  {"wrap_azimuth", d.wrap_azimuth}};
  j["network"] = {{"in_channels", n.in_channels},
                  {"base_width", n.base_width},
                  {"depth", n.depth},
                  {"upsample", to_string(n.upsample)},
                  {"out_channels", n.out_channels},
                  {"batchnorm", n.batchnorm},
                  {"circular_width", n.circular_width},
                  {"head", n.head == OutputHead::sigmoid ? "sigmoid" : "linear"},
                  {"input_height", n.input_height},
                  {"input_width", n.input_width}};
  j["train"] = {{"target_mode", to_string(t.target_mode)},
                {"loss", to_string(t.effective_loss())},
                {"lr", t.effective_lr()},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"plateau_patience", t.plateau_patience},
                {"plateau_min_delta", t.plateau_min_delta},
                {"augment", t.augment},
                {"seed", t.seed},
                {"split_fraction", t.split_fraction},
                {"val_fraction", t.val_fraction},
                {"density_scale", t.density_scale},
                {"pad_mode", to_string(t.pad_mode)}};
  j["counting"] = {{"min_cluster_size", c.min_cluster_size}, {"nms_beta", c.nms_beta}};
  j["synth"] = {{"features_min", y.features_min},
                {"features_max", y.features_max},
                {"a_min", y.a_min},
                {"a_max", y.a_max},
                {"c_min", y.c_min},
                {"c_max", y.c_max},
                {"bump_amplitude_min", y.bump_amplitude_min},
                {"bump_amplitude_max", y.bump_amplitude_max},
                {"bump_angular_radius", y.bump_angular_radius},
                {"feature_theta_min", y.feature_theta_min},
                {"feature_theta_max", y.feature_theta_max},
                {"surface_noise", y.surface_noise},
                {"noise_blobs", y.noise_blobs},
                {"noise_blob_amplitude", y.noise_blob_amplitude},
                {"sample_count", y.sample_count}};
  return j.dump(1) + "\n";
}

}  // namespace spheremap
