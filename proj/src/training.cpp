#include "spheremap/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "spheremap/checkpoint.hpp"
#include "spheremap/errors.hpp"
#include "spheremap/mesh_io.hpp"
#include "spheremap/ops.hpp"
#include "spheremap/synthbench.hpp"

namespace spheremap {

const char* to_string(TargetMode m) {
  switch (m) {
    case TargetMode::gaussian_fixed: return "gaussian_fixed";
    case TargetMode::gaussian_adaptive: return "gaussian_adaptive";
    case TargetMode::density: return "density";
  }
  return "?";
}

TargetMode target_mode_from_string(const std::string& s) {
  if (s == "gaussian_fixed") return TargetMode::gaussian_fixed;
  if (s == "gaussian_adaptive") return TargetMode::gaussian_adaptive;
  if (s == "density") return TargetMode::density;
  throw ConfigError("unknown target mode '" + s + "'");
}

const char* to_string(LossKind l) { return l == LossKind::bce ? "bce" : "mse"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + s + "'");
}

const char* to_string(PadMode p) { return p == PadMode::reflect ? "reflect" : "circular"; }

PadMode pad_mode_from_string(const std::string& s) {
  if (s == "reflect") return PadMode::reflect;
  if (s == "circular") return PadMode::circular;
  throw ConfigError("unknown pad mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(effective_lr() >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_epochs < 0) throw ConfigError("max_epochs must be non-negative");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be positive");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split_fraction must lie in (0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (!(density_scale > 0.0)) throw ConfigError("density_scale must be positive");
  gaussian.validate();
  density.validate();
}

LossKind TrainConfig::effective_loss() const {
  if (loss) return *loss;
  return gaussian_target() ? LossKind::bce : LossKind::mse;
}

double TrainConfig::effective_lr() const {
  if (lr) return *lr;
  return gaussian_target() ? 1e-6 : 1e-5;
}

void configure_for_target(GNetConfig& net, TargetMode mode) {
  net.head = mode == TargetMode::density ? OutputHead::linear : OutputHead::sigmoid;
}

TargetMap make_target(const KeypointSet& kps, const TrainConfig& cfg) {
  switch (cfg.target_mode) {
    case TargetMode::gaussian_fixed: {
      GaussianMapConfig g = cfg.gaussian;
      g.mode = SigmaMode::fixed;
      return gaussian_map(kps, g);
    }
    case TargetMode::gaussian_adaptive: {
      GaussianMapConfig g = cfg.gaussian;
      g.mode = SigmaMode::adaptive;
      return gaussian_map(kps, g);
    }
    case TargetMode::density: return density_map(kps, cfg.density);
  }
  throw ConfigError("unknown target mode");
}

Sample make_sample(std::string name, const PointCloud& cloud, const std::vector<Point3>& centers,
                   const ProjectionConfig& proj, const TrainConfig& cfg) {
  Sample s;
  s.name = std::move(name);
  s.raster = project_roi(cloud, proj);
  s.keypoints = project_features(cloud, centers, proj);
  s.target = make_target(s.keypoints, cfg);
  return s;
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir, const ProjectionConfig& proj,
                                 const TrainConfig& cfg) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> stems;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".ply" || e.path().extension() == ".obj") stems.push_back(e.path());
  }
  std::sort(stems.begin(), stems.end());
  std::vector<Sample> out(stems.size());
  const auto [r0, r1] = proj.roi_rows(proj.height());
  for (std::size_t i = 0; i < stems.size(); ++i) {
    const auto& mesh_path = stems[i];
    auto ann_path = mesh_path;
    ann_path.replace_extension(".json");
    const PointCloud cloud = mesh_to_cloud(read_mesh(mesh_path));
    Sample& s = out[i];
    s.name = mesh_path.stem().string();
    s.raster = project_roi(cloud, proj);

    std::ifstream in(ann_path);
    if (!in) throw IoError("missing annotation " + ann_path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(ann_path.string() + ": " + e.what());
    }
    const bool matches = j.value("delta", 0.0) == proj.delta && j.value("row_offset", 0) == r0 &&
                         j.value("height", 0) == r1 - r0;
    if (!matches && j.contains("features_3d")) {
      std::vector<Point3> centers;
      for (const auto& p : j["features_3d"]) centers.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
      s.keypoints = project_features(cloud, centers, proj);
    } else {
      s.keypoints = read_annotations(ann_path);
      if (s.keypoints.height != s.raster.height() || s.keypoints.width != s.raster.width()) {
        throw ShapeError(ann_path.string() + ": annotation raster " + std::to_string(s.keypoints.height) + "x" +
                         std::to_string(s.keypoints.width) + " does not match projected ROI " +
                         std::to_string(s.raster.height()) + "x" + std::to_string(s.raster.width()));
      }
    }
    s.target = make_target(s.keypoints, cfg);
  }
  return out;
}

Split split_dataset(std::size_t n, double fraction, std::uint64_t seed) {
  if (n < 5) throw DatasetTooSmall("need at least 5 samples to split, got " + std::to_string(n));
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, 0x5b117);
  rng.shuffle(idx);
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  const std::size_t n_train = std::clamp<std::size_t>(k, 1, n - 1);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.test.assign(idx.begin() + n_train, idx.end());
  return s;
}

Sample augment_sample(const Sample& s, int offset) {
  Sample out;
  out.name = s.name;
  out.raster = circular_shift(s.raster, offset);
  out.keypoints = shift_keypoints(s.keypoints, offset);
  out.target = shift_map(s.target, offset);
  return out;
}

Sample augment_sample(const Sample& s, Rng& rng) {
  return augment_sample(s, static_cast<int>(rng.below(static_cast<std::uint64_t>(s.raster.width()))));
}

int padded_width(int width, int divisor) { return (width + divisor - 1) / divisor * divisor; }

Tensor<float> pad_width(const Tensor<float>& x, int width, PadMode mode) {
  if (x.rank() != 4) throw ShapeError("pad_width expects a rank-4 tensor, got " + shape_str(x.shape()));
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (width < W) throw ShapeError("pad_width cannot shrink " + std::to_string(W) + " to " + std::to_string(width));
  if (width == W) return x.detach();
  const int left = (width - W) / 2;
  if (mode == PadMode::reflect && left + 1 > W) throw ShapeError("reflective padding wider than the input");
  std::vector<float> out(static_cast<std::size_t>(N) * C * H * width);
  const auto in = x.data();
  std::vector<int> src(width);
  for (int j = 0; j < width; ++j) {
    int c = j - left;
    if (mode == PadMode::circular) {
      c = ((c % W) + W) % W;
    } else {
      if (c < 0) c = -c;
      if (c >= W) c = 2 * W - 2 - c;
    }
    src[j] = c;
  }
  for (std::size_t plane = 0; plane < static_cast<std::size_t>(N) * C * H; ++plane) {
    const float* row = in.data() + plane * W;
    float* dst = out.data() + plane * width;
    for (int j = 0; j < width; ++j) dst[j] = row[src[j]];
  }
  return Tensor<float>({N, C, H, width}, std::move(out));
}

namespace {

struct Batch {
  Tensor<float> input;   // padded
  Tensor<float> target;  // unpadded
  int width = 0;
  int pad_left = 0;
};

Batch make_batch(const std::vector<const Sample*>& samples, const std::vector<int>& offsets,
                 const TrainConfig& cfg, int divisor) {
  const int B = static_cast<int>(samples.size());
  const int H = samples[0]->raster.height(), W = samples[0]->raster.width();
  std::vector<float> in(static_cast<std::size_t>(B) * 3 * H * W);
  std::vector<float> tg(static_cast<std::size_t>(B) * H * W);
  const double scale = cfg.target_mode == TargetMode::density ? cfg.density_scale : 1.0;
  for (int b = 0; b < B; ++b) {
    const Sample& s = *samples[b];
    if (s.raster.height() != H || s.raster.width() != W || s.target.height != H || s.target.width != W) {
      throw ShapeError("sample '" + s.name + "' does not match the batch raster size");
    }
    const int off = offsets[b];
    const RasterGrid raster = off ? circular_shift(s.raster, off) : s.raster;
    const Tensor<float> x = normalize_input_channels(raster);
    std::copy(x.values().begin(), x.values().end(), in.begin() + static_cast<std::size_t>(b) * 3 * H * W);
    const TargetMap t = off ? shift_map(s.target, off) : s.target;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      tg[static_cast<std::size_t>(b) * H * W + i] = static_cast<float>(t.values[i] * scale);
    }
  }
  Batch batch;
  batch.width = W;
  const int Wp = padded_width(W, divisor);
  batch.pad_left = (Wp - W) / 2;
  batch.input = pad_width(Tensor<float>({B, 3, H, W}, std::move(in)), Wp, cfg.pad_mode);
  batch.target = Tensor<float>({B, 1, H, W}, std::move(tg));
  return batch;
}

Tensor<float> batch_loss(GNetModel<float>& model, const Batch& batch, const TrainConfig& cfg, bool training) {
  Tensor<float> out = model.forward(batch.input, training);
  if (out.dim(3) != batch.width) out = crop_width(out, batch.pad_left, batch.width);
  return cfg.effective_loss() == LossKind::bce ? bce_loss(out, batch.target) : mse_loss(out, batch.target);
}

struct RunState {
  int next_epoch = 0;
  int best_epoch = -1;
  double best_val = 0.0;
  int since_best = 0;
  long long adam_steps = 0;
};

void save_run(const std::filesystem::path& dir, const GNetModel<float>& model, const Adam<float>& opt,
              const RunState& st, const TrainResult& res) {
  write_smw1(dir / "last.smw", model.state_dict());
  std::vector<NamedArray> moments;
  const auto& params = opt.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<std::uint32_t> dims(params[i].tensor.shape().begin(), params[i].tensor.shape().end());
    moments.push_back({"m." + params[i].name, dims, opt.first_moments()[i]});
    moments.push_back({"v." + params[i].name, dims, opt.second_moments()[i]});
  }
  write_smw1(dir / "optimizer.smw", moments);
  if (!res.best_state.empty()) write_smw1(dir / "best.smw", res.best_state);
  nlohmann::json j{{"next_epoch", st.next_epoch},
                   {"best_epoch", st.best_epoch},
                   {"best_val_loss", st.best_val},
                   {"since_best", st.since_best},
                   {"adam_steps", st.adam_steps}};
  std::ofstream out(dir / "state.json");
  out.precision(17);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("cannot write " + (dir / "state.json").string());
}

RunState load_run(const std::filesystem::path& dir, GNetModel<float>& model, Adam<float>& opt, TrainResult& res) {
  std::ifstream in(dir / "state.json");
  if (!in) throw IoError("no resumable run in " + dir.string());
  nlohmann::json j;
  in >> j;
  RunState st;
  st.next_epoch = j.at("next_epoch").get<int>();
  st.best_epoch = j.at("best_epoch").get<int>();
  st.best_val = j.at("best_val_loss").get<double>();
  st.since_best = j.at("since_best").get<int>();
  st.adam_steps = j.at("adam_steps").get<long long>();
  model.load_state_dict(read_smw1(dir / "last.smw"));
  const auto moments = read_smw1(dir / "optimizer.smw");
  const auto& params = opt.parameters();
  if (moments.size() != 2 * params.size()) throw ShapeError("optimizer state does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (moments[2 * i].name != "m." + params[i].name || moments[2 * i + 1].name != "v." + params[i].name ||
        moments[2 * i].data.size() != params[i].tensor.numel()) {
      throw ShapeError("optimizer state entry mismatch at '" + params[i].name + "'");
    }
    opt.first_moments()[i] = moments[2 * i].data;
    opt.second_moments()[i] = moments[2 * i + 1].data;
  }
  opt.set_step_count(st.adam_steps);
  if (std::filesystem::exists(dir / "best.smw")) res.best_state = read_smw1(dir / "best.smw");
  // Reload the history so metrics.csv stays complete.
  std::ifstream csv(dir / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &r.epoch, &r.train_loss, &r.val_loss) == 3 && r.epoch < st.next_epoch) {
      res.history.push_back(r);
    }
  }
  return st;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss);
    out << buf;
  }
}

double evaluate_loss(GNetModel<float>& model, const std::vector<Sample>& set, const TrainConfig& cfg) {
  if (set.empty()) throw EmptyInput("evaluate_loss: empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); i += cfg.batch_size) {
    std::vector<const Sample*> ptrs;
    for (std::size_t k = i; k < std::min(set.size(), i + cfg.batch_size); ++k) ptrs.push_back(&set[k]);
    const Batch b = make_batch(ptrs, std::vector<int>(ptrs.size(), 0), cfg, model.config().divisor());
    total += static_cast<double>(batch_loss(model, b, cfg, false).item()) * ptrs.size();
  }
  return total / set.size();
}

TrainResult train(GNetModel<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw EmptyInput("train: empty training set");
  AdamOptions ao;
  ao.lr = cfg.effective_lr();
  Adam<float> opt(model.parameters(), ao);
  TrainResult res;
  RunState st;

  if (hooks.run_dir) {
    std::filesystem::create_directories(*hooks.run_dir);
    if (hooks.resume) {
      st = load_run(*hooks.run_dir, model, opt, res);
    } else if (!hooks.config_json.empty()) {
      std::ofstream out(*hooks.run_dir / "config.json");
      out << hooks.config_json;
      if (!out) throw IoError("cannot write config.json in " + hooks.run_dir->string());
    }
  }

  const int divisor = model.config().divisor();
  for (int epoch = st.next_epoch; epoch < cfg.max_epochs; ++epoch) {
    // The epoch's batch order and shifts depend only on (seed, epoch).
    Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double sum = 0.0;
    try {
      for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
        std::vector<const Sample*> ptrs;
        std::vector<int> offsets;
        for (std::size_t k = i; k < std::min(order.size(), i + cfg.batch_size); ++k) {
          const Sample& s = train_set[order[k]];
          ptrs.push_back(&s);
          offsets.push_back(cfg.augment ? static_cast<int>(rng.below(static_cast<std::uint64_t>(s.raster.width()))) : 0);
        }
        const Batch b = make_batch(ptrs, offsets, cfg, divisor);
        Tensor<float> loss = batch_loss(model, b, cfg, true);
        if (!std::isfinite(loss.item())) throw NumericError("non-finite training loss");
        loss.backward();
        opt.step();
        ++st.adam_steps;
        sum += static_cast<double>(loss.item()) * ptrs.size();
      }
    } catch (const NumericError& e) {
      throw DivergedError(epoch, e.what());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sum / train_set.size();
    try {
      rec.val_loss = val_set.empty() ? rec.train_loss : evaluate_loss(model, val_set, cfg);
    } catch (const NumericError& e) {
      throw DivergedError(epoch, e.what());
    }
    if (!std::isfinite(rec.val_loss)) throw DivergedError(epoch, "non-finite validation loss");
    res.history.push_back(rec);

    if (st.best_epoch < 0 || rec.val_loss < st.best_val * (1.0 - cfg.plateau_min_delta)) {
      st.best_epoch = epoch;
      st.best_val = rec.val_loss;
      st.since_best = 0;
      res.best_state = model.state_dict();
    } else {
      ++st.since_best;
    }
    st.next_epoch = epoch + 1;
    if (hooks.run_dir) {
      save_run(*hooks.run_dir, model, opt, st, res);
      write_metrics_csv(*hooks.run_dir / "metrics.csv", res.history);
    }
    if (hooks.on_epoch && !hooks.on_epoch(rec)) break;
    if (st.since_best >= cfg.plateau_patience) {
      res.stopped_on_plateau = true;
      break;
    }
  }
  res.best_epoch = st.best_epoch;
  res.best_val_loss = st.best_val;
  if (!res.best_state.empty()) model.load_state_dict(res.best_state);
  if (hooks.run_dir && !res.best_state.empty()) {
    write_smw1(*hooks.run_dir / "model.smw", res.best_state);
    write_gnet_config(*hooks.run_dir / "model.json", model.config());
  }
  return res;
}

Prediction predict(GNetModel<float>& model, const RasterGrid& raster, const TrainConfig& cfg) {
  const int H = raster.height(), W = raster.width();
  const int d = model.config().divisor();
  if (H % d) throw ShapeError("raster height " + std::to_string(H) + " is not divisible by " + std::to_string(d));
  Prediction p;
  p.pad_mode = cfg.pad_mode;
  p.padded_width = padded_width(W, d);
  const Tensor<float> x = pad_width(normalize_input_channels(raster), p.padded_width, cfg.pad_mode);
  Tensor<float> y = model.forward(x, false);
  if (p.padded_width != W) y = crop_width(y, (p.padded_width - W) / 2, W);
  const bool density = model.config().head == OutputHead::linear;
  p.map = TargetMap{H, W, density ? MapKind::density : MapKind::gaussian,
                    std::vector<double>(y.values().begin(), y.values().end())};
  if (density) {
    for (auto& v : p.map.values) v /= cfg.density_scale;
  }
  return p;
}

}  // namespace spheremap
