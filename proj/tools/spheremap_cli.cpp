// Command-line front end: project | maps | train | predict | eval | synth | gradcheck.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "spheremap/config.hpp"
#include "spheremap/counting.hpp"
#include "spheremap/errors.hpp"
#include "spheremap/evaluation.hpp"
#include "spheremap/gradcheck.hpp"
#include "spheremap/mesh_io.hpp"
#include "spheremap/raster_io.hpp"
#include "spheremap/synthbench.hpp"
#include "spheremap/training.hpp"

namespace fs = std::filesystem;
using namespace spheremap;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

struct Globals {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? make_preset(g.preset.empty() ? "desk" : g.preset)
                                        : load_run_config(g.config_path);
  if (!g.config_path.empty() && !g.preset.empty() && g.preset != cfg.preset) {
    throw ConfigError("--preset " + g.preset + " conflicts with the preset in " + g.config_path);
  }
  if (g.seed) cfg.train.seed = *g.seed;
  configure_for_target(cfg.network, cfg.train.target_mode);
  cfg.validate();
  return cfg;
}

fs::path out_or(const Globals& g, const fs::path& fallback) { return g.out.empty() ? fallback : fs::path(g.out); }

RasterGrid load_raster_input(const fs::path& input, const RunConfig& cfg) {
  if (input.extension() == ".smr") return read_smr1(input);
  return project_roi(mesh_to_cloud(read_mesh(input)), cfg.projection);
}

double count_map(const TargetMap& map, const RunConfig& cfg, CountResult* out = nullptr) {
  CountResult r = map.kind == MapKind::density
                      ? count_from_density(map)
                      : count_from_gaussian(map, cfg.train.gaussian.p_t, cfg.min_cluster_size, cfg.train.gaussian.wrap_azimuth);
  if (out) *out = r;
  return r.count;
}

struct LoadedRun {
  RunConfig cfg;
  GNetModel<float> model;
};

LoadedRun load_run(const fs::path& dir) {
  RunConfig cfg = load_run_config(dir / "config.json");
  const GNetConfig net = read_gnet_config(dir / "model.json");
  auto model = GNetModel<float>::build(net, 0);
  model.load_state_dict(read_smw1(dir / "model.smw"));
  cfg.network = net;
  return {cfg, model};
}

int cmd_project(const Globals& g, const std::string& mesh, const std::string& png_dir) {
  const RunConfig cfg = resolve_config(g);
  const RasterGrid roi = project_roi(mesh_to_cloud(read_mesh(mesh)), cfg.projection);
  const fs::path out = out_or(g, fs::path(mesh).stem().string() + ".smr");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_smr1(out, roi);
  if (!png_dir.empty()) {
    fs::create_directories(png_dir);
    for (int c = 0; c < roi.channels(); ++c) write_channel_png(fs::path(png_dir) / (roi.channel_names()[c] + ".png"), roi, c);
  }
  std::printf("wrote %s: %d x %d, rows %d..%d of the full projection\n", out.c_str(), roi.width(), roi.height(),
              roi.row_offset, roi.row_offset + roi.height());
  return kOk;
}

int cmd_maps(const Globals& g, const std::string& annotations) {
  const RunConfig cfg = resolve_config(g);
  const KeypointSet kps = read_annotations(annotations);
  const fs::path out = out_or(g, "maps");
  fs::create_directories(out);
  GaussianMapConfig gc = cfg.train.gaussian;
  gc.mode = SigmaMode::fixed;
  const TargetMap fixed = gaussian_map(kps, gc);
  gc.mode = SigmaMode::adaptive;
  const TargetMap adaptive = gaussian_map(kps, gc);
  const TargetMap dens = density_map(kps, cfg.train.density);
  write_smr1(out / "gaussian_fixed.smr", fixed.to_raster("gaussian_fixed"));
  write_smr1(out / "gaussian_adaptive.smr", adaptive.to_raster("gaussian_adaptive"));
  write_smr1(out / "density.smr", dens.to_raster("density"));
  std::printf("%zu keypoints: gaussian_fixed peak %.6f, gaussian_adaptive peak %.6f, density sum %.6f\n", kps.size(),
              fixed.max(), adaptive.max(), dens.sum());
  return kOk;
}

int cmd_synth(const Globals& g, int n, bool ascii) {
  const RunConfig cfg = resolve_config(g);
  const int count = n > 0 ? n : cfg.synth_samples;
  const fs::path out = out_or(g, "synth");
  const auto samples = generate_dataset(count, cfg.synth, cfg.train.seed);
  write_dataset(out, samples, cfg.synth, cfg.train.seed, cfg.projection,
                ascii ? PlyEncoding::ascii : PlyEncoding::binary_little_endian);
  std::printf("wrote %d samples to %s\n", count, out.c_str());
  return kOk;
}

struct TrainArgs {
  std::string dataset;
  std::string target_mode;
  std::string upsample;
  int epochs = -1;
  double lr = -1.0;
  bool resume = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  RunConfig cfg = resolve_config(g);
  if (!a.target_mode.empty()) cfg.train.target_mode = target_mode_from_string(a.target_mode);
  if (!a.upsample.empty()) cfg.network.upsample = upsample_mode_from_string(a.upsample);
  if (a.epochs >= 0) cfg.train.max_epochs = a.epochs;
  if (a.lr >= 0.0) cfg.train.lr = a.lr;
  configure_for_target(cfg.network, cfg.train.target_mode);
  cfg.validate();
  const fs::path run = out_or(g, "run");

  const auto samples = load_dataset(a.dataset, cfg.projection, cfg.train);
  const Split split = split_dataset(samples.size(), cfg.train.split_fraction, cfg.train.seed);
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.train.val_fraction * split.train.size()));
  std::vector<Sample> train_set, val_set;
  nlohmann::json sj{{"dataset", fs::absolute(a.dataset).string()}};
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const Sample& s = samples[split.train[i]];
    (i < n_val ? val_set : train_set).push_back(s);
    sj[i < n_val ? "val" : "train"].push_back(s.name);
  }
  for (auto i : split.test) sj["test"].push_back(samples[i].name);
  fs::create_directories(run);
  {
    std::ofstream out(run / "split.json");
    out << sj.dump(1) << "\n";
  }

  auto model = GNetModel<float>::build(cfg.network, cfg.train.seed);
  TrainHooks hooks;
  hooks.run_dir = run;
  hooks.resume = a.resume;
  hooks.config_json = to_json_string(cfg);
  hooks.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %4d  train %.6f  val %.6f\n", r.epoch, r.train_loss, r.val_loss);
    std::fflush(stdout);
    return true;
  };
  const TrainResult res = train(model, train_set, val_set, cfg.train, hooks);
  std::printf("best epoch %d, val loss %.6f%s; run directory %s\n", res.best_epoch, res.best_val_loss,
              res.stopped_on_plateau ? " (plateau)" : "", run.c_str());
  return kOk;
}

int cmd_predict(const Globals& g, const std::string& run_dir, const std::string& input, const std::string& map_out) {
  LoadedRun run = load_run(run_dir);
  const RasterGrid raster = load_raster_input(input, run.cfg);
  const Prediction p = predict(run.model, raster, run.cfg.train);
  CountResult r;
  count_map(p.map, run.cfg, &r);
  r.method = p.map.kind == MapKind::density ? "density" : "gaussian";
  const fs::path out = out_or(g, fs::path(input).stem().string() + ".count.json");
  write_count_result(out, r);
  if (!map_out.empty()) write_smr1(map_out, p.map.to_raster());
  std::printf("count %.3f (%s), padded width %d (%s)\n", r.count, r.method.c_str(), p.padded_width, to_string(p.pad_mode));
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& data, const std::vector<std::string>& runs,
             const std::vector<std::string>& methods) {
  RunConfig base = resolve_config(g);
  std::map<std::string, fs::path> run_dirs;
  for (const auto& r : runs) {
    const auto eq = r.find('=');
    if (eq == std::string::npos) throw ConfigError("--run expects NAME=DIR, got '" + r + "'");
    run_dirs[r.substr(0, eq)] = r.substr(eq + 1);
  }
  std::vector<std::string> wanted = methods;
  if (wanted.empty()) {
    for (const auto& [name, dir] : run_dirs) wanted.push_back(name);
    wanted.push_back("nms");
  }
  std::map<std::string, LoadedRun> loaded;
  for (const auto& m : wanted) {
    if (m == "nms") continue;
    if (!run_dirs.count(m)) throw ConfigError("method '" + m + "' has no --run " + m + "=DIR");
    loaded.emplace(m, load_run(run_dirs[m]));
  }
  if (!loaded.empty()) base.projection = loaded.begin()->second.cfg.projection;

  // Test samples: the held-out names of the first run, or the whole directory.
  auto samples = load_dataset(data, base.projection, base.train);
  if (!run_dirs.empty() && fs::exists(run_dirs.begin()->second / "split.json")) {
    std::ifstream in(run_dirs.begin()->second / "split.json");
    nlohmann::json sj;
    in >> sj;
    std::vector<Sample> test;
    for (const auto& name : sj.value("test", nlohmann::json::array())) {
      for (const auto& s : samples) {
        if (s.name == name.get<std::string>()) test.push_back(s);
      }
    }
    samples = std::move(test);
  }
  if (samples.empty()) throw EmptyInput("no test samples to evaluate");

  std::vector<MethodResult> results;
  const fs::path out = out_or(g, "report");
  fs::create_directories(out);
  std::ofstream loc(out / "localization.csv");
  loc << "method,sample,fp,fn,matched\n";
  for (const auto& m : wanted) {
    MethodResult mr{m, {}};
    for (const auto& s : samples) {
      CountResult r;
      if (m == "nms") {
        r = nms_baseline(s.raster, base.nms_beta, base.projection.wrap_azimuth);
      } else {
        LoadedRun& lr = loaded.at(m);
        count_map(predict(lr.model, s.raster, lr.cfg.train).map, lr.cfg, &r);
      }
      mr.pairs.push_back({static_cast<double>(s.keypoints.size()), r.count});
      if (!r.centers.empty() || m == "nms" || r.method == "gaussian") {
        const auto l = fp_fn_localized(r.centers, s.keypoints.points, 3.0, s.raster.width(), base.projection.wrap_azimuth);
        loc << m << ',' << s.name << ',' << l.fp << ',' << l.fn << ',' << l.matches.size() << '\n';
      }
    }
    const auto rep = evaluate_counts(mr.pairs);
    std::printf("%-20s MAE %8.3f  RMSE %8.3f  FP%% %6.2f  FN%% %6.2f  (n=%zu)\n", m.c_str(), rep.mae, rep.rmse, rep.fp_pct,
                rep.fn_pct, rep.n);
    results.push_back(std::move(mr));
  }
  export_report(out, results);
  return kOk;
}

int cmd_gradcheck(int seeds) {
  const auto reports = run_gradcheck_suite(seeds);
  bool ok = true;
  std::printf("%-36s %14s %10s %7s %9s  %s\n", "op", "max rel err", "threshold", "cases", "elements", "result");
  for (const auto& r : reports) {
    std::printf("%-36s %14.3e %10.0e %7d %9zu  %s\n", r.op.c_str(), r.max_rel_error, r.threshold, r.cases, r.elements,
                r.passed() ? "PASS" : "FAIL");
    ok = ok && r.passed();
  }
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Count surface features on spheroids from equirectangular unwrappings"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--preset", g.preset, "paper-delta-0.5 | paper-delta-1.0 | desk");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file or directory");

  std::string mesh, png_dir;
  auto* project = app.add_subcommand("project", "Centre, project, fill and crop a mesh into an SMR1 raster");
  project->add_option("mesh", mesh, "PLY or OBJ mesh")->required();
  project->add_option("--png", png_dir, "Also write one PNG per channel here");

  std::string annotations;
  auto* maps = app.add_subcommand("maps", "Render Gaussian and density targets from annotations");
  maps->add_option("annotations", annotations, "Annotation JSON")->required();

  int n = 0;
  bool ascii = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic spheroid dataset");
  synth->add_option("-n,--count", n, "Number of samples (default from config)");
  synth->add_flag("--ascii", ascii, "Write ASCII PLY");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train on a dataset directory");
  trn->add_option("dataset", ta.dataset, "Dataset directory")->required();
  trn->add_option("--target-mode", ta.target_mode, "gaussian_fixed | gaussian_adaptive | density");
  trn->add_option("--upsample", ta.upsample, "transpose_dilated | transpose | nearest_upsample");
  trn->add_option("--epochs", ta.epochs, "Maximum epochs");
  trn->add_option("--lr", ta.lr, "Learning rate");
  trn->add_flag("--resume", ta.resume, "Continue the run in --out");

  std::string run_dir, input, map_out;
  auto* pred = app.add_subcommand("predict", "Predict a count with a trained run");
  pred->add_option("run", run_dir, "Run directory")->required();
  pred->add_option("input", input, "Mesh or SMR1 raster")->required();
  pred->add_option("--map", map_out, "Also write the predicted map");

  std::string data;
  std::vector<std::string> runs, methods;
  auto* eval = app.add_subcommand("eval", "Compare methods on held-out samples");
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--run", runs, "NAME=RUN_DIR, repeatable");
  eval->add_option("--methods", methods, "Subset of run names plus 'nms'")->delimiter(',');

  int seeds = 20;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every autodiff op");
  grad->add_option("--seeds", seeds, "Random cases per op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*project) return cmd_project(g, mesh, png_dir);
    if (*maps) return cmd_maps(g, annotations);
    if (*synth) return cmd_synth(g, n, ascii);
    if (*trn) return cmd_train(g, ta);
    if (*pred) return cmd_predict(g, run_dir, input, map_out);
    if (*eval) return cmd_eval(g, data, runs, methods);
    if (*grad) return cmd_gradcheck(seeds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergedError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
