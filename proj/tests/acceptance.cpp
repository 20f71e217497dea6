// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "spheremap/config.hpp"
#include "spheremap/counting.hpp"
#include "spheremap/evaluation.hpp"
#include "spheremap/geometry.hpp"
#include "spheremap/gnet.hpp"
#include "spheremap/gradcheck.hpp"
#include "spheremap/parallel.hpp"
#include "spheremap/projection.hpp"
#include "spheremap/random.hpp"
#include "spheremap/synthbench.hpp"
#include "spheremap/targetmaps.hpp"
#include "spheremap/training.hpp"

namespace fs = std::filesystem;
using namespace spheremap;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) {
  std::printf("    %s\n", s.c_str());
  std::fflush(stdout);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Rasters and keypoints of the benchmark spheroids. Targets are rebuilt per
// training regime, so the point clouds are dropped after projection.
struct Projected {
  std::string name;
  RasterGrid raster;
  KeypointSet keypoints;
};

struct Benchmark {
  RunConfig cfg;
  std::vector<Projected> train, val, test;
  std::map<std::string, fs::path> runs;  // trained run directories by label
};

std::vector<Sample> as_samples(const std::vector<Projected>& in, const TrainConfig& tc) {
  std::vector<Sample> out;
  out.reserve(in.size());
  for (const auto& p : in) out.push_back({p.name, p.raster, p.keypoints, make_target(p.keypoints, tc)});
  return out;
}

class Acceptance {
 public:
  explicit Acceptance(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

  Verdict geometry_round_trip();
  Verdict projection_shapes();
  Verdict gradient_checks();
  Verdict target_maps();
  Verdict counting();
  Verdict overfit();
  Verdict synthetic_benchmark();
  Verdict unannotated_region();
  Verdict throughput();
  Verdict determinism();

 private:
  Benchmark& bench();
  fs::path train_run(const std::string& label, TargetMode mode, UpsampleMode up);
  GNetModel<float> load_model(const fs::path& run, RunConfig* cfg_out = nullptr);

  fs::path work_;
  std::optional<Benchmark> bench_;
};

// ---------------------------------------------------------------------------

Verdict Acceptance::geometry_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const SphericalPoint s{rng.uniform(1e-3, 1e3), rng.uniform(1e-2, 180.0 - 1e-2), rng.uniform(-180.0 + 1e-2, 180.0)};
    const SphericalPoint r = cartesian_to_spherical(spherical_to_cartesian(s));
    worst = std::max({worst, std::abs(r.rho - s.rho) / s.rho, std::abs(r.theta - s.theta) / s.theta,
                      std::abs(r.phi - s.phi) / std::abs(s.phi)});
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 1.0, fmt("max relative error %.3e (< 1e-9), %.4f s (< 1 s)", worst, t)};
}

Verdict Acceptance::projection_shapes() {
  bool ok = true;
  std::string detail;
  PointCloud cloud;
  Rng rng(3);
  for (int i = 0; i < 20000; ++i) {
    const Point3 p = Point3{rng.normal(), rng.normal(), rng.normal()}.normalized();
    cloud.samples.push_back({p, p});
  }
  for (double delta : {1.0, 0.5}) {
    ProjectionConfig cfg;
    cfg.delta = delta;
    const RasterGrid full = project_equirectangular(cloud, cfg);
    const auto [r0, r1] = cfg.roi_rows(full.height());
    const RasterGrid roi = crop_roi(full, cfg);
    const int want_w = delta == 1.0 ? 360 : 720, want_h = delta == 1.0 ? 180 : 360;
    const int want_r0 = delta == 1.0 ? 42 : 84, want_r1 = delta == 1.0 ? 138 : 276;
    ok &= full.width() == want_w && full.height() == want_h && r0 == want_r0 && r1 == want_r1 &&
          roi.height() == r1 - r0 && roi.width() == want_w && roi.row_offset == r0;
    detail += fmt("delta %.1f: %dx%d, ROI rows [%d,%d) -> %dx%d; ", delta, full.width(), full.height(), r0, r1,
                  roi.width(), roi.height());
  }
  return {ok, detail + "expected 360x180 [42,138) and 720x360 [84,276)"};
}

Verdict Acceptance::gradient_checks() {
  const auto t0 = Clock::now();
  const auto reports = run_gradcheck_suite(20, 1);
  const double t = seconds_since(t0);
  bool ok = t < 120.0;
  double worst = 0.0;
  for (const auto& r : reports) {
    note(fmt("%-36s cases %3d  elements %7zu  max rel error %.3e", r.op.c_str(), r.cases, r.elements, r.max_rel_error));
    ok &= r.max_rel_error < 1e-5 && r.cases >= 20;
    worst = std::max(worst, r.max_rel_error);
  }
  return {ok, fmt("%zu ops x 20 seeds, worst %.3e (< 1e-5), %.1f s (< 120 s)", reports.size(), worst, t)};
}

Verdict Acceptance::target_maps() {
  const RunConfig desk = make_preset("desk");
  bool peak_ok = true, sum_ok = true, shift_ok = true;
  double worst_sum = 0.0;

  // Peak and density mass over random keypoint sets.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 77);
    const int n = 1 + static_cast<int>(rng.below(350));
    KeypointSet k{96, 360, 1.0, 42, {}};
    for (int i = 0; i < n; ++i) k.points.push_back({rng.uniform(0.0, 95.0), rng.uniform(0.0, 360.0)});
    for (auto mode : {SigmaMode::fixed, SigmaMode::adaptive}) {
      GaussianMapConfig g = desk.train.gaussian;
      g.mode = mode;
      peak_ok &= gaussian_map(k, g).max() == 1.0;
    }
    const double err = std::abs(density_map(k, desk.train.density).sum() - n);
    worst_sum = std::max(worst_sum, err / n);
    sum_ok &= err <= 1e-6 * n;
  }

  // Shift equivariance on keypoints produced by the synthetic pipeline.
  SpecRanges ranges = desk.synth;
  ranges.sample_count = 30000;
  const auto specs = draw_specs(4, ranges, 404);
  int shifts = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SyntheticSample s = generate_spheroid(specs[i]);
    const KeypointSet k = project_features(s.cloud, s.feature_centers, desk.projection);
    for (int offset : {1, 17, 90, 181, 359}) {
      for (auto mode : {SigmaMode::fixed, SigmaMode::adaptive}) {
        GaussianMapConfig g = desk.train.gaussian;
        g.mode = mode;
        shift_ok &= gaussian_map(shift_keypoints(k, offset), g).values == shift_map(gaussian_map(k, g), offset).values;
      }
      shift_ok &= density_map(shift_keypoints(k, offset), desk.train.density).values ==
                  shift_map(density_map(k, desk.train.density), offset).values;
      ++shifts;
    }
  }
  return {peak_ok && sum_ok && shift_ok,
          fmt("peak == 1.0 on 200 maps: %s; density sum worst rel error %.2e (<= 1e-6) over 100 sets; "
              "shift equivariance bit-exact on %d shifts x 3 regimes: %s",
              peak_ok ? "yes" : "no", worst_sum, shifts, shift_ok ? "yes" : "no")};
}

Verdict Acceptance::counting() {
  Rng rng(515);
  int mismatched = 0;
  for (int trial = 0; trial < 200; ++trial) {
    BinaryMap b{64, 64, 0.5, std::vector<std::uint8_t>(64 * 64)};
    const double density = 0.2 + 0.4 * rng.uniform();
    for (auto& c : b.cells) c = rng.uniform() < density;
    const int conn = trial % 2 ? 8 : 4;
    const bool wrap = trial % 4 < 2;
    const auto got = connected_components(b, conn, wrap);
    const auto want = testing::flood_fill(b, conn, wrap);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      auto px = got[i].pixels;
      std::sort(px.begin(), px.end(), [](const Pixel& a, const Pixel& c) {
        return std::tie(a.row, a.col) < std::tie(c.row, c.col);
      });
      same = px == want[i];
    }
    mismatched += !same;
  }

  // Noiseless maps with kernels at least 4 sigma apart. `edge_margin` keeps
  // keypoints off the top and bottom rows, where the thresholded disc is cut
  // by the raster edge and its pixel mean is pulled inward.
  auto recover = [&](double edge_margin, int& wrong, double& worst) {
    for (int trial = 0; trial < 50; ++trial) {
      const double sigma = trial % 2 ? 2.5 : 1.25;
      const double lo = edge_margin * sigma, hi = 95.0 - edge_margin * sigma;
      KeypointSet k{96, 360, 1.0, 0, {}};
      const int want = 10 + trial;
      for (int guard = 0; static_cast<int>(k.size()) < want && guard < 100000; ++guard) {
        const Keypoint p{rng.uniform(lo, hi), rng.uniform(0.0, 360.0)};
        bool ok = true;
        for (const auto& q : k.points) ok &= pixel_distance(p, q, 360, true) >= 4.0 * sigma;
        if (ok) k.points.push_back(p);
      }
      GaussianMapConfig g;
      g.sigma = sigma;
      const CountResult res = count_from_gaussian(gaussian_map(k, g), 0.33);
      wrong += res.count != static_cast<double>(k.size());
      for (const auto& p : k.points) {
        double best = 1e9;
        for (const auto& c : res.centers) best = std::min(best, pixel_distance(p, c, 360, true));
        worst = std::max(worst, best);
      }
    }
  };
  int wrong_counts = 0, edge_wrong = 0;
  double worst_center = 0.0, edge_worst = 0.0;
  recover(2.0, wrong_counts, worst_center);
  recover(0.0, edge_wrong, edge_worst);
  note(fmt("reference, keypoints anywhere in the rows: wrong counts %d/50, worst centre error %.3f px", edge_wrong,
           edge_worst));
  return {mismatched == 0 && wrong_counts == 0 && worst_center < 0.6,
          fmt("flood-fill mismatches %d/200; wrong counts %d/50 at >= 4 sigma separation, 2 sigma from the top and bottom rows; worst centre error %.3f px "
              "(< 0.6)",
              mismatched, wrong_counts, worst_center)};
}

Verdict Acceptance::overfit() {
  const auto t0 = Clock::now();
  RunConfig cfg = make_preset("desk");
  TrainConfig tc = cfg.train;
  tc.batch_size = 1;
  tc.augment = false;
  tc.max_epochs = 200;
  tc.plateau_patience = tc.max_epochs;
  SpecRanges ranges = cfg.synth;
  const SyntheticSample s = generate_spheroid(draw_specs(1, ranges, 606).front());

  auto run = [&](TargetMode mode) {
    TrainConfig t = tc;
    t.target_mode = mode;
    GNetConfig net = cfg.network;
    configure_for_target(net, mode);
    const std::vector<Sample> one{make_sample("one", s.cloud, s.feature_centers, cfg.projection, t)};
    double floor = 0.0;
    for (double y : one[0].target.values)
      if (y > 0.0 && y < 1.0) floor -= y * std::log(y) + (1.0 - y) * std::log1p(-y);
    floor /= static_cast<double>(one[0].target.values.size());
    auto model = GNetModel<float>::build(net, 1);
    const double initial = evaluate_loss(model, one, t);
    train(model, one, one, t);
    const double final_loss = evaluate_loss(model, one, t);
    return std::tuple{initial, final_loss, floor, one[0].keypoints.size()};
  };

  const auto [i0, f0, fl0, n] = run(tc.target_mode);
  const double t = seconds_since(t0);
  note(fmt("%s target, %zu features: BCE %.4f -> %.4f (%.1f%% of initial); target entropy floor %.4f (%.1f%%)",
           to_string(tc.target_mode), n, i0, f0, 100.0 * f0 / i0, fl0, 100.0 * fl0 / i0));
  const auto [i1, f1, fl1, n1] = run(TargetMode::gaussian_fixed);
  note(fmt("gaussian_fixed target (reference only): BCE %.4f -> %.4f (%.1f%%); entropy floor %.4f (%.1f%%)", i1, f1,
           100.0 * f1 / i1, fl1, 100.0 * fl1 / i1));
  (void)n1;
  return {f0 < 0.2 * i0 && t < 300.0,
          fmt("%s, 200 epochs: final/initial BCE %.3f (< 0.2), %.0f s for the criterion run (< 300 s)",
              to_string(tc.target_mode), f0 / i0, t)};
}

// ---------------------------------------------------------------------------

Benchmark& Acceptance::bench() {
  if (bench_) return *bench_;
  const auto t0 = Clock::now();
  Benchmark b;
  b.cfg = make_preset("desk");
  const auto specs = draw_specs(80, b.cfg.synth, 2024);
  std::vector<Projected> all(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SyntheticSample s = generate_spheroid(specs[i]);
    all[i] = {fmt("%03zu", i), project_roi(s.cloud, b.cfg.projection),
              project_features(s.cloud, s.feature_centers, b.cfg.projection)};
  }
  const Split split = split_dataset(all.size(), b.cfg.train.split_fraction, b.cfg.train.seed);
  const auto n_val = static_cast<std::size_t>(std::llround(b.cfg.train.val_fraction * split.train.size()));
  for (std::size_t i = 0; i < split.train.size(); ++i) (i < n_val ? b.val : b.train).push_back(all[split.train[i]]);
  for (auto i : split.test) b.test.push_back(all[i]);
  note(fmt("benchmark data: %zu train, %zu validation, %zu test spheroids (%.1f s)", b.train.size(), b.val.size(),
           b.test.size(), seconds_since(t0)));
  bench_ = std::move(b);
  return *bench_;
}

fs::path Acceptance::train_run(const std::string& label, TargetMode mode, UpsampleMode up) {
  Benchmark& b = bench();
  if (auto it = b.runs.find(label); it != b.runs.end()) return it->second;
  RunConfig cfg = b.cfg;
  cfg.train.target_mode = mode;
  cfg.network.upsample = up;
  configure_for_target(cfg.network, mode);
  cfg.validate();
  std::string dirname = label;
  std::replace(dirname.begin(), dirname.end(), '/', '_');
  const fs::path dir = work_ / "runs" / dirname;
  fs::remove_all(dir);
  auto model = GNetModel<float>::build(cfg.network, cfg.train.seed);
  TrainHooks hooks;
  hooks.run_dir = dir;
  hooks.config_json = to_json_string(cfg);
  const auto t0 = Clock::now();
  const TrainResult r = train(model, as_samples(b.train, cfg.train), as_samples(b.val, cfg.train), cfg.train, hooks);
  note(fmt("trained %-28s %3zu epochs, best epoch %2d, val loss %.5f, %.0f s", label.c_str(), r.history.size(),
           r.best_epoch, r.best_val_loss, seconds_since(t0)));
  b.runs[label] = dir;
  return dir;
}

GNetModel<float> Acceptance::load_model(const fs::path& run, RunConfig* cfg_out) {
  const RunConfig cfg = load_run_config(run / "config.json");
  auto model = GNetModel<float>::build(read_gnet_config(run / "model.json"), 0);
  model.load_state_dict(read_smw1(run / "model.smw"));
  if (cfg_out) *cfg_out = cfg;
  return model;
}

CountResult count_prediction(GNetModel<float>& model, const RasterGrid& raster, const RunConfig& cfg) {
  const Prediction p = predict(model, raster, cfg.train);
  if (p.map.kind == MapKind::density) return count_from_density(p.map);
  return count_from_gaussian(p.map, cfg.train.gaussian.p_t, cfg.min_cluster_size, cfg.train.gaussian.wrap_azimuth);
}

Verdict Acceptance::synthetic_benchmark() {
  const auto t0 = Clock::now();
  Benchmark& b = bench();
  struct Row {
    std::string label;
    TargetMode mode;
    UpsampleMode up;
  };
  const std::vector<Row> rows{
      {"gaussian_adaptive", TargetMode::gaussian_adaptive, UpsampleMode::transpose_dilated},
      {"gaussian_fixed", TargetMode::gaussian_fixed, UpsampleMode::transpose_dilated},
      {"density", TargetMode::density, UpsampleMode::transpose_dilated},
      {"gaussian_adaptive/transpose", TargetMode::gaussian_adaptive, UpsampleMode::transpose},
      {"gaussian_adaptive/nearest_upsample", TargetMode::gaussian_adaptive, UpsampleMode::nearest_upsample},
  };

  std::vector<MethodResult> results;
  std::map<std::string, MetricsReport> reports;
  for (const auto& row : rows) {
    const fs::path dir = train_run(row.label, row.mode, row.up);
    RunConfig cfg;
    auto model = load_model(dir, &cfg);
    MethodResult mr{row.label, {}};
    for (const auto& s : b.test)
      mr.pairs.push_back({static_cast<double>(s.keypoints.size()), count_prediction(model, s.raster, cfg).count});
    reports[row.label] = evaluate_counts(mr.pairs);
    results.push_back(std::move(mr));
  }
  MethodResult nms{"nms", {}};
  for (const auto& s : b.test)
    nms.pairs.push_back({static_cast<double>(s.keypoints.size()), nms_baseline(s.raster, b.cfg.nms_beta).count});
  reports["nms"] = evaluate_counts(nms.pairs);
  results.push_back(nms);
  export_report(work_ / "benchmark_report", results);

  double mean_true = 0.0;
  for (const auto& s : b.test) mean_true += static_cast<double>(s.keypoints.size());
  mean_true /= static_cast<double>(b.test.size());

  std::printf("    %-36s %9s %9s %8s %8s\n", "method", "MAE", "RMSE", "FP%", "FN%");
  for (const auto& m : results) {
    const auto& r = reports[m.method];
    std::printf("    %-36s %9.3f %9.3f %8.2f %8.2f\n", m.method.c_str(), r.mae, r.rmse, r.fp_pct, r.fn_pct);
  }
  note(fmt("mean true count %.2f over %zu test spheroids; report in %s", mean_true, b.test.size(),
           (work_ / "benchmark_report").c_str()));

  const double a = reports["gaussian_adaptive"].mae, f = reports["gaussian_fixed"].mae,
               d = reports["density"].mae, n = reports["nms"].mae;
  const bool ca = a < 0.1 * mean_true, cb = a <= f + 2.0, cc = a < d && f < d && a < n && f < n;
  const bool cd = reports.count("gaussian_adaptive/transpose") && reports.count("gaussian_adaptive/nearest_upsample");
  note(fmt("(a) adaptive MAE %.3f < %.3f: %s", a, 0.1 * mean_true, ca ? "yes" : "no"));
  note(fmt("(b) adaptive MAE %.3f <= fixed MAE + 2 = %.3f: %s", a, f + 2.0, cb ? "yes" : "no"));
  note(fmt("(c) adaptive %.3f and fixed %.3f below density %.3f and NMS %.3f: %s", a, f, d, n, cc ? "yes" : "no"));
  note(fmt("(d) upsample ablation over 3 modes reported: %s", cd ? "yes" : "no"));
  const double t = seconds_since(t0);
  return {ca && cb && cc && cd && t < 4 * 3600.0,
          fmt("(a) %s (b) %s (c) %s (d) %s; %.0f s (< 4 h)", ca ? "ok" : "FAIL", cb ? "ok" : "FAIL",
              cc ? "ok" : "FAIL", cd ? "ok" : "FAIL", t)};
}

Verdict Acceptance::unannotated_region() {
  const fs::path dir = train_run("gaussian_adaptive", TargetMode::gaussian_adaptive, UpsampleMode::transpose_dilated);
  RunConfig cfg;
  auto model = load_model(dir, &cfg);
  const ProjectionConfig& proj = cfg.projection;

  // Spheroids with features over a wide colatitude band, at the training
  // feature density, so that many features sit outside the annotated rows.
  const double band_lo = 10.0, band_hi = 170.0;
  const double area_ratio = (std::cos(band_lo * std::numbers::pi / 180.0) - std::cos(band_hi * std::numbers::pi / 180.0)) /
                            (std::cos(cfg.synth.feature_theta_min * std::numbers::pi / 180.0) -
                             std::cos(cfg.synth.feature_theta_max * std::numbers::pi / 180.0));
  auto specs = draw_specs(4, cfg.synth, 808);
  std::size_t probes = 0, recovered = 0, inside = 0, inside_found = 0;
  for (auto& spec : specs) {
    spec.feature_theta_min = band_lo;
    spec.feature_theta_max = band_hi;
    spec.n_features = static_cast<int>(std::lround(spec.n_features * area_ratio));
    const SyntheticSample s = generate_spheroid(spec);
    const PointCloud rotated = rotate_about_x(s.cloud, 90.0);
    const RasterGrid raster = project_roi(rotated, proj);
    const CountResult pred = count_prediction(model, raster, cfg);
    for (const auto& c : s.feature_centers) {
      const bool annotated = !project_features(s.cloud, {c}, proj).points.empty();
      const KeypointSet k = project_features(rotated, {rotate_point_about_x(c, 90.0)}, proj);
      if (k.points.empty()) continue;
      double best = 1e9;
      for (const auto& p : pred.centers) best = std::min(best, pixel_distance(p, k.points[0], raster.width(), true));
      if (annotated) {
        ++inside;
        inside_found += best <= 3.0;
      } else {
        ++probes;
        recovered += best <= 3.0;
      }
    }
  }
  const double frac = probes ? static_cast<double>(recovered) / probes : 0.0;
  note(fmt("features that were inside the original ROI: %zu/%zu recovered", inside_found, inside));
  return {probes > 0 && frac >= 0.8,
          fmt("%zu/%zu out-of-original-ROI features recovered within 3 px (%.1f%%, >= 80%%) on 4 spheroids rotated 90 "
              "deg about x",
              recovered, probes, 100.0 * frac)};
}

Verdict Acceptance::throughput() {
  const fs::path dir = train_run("gaussian_adaptive", TargetMode::gaussian_adaptive, UpsampleMode::transpose_dilated);
  RunConfig cfg;
  auto model = load_model(dir, &cfg);
  const SyntheticSample s = generate_spheroid(draw_specs(1, cfg.synth, 909).front());
  std::string detail = fmt("%d thread(s): ", thread_count());
  for (double delta : {1.0, 0.5}) {
    ProjectionConfig proj = cfg.projection;
    proj.delta = delta;
    const RasterGrid raster = project_roi(s.cloud, proj);
    RunConfig c = cfg;
    if (delta == 0.5) {
      c.train.gaussian.sigma *= 2.0;
      c.train.gaussian.beta *= 2.0;
    }
    std::vector<double> times;
    double count = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto t0 = Clock::now();
      count = count_prediction(model, raster, c).count;
      times.push_back(seconds_since(t0));
    }
    std::sort(times.begin(), times.end());
    const double med = times[times.size() / 2];
    detail += fmt("delta %.1f (%dx%d) %.1f ms median, %.2f FPS, count %.0f; ", delta, raster.width(), raster.height(),
                  1e3 * med, 1.0 / med, count);
  }
  detail += "report only";
  return {true, detail};
}

Verdict Acceptance::determinism() {
  Benchmark& b = bench();
  const fs::path dir = train_run("gaussian_adaptive", TargetMode::gaussian_adaptive, UpsampleMode::transpose_dilated);
  RunConfig cfg;
  auto model = load_model(dir, &cfg);

  // Save and load.
  const auto state = model.state_dict();
  const fs::path copy = work_ / "determinism" / "copy.smw";
  fs::create_directories(copy.parent_path());
  write_smw1(copy, state);
  auto reloaded = GNetModel<float>::build(cfg.network, 12345);
  reloaded.load_state_dict(read_smw1(copy));
  const bool state_same = reloaded.state_dict() == state && read_bytes(copy) == read_bytes(dir / "model.smw");
  const Prediction p0 = predict(model, b.test.front().raster, cfg.train);
  const Prediction p1 = predict(reloaded, b.test.front().raster, cfg.train);
  const bool pred_same = p0.map.values == p1.map.values;

  // Two short retrains from the same seed.
  RunConfig short_cfg = b.cfg;
  short_cfg.train.max_epochs = 3;
  const auto tr = as_samples(b.train, short_cfg.train), va = as_samples(b.val, short_cfg.train);
  std::vector<fs::path> dirs;
  for (int k = 0; k < 2; ++k) {
    const fs::path d = work_ / "determinism" / fmt("retrain_%d", k);
    fs::remove_all(d);
    auto m = GNetModel<float>::build(short_cfg.network, short_cfg.train.seed);
    TrainHooks hooks;
    hooks.run_dir = d;
    hooks.config_json = to_json_string(short_cfg);
    train(m, tr, va, short_cfg.train, hooks);
    dirs.push_back(d);
  }
  const std::string m0 = read_bytes(dirs[0] / "metrics.csv"), m1 = read_bytes(dirs[1] / "metrics.csv");
  const bool metrics_same = !m0.empty() && m0 == m1;
  const bool weights_same = read_bytes(dirs[0] / "model.smw") == read_bytes(dirs[1] / "model.smw");
  return {state_same && pred_same && metrics_same && weights_same,
          fmt("save/load state bit-exact: %s; reloaded prediction bit-exact: %s; retrain metrics.csv bit-exact: %s; "
              "retrain weights bit-exact: %s",
              state_same ? "yes" : "no", pred_same ? "yes" : "no", metrics_same ? "yes" : "no",
              weights_same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"End-to-end acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work, "Directory for datasets, runs and reports");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  Acceptance acc(work);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"geometry round trip", [&] { return acc.geometry_round_trip(); }},
      {"projection shapes", [&] { return acc.projection_shapes(); }},
      {"gradient checks", [&] { return acc.gradient_checks(); }},
      {"target maps", [&] { return acc.target_maps(); }},
      {"connected-component counting", [&] { return acc.counting(); }},
      {"overfit one sample", [&] { return acc.overfit(); }},
      {"synthetic end-to-end benchmark", [&] { return acc.synthetic_benchmark(); }},
      {"unannotated-region probe", [&] { return acc.unannotated_region(); }},
      {"throughput report", [&] { return acc.throughput(); }},
      {"checkpoint and run determinism", [&] { return acc.determinism(); }},
  };

  int failures = 0;
  std::vector<std::string> summary;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    std::printf("[%2d] %s\n", id, criteria[i].first.c_str());
    std::fflush(stdout);
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    const std::string line = fmt("%s %2d %-32s ", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str()) + v.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary.push_back(line);
  }
  std::printf("\nsummary\n");
  for (const auto& s : summary) std::printf("%s\n", s.c_str());
  return failures == 0 ? 0 : 1;
}
